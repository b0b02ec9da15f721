#pragma once

// Experiment harness behind forsctl: YAML config -> sampler run -> CSV samples
// plus a JSON summary. Kept as a library so the tests drive it in-process.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "fors/diffusion.hpp"
#include "fors/gaussian_tilt.hpp"
#include "fors/metrics.hpp"
#include "fors/scores.hpp"

namespace fors::harness {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class ExperimentKind { ForsOracle, Tilt, Diffuse, Prox, Bench };

const char* to_string(ExperimentKind k);

/// A value that is either given in the config or left to the documented
/// default ("auto").
using Auto = std::optional<double>;

struct OracleSection {
  std::vector<double> proposal;  // empty = uniform over tilt.size() states
  std::vector<double> tilt;      // w(x) for each state
  double noise = 0.0;            // W = w(x) + noise * U(-1, 1)
  double delta = 0.05;           // tail level for the draw bound
  bool operator==(const OracleSection&) const = default;
};

struct TargetSection {
  std::string name = "quadratic";  // quadratic | logcosh-quadratic | custom
  std::size_t dim = 1;
  double lambda = 1.0;
  double logcosh = 0.0;  // custom only
  double quadratic = 0.0;
  double linear = 0.0;
  bool operator==(const TargetSection&) const = default;
};

struct TiltSection {
  Auto eta;  // unset = eta_max
  std::vector<double> x0;
  double delta = 0.1;
  double c = 64.0;
  AnchorPolicy anchor = AnchorPolicy::Warn;
  bool operator==(const TiltSection&) const = default;
};

struct DataSection {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  std::vector<double> variances;
  bool operator==(const DataSection&) const = default;
};

struct DiffusionSection {
  MethodKind method = MethodKind::Simple;
  double delta = 0.1;
  double c = 8.0;
  Auto l_delta;
  Auto d_star;
  Auto sigma1_sq;
  Auto bar_delta;
  Auto g;
  std::size_t max_steps = 1'000'000;
  bool operator==(const DiffusionSection&) const = default;
};

struct ScoreSection {
  double eps = 0.0;
  PerturbationMode perturbation = PerturbationMode::ConstantBias;
  bool operator==(const ScoreSection&) const = default;
};

struct ProxSection {
  Auto eta;  // unset = eta_max
  std::size_t n_iterations = 1000;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  std::size_t n_chains = 1;
  std::vector<double> x_init;
  double delta = 0.1;
  double c = 64.0;
  AnchorPolicy anchor = AnchorPolicy::Warn;
  Auto prox_tol;
  std::uint64_t max_prox_iters = 1000;
  bool operator==(const ProxSection&) const = default;
};

/// Bench variants: "ddpm" is the baseline sampler, the rest are FORS methods.
struct BenchSection {
  std::vector<std::string> methods{"ddpm", "simple"};
  std::vector<double> eps{0.0};
  MethodKind schedule_method = MethodKind::Simple;
  bool operator==(const BenchSection&) const = default;
};

struct OutputSection {
  std::string dir = "out";
  std::string samples = "samples.csv";
  std::string summary = "summary.json";
  bool operator==(const OutputSection&) const = default;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::ForsOracle;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  double clip_bound = 1.0;
  std::uint64_t max_outer_iters = 1'000'000;
  OracleSection oracle;
  TargetSection target;
  TiltSection tilt;
  DataSection data;
  DiffusionSection diffusion;
  ScoreSection score;
  ProxSection prox;
  BenchSection bench;
  OutputSection output;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Schema violation. `line` is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, int line, int column, const std::string& msg);
  std::string field;
  int line;
  int column;
};

ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Normalized echo; feeding `dump()` of it back to parse_config gives an
/// equal config.
json config_to_json(const ExperimentConfig& cfg);

struct Runtime {
  std::string timestamp;
  double wall_clock_seconds = 0.0;
  std::size_t workers = 1;
  bool operator==(const Runtime&) const = default;
};

/// Everything except `runtime` is a deterministic function of config + seed.
struct RunReport {
  int schema_version = kSchemaVersion;
  std::string status = "ok";  // ok | failed
  bool partial = false;
  std::optional<std::string> error;
  std::string experiment;
  std::uint64_t seed = 0;
  json config;
  std::map<std::string, std::uint64_t> counts;
  std::map<std::string, MetricReport> metrics;
  std::map<std::string, json> values;  // NaN stored as null
  json table = json::array();
  std::vector<std::string> warnings;
  std::map<std::string, std::string> files;
  Runtime runtime;

  bool operator==(const RunReport& other) const;
};

json to_json(const RunReport& r);
RunReport report_from_json(const json& j);

/// Doubles are written with 17 significant digits so they reload bit-exactly.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_numbers(const std::vector<double>& row);
  double number(std::size_t row, std::size_t col) const;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

struct RunOptions {
  std::size_t workers = 1;
  bool strict = false;
};

struct RunOutput {
  RunReport report;
  std::map<std::string, CsvTable> files;  // file name -> contents
};

/// Runs one experiment in memory. Throws ConfigError for config problems
/// that need computation to detect (strict-mode step sizes) and any sampler
/// error otherwise; `partial` receives counts gathered before a failure.
RunOutput run_experiment(const ExperimentConfig& cfg, const RunOptions& opts, RunReport* partial = nullptr);

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::size_t workers = 1;
  bool strict = false;
};

/// Exit codes for forsctl.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Loads, runs and writes artifacts. Messages go to `err`.
int run_command(const std::filesystem::path& config_path, const CliOverrides& ov, std::ostream& err);

/// Validates a config without running it.
int check_command(const std::filesystem::path& config_path, std::ostream& err);

/// Summary JSON with the runtime block removed, for determinism comparisons.
json deterministic_view(const json& summary);

}  // namespace fors::harness
