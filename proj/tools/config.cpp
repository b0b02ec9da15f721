#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "harness.hpp"

namespace fors::harness {

const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::ForsOracle: return "fors-oracle";
    case ExperimentKind::Tilt: return "tilt";
    case ExperimentKind::Diffuse: return "diffuse";
    case ExperimentKind::Prox: return "prox";
    case ExperimentKind::Bench: return "bench-ddpm-vs-fors";
  }
  return "?";
}

namespace {

std::string describe(const std::string& field, int line, int column, const std::string& msg) {
  std::ostringstream os;
  if (line > 0) os << "line " << line << ", column " << column << ": ";
  os << field << ": " << msg;
  return os.str();
}

}  // namespace

ConfigError::ConfigError(std::string f, int l, int c, const std::string& msg)
    : std::runtime_error(describe(f, l, c, msg)), field(std::move(f)), line(l), column(c) {}

namespace {

std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

[[noreturn]] void fail(const std::string& field, const YAML::Node& at, const std::string& msg) {
  const YAML::Mark m = at.Mark();
  throw ConfigError(field, m.line >= 0 ? m.line + 1 : 0, m.column >= 0 ? m.column + 1 : 0, msg);
}

/// One YAML mapping with a closed key set. Unknown keys fail at construction.
class Section {
 public:
  // yaml-cpp nodes alias on assignment and a missing key yields an invalid
  // node, so both members are built here once and never reassigned.
  Section(const YAML::Node& node, std::string path, std::initializer_list<const char*> allowed,
          const YAML::Node& parent_for_errors)
      : node_(present(node) ? node : YAML::Node(YAML::NodeType::Map)),
        anchor_(present(node) ? node : parent_for_errors),
        path_(std::move(path)) {
    if (!present(node)) return;
    if (!node_.IsMap()) fail(path_.empty() ? "config" : path_, node_, "expected a mapping");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!ok.contains(key)) {
        std::string list;
        for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
        fail(join_path(path_, key), kv.first, "unknown key (allowed here: " + list + ")");
      }
    }
  }

  static bool present(const YAML::Node& n) { return n.IsDefined() && !n.IsNull(); }

  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }
  YAML::Node at(const std::string& key) const { return node_[key]; }
  std::string field(const std::string& key) const { return join_path(path_, key); }
  const YAML::Node& anchor() const { return anchor_; }

  YAML::Node require(const std::string& key) const {
    YAML::Node n = node_[key];
    if (!n) fail(field(key), anchor_, "required key is missing");
    return n;
  }

  double number(const std::string& key, double def) const {
    return has(key) ? to_number(at(key), field(key)) : def;
  }
  double required_number(const std::string& key) const { return to_number(require(key), field(key)); }

  std::uint64_t integer(const std::string& key, std::uint64_t def) const {
    return has(key) ? to_integer(at(key), field(key)) : def;
  }
  std::uint64_t required_integer(const std::string& key) const { return to_integer(require(key), field(key)); }

  std::string text(const std::string& key, const std::string& def) const {
    if (!has(key)) return def;
    const YAML::Node n = at(key);
    if (!n.IsScalar()) fail(field(key), n, "expected a string");
    return n.as<std::string>();
  }

  /// A number or the string "auto".
  Auto optional_number(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    const YAML::Node n = at(key);
    if (n.IsScalar() && n.Scalar() == "auto") return std::nullopt;
    return to_number(n, field(key));
  }

  /// A sequence of numbers; a bare scalar is read as a one-element list.
  std::vector<double> numbers(const std::string& key) const {
    const YAML::Node n = at(key);
    std::vector<double> out;
    if (!n) return out;
    if (n.IsScalar()) return {to_number(n, field(key))};
    if (!n.IsSequence()) fail(field(key), n, "expected a number or a list of numbers");
    for (std::size_t i = 0; i < n.size(); ++i)
      out.push_back(to_number(n[i], field(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<std::string> strings(const std::string& key) const {
    const YAML::Node n = at(key);
    std::vector<std::string> out;
    if (!n) return out;
    if (n.IsScalar()) return {n.as<std::string>()};
    if (!n.IsSequence()) fail(field(key), n, "expected a list of strings");
    for (std::size_t i = 0; i < n.size(); ++i) {
      if (!n[i].IsScalar()) fail(field(key) + "[" + std::to_string(i) + "]", n[i], "expected a string");
      out.push_back(n[i].as<std::string>());
    }
    return out;
  }

  static double to_number(const YAML::Node& n, const std::string& field) {
    if (!n.IsScalar()) fail(field, n, "expected a number");
    double v = 0.0;
    try {
      v = n.as<double>();
    } catch (const YAML::Exception&) {
      fail(field, n, "expected a number, got '" + n.Scalar() + "'");
    }
    if (!std::isfinite(v)) fail(field, n, "must be finite");
    return v;
  }

  static std::uint64_t to_integer(const YAML::Node& n, const std::string& field) {
    if (!n.IsScalar()) fail(field, n, "expected a non-negative integer");
    const std::string& s = n.Scalar();
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size()) return v;
    // Also accept integral floating literals such as 1e5.
    double d = 0.0;
    try {
      d = n.as<double>();
    } catch (const YAML::Exception&) {
      fail(field, n, "expected a non-negative integer, got '" + s + "'");
    }
    if (!(d >= 0.0) || d != std::floor(d) || d > 9.0e15)
      fail(field, n, "expected a non-negative integer, got '" + s + "'");
    return static_cast<std::uint64_t>(d);
  }

 private:
  YAML::Node node_;
  YAML::Node anchor_;
  std::string path_;
};

void check(bool ok, const Section& s, const std::string& key, const std::string& msg) {
  if (ok) return;
  fail(s.field(key), s.has(key) ? s.at(key) : s.anchor(), msg);
}

MethodKind parse_method(const Section& s, const std::string& key, MethodKind def) {
  if (!s.has(key)) return def;
  const std::string v = s.text(key, "");
  for (MethodKind m : {MethodKind::Simple, MethodKind::DdpmLike, MethodKind::Adaptive})
    if (v == to_string(m)) return m;
  fail(s.field(key), s.at(key), "unknown method '" + v + "' (expected simple, ddpm-like or adaptive)");
}

AnchorPolicy parse_anchor(const Section& s) {
  const std::string v = s.text("anchor", "warn");
  if (v == "warn") return AnchorPolicy::Warn;
  if (v == "strict") return AnchorPolicy::Strict;
  fail(s.field("anchor"), s.at("anchor"), "expected warn or strict, got '" + v + "'");
}

/// Fills `out` from a scalar (broadcast) or a list of length `dim`.
std::vector<double> point(const Section& s, const std::string& key, std::size_t dim) {
  std::vector<double> v = s.numbers(key);
  if (v.empty()) fail(s.field(key), s.anchor(), "required key is missing");
  if (v.size() == 1 && dim > 1) v.assign(dim, v.front());
  check(v.size() == dim, s, key, "expected " + std::to_string(dim) + " coordinates, got " + std::to_string(v.size()));
  return v;
}

void parse_fors(const YAML::Node& root, ExperimentConfig& cfg) {
  const Section s(root["fors"], "fors", {"clip_bound", "max_outer_iters"}, root);
  cfg.clip_bound = s.number("clip_bound", 1.0);
  check(cfg.clip_bound > 0.0, s, "clip_bound", "must be > 0");
  cfg.max_outer_iters = s.integer("max_outer_iters", 1'000'000);
  check(cfg.max_outer_iters >= 1, s, "max_outer_iters", "must be >= 1");
}

void parse_oracle(const YAML::Node& root, ExperimentConfig& cfg) {
  const Section s(root["oracle"], "oracle", {"proposal", "tilt", "noise", "delta"}, root);
  auto& o = cfg.oracle;
  s.require("tilt");
  o.tilt = s.numbers("tilt");
  check(o.tilt.size() >= 2, s, "tilt", "need at least 2 states");
  o.proposal = s.numbers("proposal");
  if (!o.proposal.empty()) {
    check(o.proposal.size() == o.tilt.size(), s, "proposal", "must have one probability per tilt entry");
    double total = 0.0;
    for (double p : o.proposal) {
      check(p > 0.0, s, "proposal", "probabilities must be > 0");
      total += p;
    }
    check(std::abs(total - 1.0) <= 1e-9, s, "proposal", "probabilities must sum to 1");
  }
  o.noise = s.number("noise", 0.0);
  check(o.noise >= 0.0, s, "noise", "must be >= 0");
  for (double w : o.tilt)
    check(std::abs(w) + o.noise <= cfg.clip_bound, s, "tilt",
          "|tilt| + noise must not exceed fors.clip_bound (the estimator would leave [-B, B])");
  o.delta = s.number("delta", 0.05);
  check(o.delta > 0.0 && o.delta < 1.0, s, "delta", "must lie in (0, 1)");
}

void parse_target(const YAML::Node& root, ExperimentConfig& cfg) {
  const Section s(root["target"], "target", {"name", "dim", "lambda", "logcosh", "quadratic", "linear"}, root);
  auto& t = cfg.target;
  t.name = s.text("name", "quadratic");
  check(t.name == "quadratic" || t.name == "logcosh-quadratic" || t.name == "custom", s, "name",
        "unknown target '" + t.name + "' (expected quadratic, logcosh-quadratic or custom)");
  t.dim = s.integer("dim", 1);
  check(t.dim >= 1, s, "dim", "must be >= 1");
  const bool custom = t.name == "custom";
  for (const char* k : {"logcosh", "quadratic", "linear"})
    check(custom || !s.has(k), s, k, "only valid with name: custom");
  check(!custom || !s.has("lambda"), s, "lambda", "not valid with name: custom (use quadratic)");
  t.lambda = s.number("lambda", 1.0);
  check(t.lambda >= 0.0, s, "lambda", "must be >= 0");
  t.logcosh = s.number("logcosh", 0.0);
  check(t.logcosh >= 0.0, s, "logcosh", "must be >= 0 for convexity");
  t.quadratic = s.number("quadratic", 0.0);
  check(t.quadratic >= 0.0, s, "quadratic", "must be >= 0 for convexity");
  t.linear = s.number("linear", 0.0);
}

void parse_tilt(const YAML::Node& root, ExperimentConfig& cfg) {
  const Section s(root["tilt"], "tilt", {"eta", "x0", "delta", "c", "anchor"}, root);
  auto& t = cfg.tilt;
  t.eta = s.optional_number("eta");
  check(!t.eta || *t.eta > 0.0, s, "eta", "must be > 0");
  t.x0 = point(s, "x0", cfg.target.dim);
  t.delta = s.number("delta", 0.1);
  check(t.delta > 0.0 && t.delta < 1.0, s, "delta", "must lie in (0, 1)");
  t.c = s.number("c", 64.0);
  check(t.c > 0.0, s, "c", "must be > 0");
  t.anchor = parse_anchor(s);
}

void parse_data(const YAML::Node& root, ExperimentConfig& cfg) {
  const Section s(root["data"], "data", {"weights", "means", "variances"}, root);
  auto& d = cfg.data;
  s.require("weights");
  d.weights = s.numbers("weights");
  const YAML::Node means = s.require("means");
  check(means.IsSequence(), s, "means", "expected a list (one entry per component)");
  d.means.clear();
  for (std::size_t i = 0; i < means.size(); ++i) {
    const std::string f = s.field("means") + "[" + std::to_string(i) + "]";
    if (means[i].IsScalar()) {
      d.means.push_back({Section::to_number(means[i], f)});
    } else if (means[i].IsSequence()) {
      std::vector<double> m;
      for (std::size_t j = 0; j < means[i].size(); ++j)
        m.push_back(Section::to_number(means[i][j], f + "[" + std::to_string(j) + "]"));
      d.means.push_back(std::move(m));
    } else {
      fail(f, means[i], "expected a number or a list of numbers");
    }
  }
  s.require("variances");
  d.variances = s.numbers("variances");
  GaussianMixture mix;
  mix.weights = d.weights;
  mix.variances = d.variances;
  for (const auto& m : d.means) mix.means.push_back(Vector(Eigen::Map<const Vector>(m.data(), static_cast<Eigen::Index>(m.size()))));
  try {
    mix.validate();
  } catch (const std::exception& e) {
    fail("data", s.anchor(), e.what());
  }
}

void parse_diffusion(const YAML::Node& root, ExperimentConfig& cfg) {
  const Section s(root["diffusion"], "diffusion",
                  {"method", "delta", "c", "l_delta", "d_star", "sigma1_sq", "bar_delta", "g", "max_steps"}, root);
  auto& d = cfg.diffusion;
  d.method = parse_method(s, "method", MethodKind::Simple);
  d.delta = s.number("delta", 0.1);
  check(d.delta > 0.0 && d.delta < 1.0, s, "delta", "must lie in (0, 1)");
  d.c = s.number("c", 8.0);
  check(d.c > 0.0, s, "c", "must be > 0");
  d.l_delta = s.optional_number("l_delta");
  check(!d.l_delta || *d.l_delta >= 1.0, s, "l_delta", "must be >= 1");
  d.d_star = s.optional_number("d_star");
  check(!d.d_star || *d.d_star >= 1.0, s, "d_star", "must be >= 1");
  d.sigma1_sq = s.optional_number("sigma1_sq");
  check(!d.sigma1_sq || (*d.sigma1_sq > 0.0 && *d.sigma1_sq < 1.0), s, "sigma1_sq", "must lie in (0, 1)");
  d.bar_delta = s.optional_number("bar_delta");
  check(!d.bar_delta || (*d.bar_delta > 0.0 && *d.bar_delta < 1.0), s, "bar_delta", "must lie in (0, 1)");
  d.g = s.optional_number("g");
  check(!d.g || *d.g >= 1.0, s, "g", "must be >= 1");
  d.max_steps = s.integer("max_steps", 1'000'000);
  check(d.max_steps >= 1, s, "max_steps", "must be >= 1");
}

void parse_score(const YAML::Node& root, ExperimentConfig& cfg) {
  const Section s(root["score"], "score", {"eps", "perturbation"}, root);
  cfg.score.eps = s.number("eps", 0.0);
  check(cfg.score.eps >= 0.0, s, "eps", "must be >= 0");
  const std::string p = s.text("perturbation", "constant-bias");
  if (p == "constant-bias") {
    cfg.score.perturbation = PerturbationMode::ConstantBias;
  } else if (p == "smooth-field") {
    cfg.score.perturbation = PerturbationMode::SmoothField;
    check(cfg.data.means.front().size() <= 2, s, "perturbation", "smooth-field supports data dimension <= 2");
  } else {
    fail(s.field("perturbation"), s.at("perturbation"),
         "unknown perturbation '" + p + "' (expected constant-bias or smooth-field)");
  }
}

void parse_prox(const YAML::Node& root, ExperimentConfig& cfg) {
  const Section s(root["prox"], "prox",
                  {"eta", "n_iterations", "burn_in", "thin", "n_chains", "x_init", "delta", "c", "anchor",
                   "prox_tol", "max_prox_iters"},
                  root);
  auto& p = cfg.prox;
  p.eta = s.optional_number("eta");
  check(!p.eta || *p.eta > 0.0, s, "eta", "must be > 0");
  p.n_iterations = s.required_integer("n_iterations");
  check(p.n_iterations >= 1, s, "n_iterations", "must be >= 1");
  p.burn_in = s.integer("burn_in", 0);
  check(p.burn_in < p.n_iterations, s, "burn_in", "must be smaller than n_iterations");
  p.thin = s.integer("thin", 1);
  check(p.thin >= 1, s, "thin", "must be >= 1");
  check((p.n_iterations - p.burn_in) / p.thin >= 100, s, "n_iterations",
        "need at least 100 kept samples per chain after burn-in and thinning");
  p.n_chains = s.integer("n_chains", 1);
  check(p.n_chains >= 1, s, "n_chains", "must be >= 1");
  p.x_init = point(s, "x_init", cfg.target.dim);
  p.delta = s.number("delta", 0.1);
  check(p.delta > 0.0 && p.delta < 1.0, s, "delta", "must lie in (0, 1)");
  p.c = s.number("c", 64.0);
  check(p.c > 0.0, s, "c", "must be > 0");
  p.anchor = parse_anchor(s);
  p.prox_tol = s.optional_number("prox_tol");
  check(!p.prox_tol || *p.prox_tol > 0.0, s, "prox_tol", "must be > 0");
  p.max_prox_iters = s.integer("max_prox_iters", 1000);
  check(p.max_prox_iters >= 1, s, "max_prox_iters", "must be >= 1");
}

void parse_bench(const YAML::Node& root, ExperimentConfig& cfg) {
  const Section s(root["bench"], "bench", {"methods", "eps", "schedule_method"}, root);
  auto& b = cfg.bench;
  if (s.has("methods")) b.methods = s.strings("methods");
  check(!b.methods.empty(), s, "methods", "need at least one method");
  std::set<std::string> seen;
  for (const auto& m : b.methods) {
    check(m == "ddpm" || m == "simple" || m == "ddpm-like" || m == "adaptive", s, "methods",
          "unknown method '" + m + "' (expected ddpm, simple, ddpm-like or adaptive)");
    check(seen.insert(m).second, s, "methods", "duplicate method '" + m + "'");
  }
  if (s.has("eps")) b.eps = s.numbers("eps");
  check(!b.eps.empty(), s, "eps", "need at least one eps value");
  std::set<double> seen_eps;
  for (double e : b.eps) {
    check(e >= 0.0, s, "eps", "values must be >= 0");
    check(seen_eps.insert(e).second, s, "eps", "duplicate eps value");
  }
  b.schedule_method = parse_method(s, "schedule_method", MethodKind::Simple);
  check(cfg.data.means.front().size() <= 2, s, "methods", "bench supports data dimension 1 or 2 only");
}

void parse_output(const YAML::Node& root, ExperimentConfig& cfg) {
  const Section s(root["output"], "output", {"dir", "samples", "summary"}, root);
  cfg.output.dir = s.text("dir", "out");
  cfg.output.samples = s.text("samples", "samples.csv");
  cfg.output.summary = s.text("summary", "summary.json");
  for (const char* k : {"dir", "samples", "summary"})
    check(!s.text(k, "x").empty(), s, k, "must not be empty");
  for (const char* k : {"samples", "summary"})
    check(std::filesystem::path(s.text(k, "x")).filename() == s.text(k, "x"), s, k,
          "must be a plain file name (set the directory with output.dir)");
}

}  // namespace

ExperimentConfig parse_config(const std::string& yaml_text) {
  const YAML::Node root = [&] {
    try {
      return YAML::Load(yaml_text);
    } catch (const YAML::ParserException& e) {
      throw ConfigError("config", e.mark.line + 1, e.mark.column + 1, std::string("YAML syntax error: ") + e.msg);
    }
  }();
  if (!root || root.IsNull()) throw ConfigError("config", 0, 0, "empty configuration");

  const Section top(root, "",
                    {"experiment", "seed", "n_samples", "fors", "oracle", "target", "tilt", "data", "diffusion",
                     "score", "prox", "bench", "output"},
                    root);
  ExperimentConfig cfg;
  const std::string kind = top.text("experiment", "");
  bool known = false;
  for (ExperimentKind k : {ExperimentKind::ForsOracle, ExperimentKind::Tilt, ExperimentKind::Diffuse,
                           ExperimentKind::Prox, ExperimentKind::Bench}) {
    if (kind == to_string(k)) {
      cfg.experiment = k;
      known = true;
    }
  }
  if (!top.has("experiment")) fail("experiment", root, "required key is missing");
  if (!known)
    fail("experiment", top.at("experiment"),
         "unknown experiment '" + kind + "' (expected fors-oracle, tilt, diffuse, prox or bench-ddpm-vs-fors)");

  // Sections each experiment reads; anything else is rejected.
  std::set<std::string> used{"experiment", "seed", "fors", "output"};
  switch (cfg.experiment) {
    case ExperimentKind::ForsOracle: used.insert({"n_samples", "oracle"}); break;
    case ExperimentKind::Tilt: used.insert({"n_samples", "target", "tilt"}); break;
    case ExperimentKind::Diffuse: used.insert({"n_samples", "data", "diffusion", "score"}); break;
    case ExperimentKind::Prox: used.insert({"target", "prox"}); break;
    case ExperimentKind::Bench: used.insert({"n_samples", "data", "diffusion", "score", "bench"}); break;
  }
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (!used.contains(key)) fail(key, kv.first, std::string("not used by experiment '") + kind + "'");
  }

  cfg.seed = top.required_integer("seed");
  if (used.contains("n_samples")) {
    cfg.n_samples = top.required_integer("n_samples");
    const std::size_t min_n = cfg.experiment == ExperimentKind::ForsOracle ? 1 : 100;
    check(cfg.n_samples >= min_n, top, "n_samples", "must be >= " + std::to_string(min_n));
  }
  parse_fors(root, cfg);
  switch (cfg.experiment) {
    case ExperimentKind::ForsOracle: parse_oracle(root, cfg); break;
    case ExperimentKind::Tilt:
      parse_target(root, cfg);
      parse_tilt(root, cfg);
      break;
    case ExperimentKind::Diffuse:
      parse_data(root, cfg);
      parse_diffusion(root, cfg);
      parse_score(root, cfg);
      break;
    case ExperimentKind::Prox:
      parse_target(root, cfg);
      parse_prox(root, cfg);
      break;
    case ExperimentKind::Bench:
      parse_data(root, cfg);
      parse_diffusion(root, cfg);
      parse_score(root, cfg);
      parse_bench(root, cfg);
      break;
  }
  parse_output(root, cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", 0, 0, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

json auto_json(const Auto& v) { return v ? json(*v) : json("auto"); }
const char* anchor_name(AnchorPolicy a) { return a == AnchorPolicy::Strict ? "strict" : "warn"; }

}  // namespace

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = to_string(cfg.experiment);
  j["seed"] = cfg.seed;
  j["fors"] = {{"clip_bound", cfg.clip_bound}, {"max_outer_iters", cfg.max_outer_iters}};
  j["output"] = {{"dir", cfg.output.dir}, {"samples", cfg.output.samples}, {"summary", cfg.output.summary}};
  const auto& ex = cfg.experiment;
  if (ex != ExperimentKind::Prox) j["n_samples"] = cfg.n_samples;
  if (ex == ExperimentKind::ForsOracle) {
    j["oracle"] = {{"tilt", cfg.oracle.tilt}, {"noise", cfg.oracle.noise}, {"delta", cfg.oracle.delta}};
    if (!cfg.oracle.proposal.empty()) j["oracle"]["proposal"] = cfg.oracle.proposal;
  }
  if (ex == ExperimentKind::Tilt || ex == ExperimentKind::Prox) {
    const auto& t = cfg.target;
    j["target"] = {{"name", t.name}, {"dim", t.dim}};
    if (t.name == "custom") {
      j["target"]["logcosh"] = t.logcosh;
      j["target"]["quadratic"] = t.quadratic;
      j["target"]["linear"] = t.linear;
    } else {
      j["target"]["lambda"] = t.lambda;
    }
  }
  if (ex == ExperimentKind::Tilt) {
    const auto& t = cfg.tilt;
    j["tilt"] = {{"eta", auto_json(t.eta)}, {"x0", t.x0},        {"delta", t.delta},
                 {"c", t.c},                {"anchor", anchor_name(t.anchor)}};
  }
  if (ex == ExperimentKind::Diffuse || ex == ExperimentKind::Bench) {
    j["data"] = {{"weights", cfg.data.weights}, {"means", cfg.data.means}, {"variances", cfg.data.variances}};
    const auto& d = cfg.diffusion;
    j["diffusion"] = {{"method", to_string(d.method)},
                      {"delta", d.delta},
                      {"c", d.c},
                      {"l_delta", auto_json(d.l_delta)},
                      {"d_star", auto_json(d.d_star)},
                      {"sigma1_sq", auto_json(d.sigma1_sq)},
                      {"bar_delta", auto_json(d.bar_delta)},
                      {"g", auto_json(d.g)},
                      {"max_steps", d.max_steps}};
    j["score"] = {{"eps", cfg.score.eps},
                  {"perturbation", cfg.score.perturbation == PerturbationMode::ConstantBias ? "constant-bias"
                                                                                            : "smooth-field"}};
  }
  if (ex == ExperimentKind::Bench)
    j["bench"] = {{"methods", cfg.bench.methods},
                  {"eps", cfg.bench.eps},
                  {"schedule_method", to_string(cfg.bench.schedule_method)}};
  if (ex == ExperimentKind::Prox) {
    const auto& p = cfg.prox;
    j["prox"] = {{"eta", auto_json(p.eta)},
                 {"n_iterations", p.n_iterations},
                 {"burn_in", p.burn_in},
                 {"thin", p.thin},
                 {"n_chains", p.n_chains},
                 {"x_init", p.x_init},
                 {"delta", p.delta},
                 {"c", p.c},
                 {"anchor", anchor_name(p.anchor)},
                 {"prox_tol", auto_json(p.prox_tol)},
                 {"max_prox_iters", p.max_prox_iters}};
  }
  return j;
}

}  // namespace fors::harness
