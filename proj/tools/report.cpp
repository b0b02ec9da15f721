#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "harness.hpp"

namespace fors::harness {

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same(const MetricReport& a, const MetricReport& b) {
  return a.name == b.name && same(a.value, b.value) && a.n_samples == b.n_samples &&
         same(a.standard_error, b.standard_error) && same(a.critical_value, b.critical_value) &&
         same(a.p_value, b.p_value) && a.dof == b.dof;
}

json metric_json(const MetricReport& m) {
  return {{"value", number_or_null(m.value)},
          {"n_samples", m.n_samples},
          {"standard_error", number_or_null(m.standard_error)},
          {"critical_value", number_or_null(m.critical_value)},
          {"p_value", number_or_null(m.p_value)},
          {"dof", m.dof}};
}

MetricReport metric_from(const std::string& name, const json& j) {
  MetricReport m;
  m.name = name;
  m.value = number_from(j.at("value"));
  m.n_samples = j.at("n_samples").get<std::size_t>();
  m.standard_error = number_from(j.at("standard_error"));
  m.critical_value = number_from(j.at("critical_value"));
  m.p_value = number_from(j.at("p_value"));
  m.dof = j.at("dof").get<std::size_t>();
  return m;
}

}  // namespace

bool RunReport::operator==(const RunReport& o) const {
  if (metrics.size() != o.metrics.size()) return false;
  for (const auto& [k, m] : metrics) {
    const auto it = o.metrics.find(k);
    if (it == o.metrics.end() || !same(m, it->second)) return false;
  }
  return schema_version == o.schema_version && status == o.status && partial == o.partial && error == o.error &&
         experiment == o.experiment && seed == o.seed && config == o.config && counts == o.counts &&
         values == o.values && table == o.table && warnings == o.warnings && files == o.files &&
         runtime.timestamp == o.runtime.timestamp && runtime.workers == o.runtime.workers &&
         same(runtime.wall_clock_seconds, o.runtime.wall_clock_seconds);
}

json to_json(const RunReport& r) {
  json j;
  j["schema_version"] = r.schema_version;
  j["status"] = r.status;
  j["partial"] = r.partial;
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  j["experiment"] = r.experiment;
  j["seed"] = r.seed;
  j["config"] = r.config;
  j["counts"] = r.counts;
  json metrics = json::object();
  for (const auto& [k, m] : r.metrics) metrics[k] = metric_json(m);
  j["metrics"] = std::move(metrics);
  j["values"] = json(r.values);
  j["table"] = r.table;
  j["warnings"] = r.warnings;
  j["files"] = r.files;
  j["runtime"] = {{"timestamp", r.runtime.timestamp},
                  {"wall_clock_seconds", r.runtime.wall_clock_seconds},
                  {"workers", r.runtime.workers}};
  return j;
}

RunReport report_from_json(const json& j) {
  RunReport r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != kSchemaVersion)
    throw std::runtime_error("summary schema_version " + std::to_string(r.schema_version) + " is not supported (expected " +
                             std::to_string(kSchemaVersion) + ")");
  r.status = j.at("status").get<std::string>();
  r.partial = j.at("partial").get<bool>();
  if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  r.experiment = j.at("experiment").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config = j.at("config");
  r.counts = j.at("counts").get<std::map<std::string, std::uint64_t>>();
  for (const auto& [k, m] : j.at("metrics").items()) r.metrics[k] = metric_from(k, m);
  for (const auto& [k, v] : j.at("values").items()) r.values[k] = v;
  r.table = j.at("table");
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  r.files = j.at("files").get<std::map<std::string, std::string>>();
  const json& rt = j.at("runtime");
  r.runtime.timestamp = rt.at("timestamp").get<std::string>();
  r.runtime.wall_clock_seconds = rt.at("wall_clock_seconds").get<double>();
  r.runtime.workers = rt.at("workers").get<std::size_t>();
  return r;
}

json deterministic_view(const json& summary) {
  json j = summary;
  j.erase("runtime");
  return j;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void CsvTable::add_numbers(const std::vector<double>& row) {
  std::vector<std::string> cells;
  cells.reserve(row.size());
  for (double v : row) cells.push_back(format_double(v));
  rows.push_back(std::move(cells));
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& cell = rows.at(row).at(col);
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || *end != '\0') throw std::runtime_error("csv cell '" + cell + "' is not a number");
  return v;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw std::runtime_error("'" + path.string() + "' is empty");
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::stringstream rs(line);
    for (std::string cell; std::getline(rs, cell, ',');) row.push_back(cell);
    if (row.size() != t.header.size())
      throw std::runtime_error("'" + path.string() + "': row " + std::to_string(t.rows.size() + 2) +
                               " has the wrong number of columns");
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace

int check_command(const std::filesystem::path& config_path, std::ostream& err) {
  try {
    const ExperimentConfig cfg = load_config(config_path);
    // The echo must validate too.
    parse_config(config_to_json(cfg).dump());
  } catch (const ConfigError& e) {
    err << "config error: " << config_path.string() << ": " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

int run_command(const std::filesystem::path& config_path, const CliOverrides& ov, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << config_path.string() << ": " << e.what() << '\n';
    return kExitConfig;
  }
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.out_dir) cfg.output.dir = *ov.out_dir;

  const std::filesystem::path dir = cfg.output.dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    err << "error: cannot create output directory '" << dir.string() << "': " << ec.message() << '\n';
    return kExitRuntime;
  }

  const auto start = std::chrono::steady_clock::now();
  RunOptions opts{ov.workers, ov.strict};
  RunReport partial;
  partial.experiment = to_string(cfg.experiment);
  partial.seed = cfg.seed;
  partial.config = config_to_json(cfg);
  auto stamp = [&](RunReport& r) {
    r.runtime.timestamp = utc_timestamp();
    r.runtime.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.runtime.workers = ov.workers;
  };
  try {
    RunOutput out = run_experiment(cfg, opts, &partial);
    for (const auto& [name, table] : out.files) write_csv(dir / name, table);
    stamp(out.report);
    write_json(dir / cfg.output.summary, to_json(out.report));
    for (const auto& w : out.report.warnings) err << "warning: " << w << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << config_path.string() << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    partial.status = "failed";
    partial.partial = true;
    partial.error = e.what();
    partial.files.clear();
    stamp(partial);
    try {
      write_json(dir / cfg.output.summary, to_json(partial));
    } catch (const std::exception& w) {
      err << "error: " << w.what() << '\n';
    }
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace fors::harness
