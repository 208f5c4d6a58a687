#include "phasemix/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "phasemix/random_cluster.hpp"

#ifndef PHASEMIX_VERSION
#define PHASEMIX_VERSION "0.0.0"
#endif

namespace phasemix {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
      continue;
    }
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool parse_int(const std::string& t, std::int64_t& out) {
  const char* b = t.data();
  const char* e = b + t.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

bool parse_double(const std::string& t, double& out) {
  if (t == "inf" || t == "+inf") {
    out = INFINITY;
    return true;
  }
  if (t == "-inf") {
    out = -INFINITY;
    return true;
  }
  if (t == "nan" || t == "+nan" || t == "-nan") {
    out = NAN;
    return true;
  }
  const char* b = t.data();
  const char* e = b + t.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::string s = format_number(x);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string value_text(const ConfigValue& v) {
  struct {
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const { return format_double(d); }
    std::string operator()(const std::string& s) const { return quote(s); }
    std::string operator()(const std::vector<double>& v) const {
      std::string out = "[";
      for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
      return out + "]";
    }
  } visitor;
  return std::visit(visitor, v);
}

// Every config key, in file order.
template <class Cfg, class V>
void visit_fields(Cfg& c, V&& v) {
  v("experiment", c.experiment);
  v("geometry", c.geometry);
  v("d", c.d);
  v("n", c.n);
  v("m", c.m);
  v("num_vertices", c.num_vertices);
  v("degree", c.degree);
  v("graph_seed", c.graph_seed);
  v("graph_file", c.graph_file);
  v("boundary", c.boundary);
  v("boundary_prime", c.boundary_prime);
  v("beta", c.beta);
  v("beta_factor", c.beta_factor);
  v("p", c.p);
  v("mode", c.mode);
  v("init", c.init);
  v("inits", c.inits);
  v("ks", c.ks);
  v("radii", c.radii);
  v("sizes", c.sizes);
  v("vertex", c.vertex);
  v("theta", c.theta);
  v("eps", c.eps);
  v("K", c.K);
  v("band", c.band);
  v("dwell", c.dwell);
  v("min_count", c.min_count);
  v("replicas", c.replicas);
  v("samples", c.samples);
  v("burn_in_sweeps", c.burn_in_sweeps);
  v("thin_sweeps", c.thin_sweeps);
  v("target_half_width", c.target_half_width);
  v("horizon_continuous_time", c.horizon_continuous_time);
  v("probe_interval_continuous_time", c.probe_interval_continuous_time);
  v("t_cap_continuous_time", c.t_cap_continuous_time);
  v("method", c.method);
  v("backend", c.backend);
  v("suite", c.suite);
  v("bonds_file", c.bonds_file);
  v("binder_lo", c.binder_lo);
  v("binder_hi", c.binder_hi);
  v("binder_tol", c.binder_tol);
  v("binder_sweeps", c.binder_sweeps);
  v("binder_small", c.binder_small);
  v("binder_large", c.binder_large);
  v("seed", c.seed);
  v("output_dir", c.output_dir);
  v("workers", c.workers);
}

[[noreturn]] void bad_type(const std::string& key, const char* want) {
  throw ConfigError("config key '" + key + "': expected " + want);
}

void assign(const std::string& key, const ConfigValue& v, std::string& out) {
  if (auto s = std::get_if<std::string>(&v)) out = *s;
  else bad_type(key, "a string");
}

void assign(const std::string& key, const ConfigValue& v, double& out) {
  if (auto d = std::get_if<double>(&v)) out = *d;
  else if (auto i = std::get_if<std::int64_t>(&v)) out = static_cast<double>(*i);
  else bad_type(key, "a number");
}

void assign(const std::string& key, const ConfigValue& v, std::int64_t& out) {
  if (auto i = std::get_if<std::int64_t>(&v)) out = *i;
  else bad_type(key, "an integer");
}

void assign(const std::string& key, const ConfigValue& v, int& out) {
  std::int64_t i = 0;
  assign(key, v, i);
  if (i < INT32_MIN || i > INT32_MAX) bad_type(key, "a 32-bit integer");
  out = static_cast<int>(i);
}

void assign(const std::string& key, const ConfigValue& v, std::uint64_t& out) {
  std::int64_t i = 0;
  assign(key, v, i);
  if (i < 0) bad_type(key, "a nonnegative integer");
  out = static_cast<std::uint64_t>(i);
}

void assign(const std::string& key, const ConfigValue& v, std::optional<std::uint64_t>& out) {
  std::uint64_t u = 0;
  assign(key, v, u);
  out = u;
}

void assign(const std::string& key, const ConfigValue& v, std::vector<double>& out) {
  if (auto a = std::get_if<std::vector<double>>(&v)) out = *a;
  else if (std::holds_alternative<double>(v) || std::holds_alternative<std::int64_t>(v)) {
    double x = 0;
    assign(key, v, x);
    out = {x};
  } else {
    bad_type(key, "a number or an array of numbers");
  }
}

ConfigValue to_value(const std::string& s) { return s; }
ConfigValue to_value(double d) { return d; }
ConfigValue to_value(std::int64_t i) { return i; }
ConfigValue to_value(int i) { return static_cast<std::int64_t>(i); }
ConfigValue to_value(std::uint64_t u) { return static_cast<std::int64_t>(u); }
ConfigValue to_value(const std::vector<double>& v) { return v; }

json value_json(const ConfigValue& v) {
  struct {
    json operator()(bool b) const { return b; }
    json operator()(std::int64_t i) const { return i; }
    json operator()(double d) const {
      if (std::isfinite(d)) return d;
      return format_double(d);  // JSON has no inf/nan; kept as text
    }
    json operator()(const std::string& s) const { return s; }
    json operator()(const std::vector<double>& v) const {
      json a = json::array();
      for (double d : v) a.push_back((*this)(d));
      return a;
    }
  } visitor;
  return std::visit(visitor, v);
}

ConfigValue json_value(const std::string& key, const json& j, bool want_double) {
  auto number = [&](const json& x) -> double {
    if (x.is_number()) return x.get<double>();
    double d = 0;
    if (x.is_string() && parse_double(x.get<std::string>(), d)) return d;
    throw ConfigError("manifest key '" + key + "': expected a number");
  };
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_string()) {
    if (want_double) return number(j);
    return j.get<std::string>();
  }
  if (j.is_number_integer() && !want_double) return j.get<std::int64_t>();
  if (j.is_number()) return j.get<double>();
  if (j.is_array()) {
    std::vector<double> v;
    for (const auto& x : j) v.push_back(number(x));
    return v;
  }
  throw ConfigError("manifest key '" + key + "': unsupported value");
}

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ConfigValue parse_config_value(const std::string& raw, const std::string& key, bool bare_strings) {
  const std::string t = trim(raw);
  if (t.empty()) throw ConfigError("config key '" + key + "': missing value");
  if (t == "true") return true;
  if (t == "false") return false;
  if (t.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < t.size() && t[i] != '"'; ++i) {
      if (t[i] == '\\' && i + 1 < t.size()) ++i;
      out += t[i];
    }
    if (i != t.size() - 1) throw ConfigError("config key '" + key + "': malformed string");
    return out;
  }
  if (t.front() == '[') {
    if (t.back() != ']') throw ConfigError("config key '" + key + "': unterminated array");
    std::vector<double> out;
    std::stringstream ss(t.substr(1, t.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      double d = 0;
      if (!parse_double(item, d)) throw ConfigError("config key '" + key + "': non-numeric array entry '" + item + "'");
      out.push_back(d);
    }
    return out;
  }
  std::int64_t i = 0;
  if (parse_int(t, i)) return i;
  double d = 0;
  if (parse_double(t, d)) return d;
  if (bare_strings) return t;
  throw ConfigError("config key '" + key + "': cannot parse value '" + t + "'");
}

FlatConfig FlatConfig::parse(std::istream& in, const std::string& source) {
  FlatConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (body.front() == '[') throw ConfigError(where + ": tables are not supported in a flat config");
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    if (key.empty() || key.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") !=
                           std::string::npos)
      throw ConfigError(where + ": invalid key '" + key + "'");
    if (cfg.has(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    cfg.values_[key] = parse_config_value(body.substr(eq + 1), key);
  }
  return cfg;
}

FlatConfig FlatConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  return parse(in, path);
}

void FlatConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = trim(assignment.substr(0, eq));
  values_[key] = parse_config_value(assignment.substr(eq + 1), key, true);
}

void FlatConfig::write(std::ostream& out) const {
  for (const auto& [k, v] : values_) out << k << " = " << value_text(v) << "\n";
}

ExperimentConfig ExperimentConfig::from_flat(const FlatConfig& flat) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : flat.values()) {
    bool found = false;
    visit_fields(cfg, [&](const char* name, auto& field) {
      if (key != name) return;
      found = true;
      assign(key, value, field);
    });
    if (!found) throw ConfigError("unknown config key '" + key + "'");
  }
  return cfg;
}

FlatConfig ExperimentConfig::to_flat() const {
  FlatConfig flat;
  visit_fields(*this, [&](const char* name, const auto& field) {
    using T = std::decay_t<decltype(field)>;
    if constexpr (std::is_same_v<T, std::optional<std::uint64_t>>) {
      if (field) flat.set(name, to_value(*field));
    } else {
      flat.set(name, to_value(field));
    }
  });
  return flat;
}

std::string ExperimentConfig::to_json() const {
  json j = json::object();
  const FlatConfig flat = to_flat();
  for (const auto& [k, v] : flat.values()) j[k] = value_json(v);
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  FlatConfig flat;
  ExperimentConfig probe;
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool want_double = false;
    visit_fields(probe, [&](const char* name, const auto& field) {
      using T = std::decay_t<decltype(field)>;
      if (it.key() == name) want_double = std::is_same_v<T, double> || std::is_same_v<T, std::vector<double>>;
    });
    flat.set(it.key(), json_value(it.key(), it.value(), want_double));
  }
  return from_flat(flat);
}

std::string RunManifest::to_json() const {
  json j;
  j["command"] = command;
  j["version"] = version;
  j["status"] = status;
  j["started"] = started;
  j["finished"] = finished;
  j["config"] = json::parse(config.to_json());
  j["seeds"] = seeds;
  j["outputs"] = outputs;
  return j.dump(2);
}

RunManifest RunManifest::from_json(const std::string& text) {
  const json j = json::parse(text);
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.version = j.at("version").get<std::string>();
  m.status = j.at("status").get<std::string>();
  m.started = j.at("started").get<std::string>();
  m.finished = j.at("finished").get<std::string>();
  m.config = ExperimentConfig::from_json(j.at("config").dump());
  m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  return m;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<CsvRow>& rows) {
  auto field = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  out << "param,value,estimate,half_width,n_samples\n";
  for (const auto& r : rows)
    out << field(r.param) << ',' << field(r.value) << ',' << format_number(r.estimate) << ','
        << format_number(r.half_width) << ',' << r.n_samples << '\n';
}

RunContext::RunContext(ExperimentConfig cfg, std::string out_dir) : cfg_(std::move(cfg)), out_dir_(std::move(out_dir)) {
  if (cfg_.seed) registry_.emplace(*cfg_.seed);
}

std::uint64_t RunContext::seed(const std::string& label) {
  if (!registry_) throw ConfigError("config key 'seed': required for stochastic commands");
  try {
    const auto s = registry_->derive(label);
    seeds_[label] = s;
    return s;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string RunContext::side_file(const std::string& suffix) {
  const std::string name = cfg_.experiment + suffix;
  files_.push_back(name);
  return (std::filesystem::path(out_dir_) / name).string();
}

std::string resolve_output_dir(const ExperimentConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("PHASEMIX_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

RunOutcome run_experiment(const std::string& command, const ExperimentConfig& cfg) {
  const Command* cmd = find_command(command);
  if (!cmd) throw ConfigError("unknown command '" + command + "'");
  if (cmd->stochastic && !cfg.seed) throw ConfigError("command '" + command + "' needs a seed (--seed)");
  if (cfg.experiment.empty() || cfg.experiment.find_first_of("/\\") != std::string::npos)
    throw ConfigError("config key 'experiment': must be a plain file stem");
  if (cfg.workers < 1) throw ConfigError("config key 'workers': must be positive");

  const std::string dir = resolve_output_dir(cfg);
  std::filesystem::create_directories(dir);
  RunOutcome outcome;
  outcome.csv_path = (std::filesystem::path(dir) / (cfg.experiment + ".csv")).string();
  outcome.manifest_path = (std::filesystem::path(dir) / (cfg.experiment + ".manifest.json")).string();

  RunManifest manifest;
  manifest.config = cfg;
  manifest.command = command;
  manifest.version = PHASEMIX_VERSION;
  manifest.started = now_iso();
  auto write_manifest = [&] {
    std::ofstream out(outcome.manifest_path);
    out << manifest.to_json() << "\n";
    if (!out) throw std::runtime_error("cannot write " + outcome.manifest_path);
  };
  write_manifest();

  RunContext ctx(cfg, dir);
  try {
    cmd->run(ctx);
  } catch (const std::exception& e) {
    manifest.status = std::string("failed: ") + e.what();
    manifest.finished = now_iso();
    manifest.seeds = ctx.seeds();
    write_manifest();
    throw;
  }
  {
    std::ofstream out(outcome.csv_path);
    write_csv(out, ctx.rows());
    if (!out) throw std::runtime_error("cannot write " + outcome.csv_path);
  }
  manifest.status = ctx.failures().empty() ? "complete" : "complete-with-failures";
  manifest.finished = now_iso();
  manifest.seeds = ctx.seeds();
  manifest.outputs = {cfg.experiment + ".csv"};
  for (const auto& f : ctx.files()) manifest.outputs.push_back(f);
  write_manifest();
  outcome.rows = ctx.rows();
  outcome.status = ctx.failures().empty() ? 0 : 1;
  return outcome;
}

Graph build_graph(const ExperimentConfig& cfg) {
  try {
    if (cfg.geometry == "torus") return Graph::torus(cfg.d, cfg.n);
    if (cfg.geometry == "box") return Graph::box(cfg.d, cfg.m);
    if (cfg.geometry == "grid-box") return Graph::grid_box(cfg.d, cfg.n);
    if (cfg.geometry == "rrg") {
      if (cfg.num_vertices <= 0) throw ConfigError("config key 'num_vertices': must be positive");
      return random_regular({static_cast<std::size_t>(cfg.num_vertices), cfg.degree, cfg.graph_seed});
    }
    if (cfg.geometry == "file") {
      std::ifstream in(cfg.graph_file);
      if (!in) throw ConfigError("config key 'graph_file': cannot open '" + cfg.graph_file + "'");
      return read_edge_list(in);
    }
  } catch (const GeometryError& e) {
    throw ConfigError(std::string("config key 'geometry': ") + e.what());
  }
  throw ConfigError("config key 'geometry': unknown geometry '" + cfg.geometry + "'");
}

SpinBoundary build_spin_boundary(const Graph& g, const std::string& name) {
  if (g.num_boundary() == 0) return {};
  if (name == "plus") return SpinBoundary::uniform(g, 1);
  if (name == "minus") return SpinBoundary::uniform(g, -1);
  throw ConfigError("config key 'boundary': spin boundary must be plus or minus, got '" + name + "'");
}

}  // namespace phasemix
