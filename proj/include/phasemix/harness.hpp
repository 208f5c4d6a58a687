#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "phasemix/graph.hpp"
#include "phasemix/ising.hpp"
#include "phasemix/rng.hpp"

namespace phasemix {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ConfigValue = std::variant<bool, std::int64_t, double, std::string, std::vector<double>>;

/// Flat `key = value` text: booleans, integers, floats, double-quoted
/// strings and numeric arrays `[a, b]`. `#` starts a comment. This is a
/// subset of TOML without tables.
class FlatConfig {
 public:
  static FlatConfig parse(std::istream& in, const std::string& source = "<input>");
  static FlatConfig load(const std::string& path);

  /// `key=value` with the same value syntax; bare words are taken as strings.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, ConfigValue value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, ConfigValue>& values() const noexcept { return values_; }

  void write(std::ostream& out) const;

 private:
  std::map<std::string, ConfigValue> values_;
};

ConfigValue parse_config_value(const std::string& text, const std::string& key, bool bare_strings = false);

struct ExperimentConfig {
  std::string experiment = "run";

  // geometry: torus (d, n), box (d, m), grid-box (d, n), rrg (num_vertices, degree, graph_seed), file (graph_file)
  std::string geometry = "torus";
  int d = 2;
  int n = 16;
  int m = 4;
  std::int64_t num_vertices = 128;
  int degree = 3;
  std::uint64_t graph_seed = 1;
  std::string graph_file;
  std::string boundary = "plus";  // spins: plus | minus; random-cluster: wired | free
  std::string boundary_prime = "free";

  std::vector<double> beta{0.5};
  double beta_factor = 0.0;  // > 0: beta = factor * Binder crossing estimate
  double p = 0.0;            // > 0 overrides beta for random-cluster commands
  std::string mode = "plain";
  std::string init = "nu-pm";
  std::string inits = "nu-pm,strip,all-plus";

  std::vector<double> ks{1};
  std::vector<double> radii{2, 4, 8};
  std::vector<double> sizes{8, 12, 16};
  std::int64_t vertex = 0;
  double theta = 0.9;
  double eps = 0.2;
  double K = 1.0;
  double band = 0.05;
  std::int64_t dwell = 10;
  std::int64_t min_count = 30;

  std::int64_t replicas = 20;
  std::int64_t samples = 1000;
  std::int64_t burn_in_sweeps = 100;
  std::int64_t thin_sweeps = 1;
  double target_half_width = 0.0;
  double horizon_continuous_time = 100.0;
  double probe_interval_continuous_time = 1.0;
  double t_cap_continuous_time = 1000.0;

  std::string method = "direct";  // ldp-probe: direct | multicanonical
  std::string backend = "auto";   // reveal-couple conditional sampler
  std::string suite = "all";      // oracle-check
  std::string bonds_file;         // coarse: analyse a stored configuration

  double binder_lo = 0.6;
  double binder_hi = 1.2;
  double binder_tol = 0.01;
  std::int64_t binder_sweeps = 20000;
  std::int64_t binder_small = 8;
  std::int64_t binder_large = 16;

  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::int64_t workers = 1;

  /// Unknown keys and mistyped values raise ConfigError naming the key.
  static ExperimentConfig from_flat(const FlatConfig& flat);
  FlatConfig to_flat() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct RunManifest {
  ExperimentConfig config;
  std::string command;
  std::string version;
  std::string status = "running";
  std::string started;
  std::string finished;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> outputs;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

struct CsvRow {
  std::string param;
  std::string value;
  double estimate = 0.0;
  double half_width = 0.0;
  std::uint64_t n_samples = 0;
};

/// Header `param,value,estimate,half_width,n_samples`; numbers use %.17g so
/// reruns compare byte for byte.
void write_csv(std::ostream& out, const std::vector<CsvRow>& rows);
std::string format_number(double x);

/// Per-run state handed to a command: seeds, output rows and side files.
class RunContext {
 public:
  RunContext(ExperimentConfig cfg, std::string out_dir);

  const ExperimentConfig& config() const noexcept { return cfg_; }
  /// Child seed of the master seed; each label may be used once.
  std::uint64_t seed(const std::string& label);
  void row(CsvRow r) { rows_.push_back(std::move(r)); }
  /// Path of a side file in the output directory, recorded in the manifest.
  std::string side_file(const std::string& suffix);
  void fail(const std::string& why) { failures_.push_back(why); }

  const std::vector<CsvRow>& rows() const noexcept { return rows_; }
  const std::map<std::string, std::uint64_t>& seeds() const noexcept { return seeds_; }
  const std::vector<std::string>& files() const noexcept { return files_; }
  const std::vector<std::string>& failures() const noexcept { return failures_; }

 private:
  ExperimentConfig cfg_;
  std::string out_dir_;
  std::optional<SeedRegistry> registry_;
  std::map<std::string, std::uint64_t> seeds_;
  std::vector<CsvRow> rows_;
  std::vector<std::string> files_;
  std::vector<std::string> failures_;
};

struct Command {
  std::string name;
  std::string summary;
  bool stochastic;
  std::function<void(RunContext&)> run;
};

const std::vector<Command>& command_registry();
const Command* find_command(const std::string& name);

/// Output directory: the config value, else $PHASEMIX_OUTPUT_DIR, else ".".
std::string resolve_output_dir(const ExperimentConfig& cfg);

struct RunOutcome {
  int status = 0;
  std::string csv_path;
  std::string manifest_path;
  std::vector<CsvRow> rows;
};

/// Writes the manifest, runs the command, writes the CSV and rewrites the
/// manifest with the completion status. Status is 0 on success and 1 when
/// the command reported a failed check.
RunOutcome run_experiment(const std::string& command, const ExperimentConfig& cfg);

Graph build_graph(const ExperimentConfig& cfg);
SpinBoundary build_spin_boundary(const Graph& g, const std::string& name);

}  // namespace phasemix
