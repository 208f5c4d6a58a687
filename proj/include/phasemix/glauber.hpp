#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "phasemix/graph.hpp"
#include "phasemix/ising.hpp"
#include "phasemix/rng.hpp"

namespace phasemix {

struct Event {
  double time;  // absolute time of the event
  double dt;
  std::uint32_t site;
  double uniform;
};

/// Superposition of N rate-1 clocks: one rate-N exponential clock plus a
/// uniformly chosen site and a uniform threshold per event.
class EventStream {
 public:
  EventStream(std::uint64_t seed, std::size_t num_sites);

  const Event& peek() const noexcept { return next_; }
  Event next();
  double clock() const noexcept { return clock_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t num_sites() const noexcept { return num_sites_; }

 private:
  void draw();

  std::uint64_t seed_;
  std::size_t num_sites_;
  Rng rng_;
  double clock_ = 0.0;
  Event next_{};
};

enum class ChainMode { plain, restricted_plus, restricted_minus };

struct ChainState {
  SpinConfig sigma;
  double time = 0.0;
  ChainMode mode = ChainMode::plain;
  std::uint64_t events = 0;
};

/// Heat-bath update rule for one graph, parameter set and boundary.
class GlauberDynamics {
 public:
  GlauberDynamics(const Graph& g, ModelParams params, SpinBoundary bc = {});

  const Graph& graph() const noexcept { return *graph_; }
  const ModelParams& params() const noexcept { return params_; }
  const SpinBoundary& boundary() const noexcept { return bc_; }
  std::size_t num_sites() const noexcept { return graph_->num_free(); }

  int field(std::uint32_t v, const SpinConfig& sigma) const {
    int h = boundary_field_[v];
    for (std::size_t i = offsets_[v]; i < offsets_[v + 1]; ++i) h += sigma[free_adj_[i]];
    return h;
  }
  double prob_plus(std::uint32_t v, const SpinConfig& sigma) const {
    return table_[static_cast<std::size_t>(field(v, sigma) + table_offset_)];
  }

  /// Spin that the heat-bath threshold rule assigns to v, before any
  /// restriction.
  std::int8_t plain_outcome(std::uint32_t v, double u, const SpinConfig& sigma) const {
    return u <= prob_plus(v, sigma) ? std::int8_t{1} : std::int8_t{-1};
  }

  /// Applies one event; returns true when the restricted rule overrode the
  /// plain outcome.
  bool apply(ChainState& state, const Event& ev) const;

 private:
  const Graph* graph_;
  ModelParams params_;
  SpinBoundary bc_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> free_adj_;
  std::vector<int> boundary_field_;
  std::vector<double> table_;
  int table_offset_ = 0;
};

struct ProbeSchedule {
  double start = 0.0;
  double interval = 1.0;
  bool energy = false;
  std::vector<std::uint32_t> sites;
};

struct ProbeRecord {
  double time;
  long long magnetization;
  long long cut;  // -1 unless energy probes were requested
  std::vector<std::int8_t> site_spins;
};

struct RunSummary {
  std::uint64_t events = 0;
  std::uint64_t restricted_fires = 0;
  std::vector<ProbeRecord> probes;
};

/// Applies events with time <= t_max, then sets state.time = t_max.
RunSummary run(const GlauberDynamics& dyn, ChainState& state, EventStream& stream, double t_max,
               const ProbeSchedule* probes = nullptr);

/// CSV rows `seed,t,observable,value`.
void write_probe_csv(std::ostream& out, std::uint64_t seed, const RunSummary& summary,
                     const ProbeSchedule& schedule, bool header = true);

struct ChainSummary {
  std::uint64_t events = 0;
  std::uint64_t restricted_fires = 0;
  std::optional<double> first_fire;
  long long final_magnetization = 0;
};

struct CouplingBundle {
  EventStream stream;
  std::vector<ChainState> chains;
};

struct CouplingResult {
  std::vector<ChainSummary> chains;
  std::uint64_t order_violations = 0;
  std::uint64_t events = 0;
};

/// Drives every chain with the same events. Pairs of plain chains that start
/// ordered are checked at the updated site after every event.
CouplingResult grand_coupling_run(const GlauberDynamics& dyn, CouplingBundle& bundle, double t_max);

/// First time the configuration lies in the target set, or nullopt if the
/// cap is reached first.
std::optional<double> hitting_time(const GlauberDynamics& dyn, ChainState& state, EventStream& stream,
                                   PhaseTag target, double t_cap);

enum class InitKind { all_plus, all_minus, nu_pm, explicit_config, strip, checkerboard };

struct InitDistribution {
  InitKind kind = InitKind::nu_pm;
  double strip_width = 0.25;
  SpinConfig config;

  static InitDistribution parse(const std::string& name);
};

std::string to_string(InitKind kind);

/// Draws an initial configuration. Only nu_pm consumes randomness (one coin).
SpinConfig draw_initial(const Graph& g, const InitDistribution& init, Rng& rng);

/// Sub-stream seeds of one replica.
struct ReplicaSeeds {
  std::uint64_t init;
  std::uint64_t updates;

  static ReplicaSeeds from(std::uint64_t replica_seed) {
    return {seed_derive(replica_seed, "init"), seed_derive(replica_seed, "updates")};
  }
};

}  // namespace phasemix
