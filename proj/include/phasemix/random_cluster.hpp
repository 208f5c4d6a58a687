#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "phasemix/glauber.hpp"
#include "phasemix/graph.hpp"
#include "phasemix/ising.hpp"
#include "phasemix/rng.hpp"
#include "phasemix/union_find.hpp"

namespace phasemix {

struct RCParams {
  double p = 0.5;
  double q = 2.0;

  static RCParams from(const ModelParams& mp) { return {mp.p(), ModelParams::q}; }
};

/// Open/closed bit per edge in canonical edge order.
class BondConfig {
 public:
  BondConfig() = default;
  explicit BondConfig(std::size_t num_edges, bool open = false)
      : bits_(num_edges, open ? 1 : 0), open_(open ? num_edges : 0) {}

  std::size_t size() const noexcept { return bits_.size(); }
  std::size_t num_open() const noexcept { return open_; }
  bool is_open(std::size_t e) const { return bits_[e] != 0; }
  void set(std::size_t e, bool open) {
    open_ += static_cast<std::size_t>(open) - bits_[e];
    bits_[e] = open ? 1 : 0;
  }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  friend bool operator==(const BondConfig& a, const BondConfig& b) { return a.bits_ == b.bits_; }

 private:
  std::vector<std::uint8_t> bits_;
  std::size_t open_ = 0;
};

/// Partition of a graph's boundary set into ghost-wired blocks.
class BoundaryPartition {
 public:
  BoundaryPartition() = default;

  static BoundaryPartition wired(const Graph& g);
  static BoundaryPartition free(const Graph& g);
  /// Blocks of boundary vertex ids; must cover the boundary exactly once.
  static BoundaryPartition from_blocks(const Graph& g, std::vector<std::vector<std::uint32_t>> blocks);
  /// Block label per boundary vertex, in boundary order.
  static BoundaryPartition from_labels(const Graph& g, const std::vector<std::int64_t>& labels);

  const std::vector<std::vector<std::uint32_t>>& blocks() const noexcept { return blocks_; }
  std::size_t num_blocks() const noexcept { return blocks_.size(); }
  bool is_wired() const noexcept { return blocks_.size() == 1; }

  /// Block index of boundary vertex v, or -1 for free vertices.
  long block_of(const Graph& g, std::uint32_t v) const {
    return g.is_boundary(v) ? block_index_[v - g.num_free()] : -1;
  }

  /// Joins every block in ds.
  void wire(DisjointSets& ds) const;

 private:
  void index(const Graph& g);

  std::vector<std::vector<std::uint32_t>> blocks_;
  std::vector<long> block_index_;
};

struct ComponentLabeling {
  std::vector<std::uint32_t> label;  // dense cluster id per vertex
  std::vector<std::uint32_t> sizes;
  std::vector<std::uint8_t> touches_boundary;
  std::vector<std::uint32_t> min_vertex;

  std::size_t count() const noexcept { return sizes.size(); }
  /// Largest cluster, ties broken by smallest contained vertex.
  std::uint32_t largest() const;
};

ComponentLabeling label_components(const Graph& g, const BondConfig& omega, const BoundaryPartition& xi);

/// |omega| log p + (|E| - |omega|) log(1-p) + #components log q.
double rc_log_weight(const Graph& g, const BondConfig& omega, const RCParams& params, const BoundaryPartition& xi);

/// True if u and v are joined in omega minus edge `skip` (ghost wirings
/// included). Pass skip = -1 to use every open edge.
bool connected_without(const Graph& g, const BondConfig& omega, const BoundaryPartition& xi, std::uint32_t u,
                       std::uint32_t v, long skip);

/// Reusable breadth-first connectivity search with ghost wirings.
class ConnectivityProbe {
 public:
  ConnectivityProbe(const Graph& g, const BoundaryPartition& xi);

  /// Same contract as connected_without, without per-call allocation.
  bool connected(const BondConfig& omega, std::uint32_t u, std::uint32_t v, long skip);

 private:
  const Graph* graph_;
  const BoundaryPartition* xi_;
  std::vector<std::uint32_t> seen_;
  std::vector<std::uint32_t> block_seen_;
  std::vector<std::uint32_t> queue_;
  std::uint32_t stamp_ = 0;
};

/// Probability that e is open given every other edge.
double rc_edge_conditional(const Graph& g, std::size_t e, const BondConfig& omega, const RCParams& params,
                           const BoundaryPartition& xi);

inline double rc_open_prob(bool connected, const RCParams& params) {
  return connected ? params.p : params.p / (params.p + (1 - params.p) * params.q);
}

/// Continuous-time single-bond heat bath. The stream must be sized to the
/// number of updatable edges; `updatable` lists them (all edges if empty).
struct RCGlauberStats {
  std::uint64_t events = 0;
  std::uint64_t relabels = 0;
  std::uint64_t searches = 0;
};
RCGlauberStats rc_glauber_run(const Graph& g, BondConfig& omega, EventStream& stream, double t_max,
                              const RCParams& params, const BoundaryPartition& xi,
                              const std::vector<std::uint32_t>& updatable = {});

/// Swendsen-Wang with reusable buffers. Boundary spins are frozen: a cluster
/// holding a boundary vertex keeps that vertex's spin.
class SwendsenWang {
 public:
  SwendsenWang(const Graph& g, ModelParams params, SpinBoundary bc = {});

  /// One sweep; writes the intermediate bond configuration if requested.
  void step(SpinConfig& sigma, Rng& rng, BondConfig* omega = nullptr);

  const Graph& graph() const noexcept { return *graph_; }

 private:
  const Graph* graph_;
  ModelParams params_;
  SpinBoundary bc_;
  DisjointSets ds_;
  std::vector<std::int8_t> cluster_spin_;
};

struct SWResult {
  BondConfig omega;
  SpinConfig sigma;
};
SWResult swendsen_wang_step(const Graph& g, const SpinConfig& sigma, const ModelParams& params, Rng& rng,
                            const SpinBoundary& bc = {});

enum class ColoringMode { free_uniform, plus_boundary, largest_plus, conditional_positive };

std::string to_string(ColoringMode mode);
ColoringMode parse_coloring_mode(const std::string& name);

/// Edwards-Sokal coloring of the free vertices. `attempts` receives the
/// number of fair colorings drawn (only > 1 for conditional_positive).
SpinConfig es_color(const Graph& g, const BondConfig& omega, ColoringMode mode, const BoundaryPartition& xi, Rng& rng,
                    std::uint64_t* attempts = nullptr);

enum class ForcedCluster { none, boundary, largest };

struct SharedColoring {
  SpinConfig sigma;
  SpinConfig sigma_prime;
  std::vector<std::uint32_t> disagreement;  // free vertices inside the region where they differ
};

/// One shared fair coin per vertex; every unforced cluster takes the coin of
/// its smallest vertex and forced clusters are +1. `region` restricts the
/// disagreement report (all free vertices if empty).
SharedColoring shared_enumeration_color(const Graph& g, const BondConfig& omega, const BoundaryPartition& xi,
                                        ForcedCluster forced, const BondConfig& omega_prime,
                                        const BoundaryPartition& xi_prime, ForcedCluster forced_prime, Rng& rng,
                                        const std::vector<std::uint32_t>& region = {});

/// Header `|E| |omega|` followed by one '0'/'1' per edge.
void write_bonds(std::ostream& out, const BondConfig& omega);
BondConfig read_bonds(std::istream& in);
/// One block per line, vertex ids separated by spaces.
void write_partition(std::ostream& out, const BoundaryPartition& xi);

}  // namespace phasemix
