#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phasemix/graph.hpp"
#include "phasemix/random_cluster.hpp"
#include "phasemix/rng.hpp"

namespace phasemix {

class CoarseGrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Adjacency { k_adjacent, star };

/// Blocks B_x = l_inf ball of radius k around centres x in kZ^d.
///
/// On a torus (side divisible by k) the centres are all multiples of k. On a
/// centred box Lambda_m the centres are the multiples of k in
/// Lambda_{m-k}, plus the row at +-(m-k) when that is not itself a multiple
/// of k, so every block lies inside the free sites. Centres are indexed
/// row-major over the per-axis list axis(); k-adjacent centres differ by one
/// axis step in one coordinate, star-adjacent ones by at most one step in
/// every coordinate.
class BlockGrid {
 public:
  BlockGrid(const Graph& g, int k);

  const Graph& graph() const noexcept { return *graph_; }
  int k() const noexcept { return k_; }
  int dim() const noexcept { return dim_; }
  bool periodic() const noexcept { return periodic_; }
  const std::vector<int>& axis() const noexcept { return axis_; }
  std::size_t axis_len() const noexcept { return axis_.size(); }
  std::size_t num_centres() const noexcept { return num_centres_; }

  std::vector<int> centre_coords(std::size_t c) const;
  std::vector<int> centre_index(std::size_t c) const;
  std::size_t centre_from_index(std::span<const int> idx) const;
  /// l_inf norm of the centre (wrapped distance to the origin on a torus).
  int centre_norm(std::size_t c) const { return norm_[c]; }
  /// Centre has an axis index at either end (boxes only).
  bool on_outer_ring(std::size_t c) const;

  std::vector<std::size_t> neighbours(std::size_t c, Adjacency adj) const;

  std::span<const std::uint32_t> block_vertices(std::size_t c) const { return vertices_[c]; }
  /// Global indices of the edges with both endpoints in the block.
  std::span<const std::uint32_t> block_edges(std::size_t c) const { return edges_[c]; }

  /// k-good test of block c in omega.
  bool good(std::size_t c, const BondConfig& omega) const;
  /// omega and omega_prime agree on the block edges and the block is k-good.
  bool very_good(std::size_t c, const BondConfig& omega, const BondConfig& omega_prime) const;

 private:
  const Graph* graph_;
  int k_;
  int dim_;
  bool periodic_;
  std::vector<int> axis_;
  std::size_t num_centres_ = 0;
  std::vector<int> norm_;
  std::vector<std::vector<std::uint32_t>> vertices_;
  std::vector<std::vector<std::uint32_t>> edges_;
  std::vector<std::uint16_t> faces_;  // face bitmask per local block vertex, shared by all blocks
};

/// k-good test on a bare block: omega_block indexes the edges of the
/// (2k+1)^d open grid in canonical order. Conditions: at most one open
/// cluster with >= k vertices, and some cluster meets all 2d faces.
bool k_good(const BondConfig& omega_block, int d, int k);

/// Edge count of the bare (2k+1)^d block used by k_good.
std::size_t block_edge_count(int d, int k);

/// 0/1 value per centre.
struct CoarseField {
  int k = 1;
  int d = 2;
  std::size_t side = 0;  // centres per axis
  std::vector<std::uint8_t> value;

  std::size_t count_open() const;
};

CoarseField coarse_field(const BlockGrid& grid, const BondConfig& omega);
CoarseField coarse_field(const BlockGrid& grid, const BondConfig& omega, const BondConfig& omega_prime);

/// Header `k d side`, then one row of 0/1 per line (last axis fastest).
void write_field(std::ostream& out, const CoarseField& field);
CoarseField read_field(std::istream& in);

/// Clusters of open centres; label -1 marks closed centres.
struct FieldClusters {
  std::vector<long> label;
  std::vector<std::size_t> sizes;

  std::size_t count() const noexcept { return sizes.size(); }
  long largest() const;
};

FieldClusters field_clusters(const BlockGrid& grid, const CoarseField& field, Adjacency adj, bool open = true);

struct SurfaceResult {
  bool exists = false;
  std::vector<std::size_t> gamma;     // Gamma_k, sorted centre indices
  std::vector<std::size_t> exterior;  // closed star-clusters reaching the outer layer (D)
  std::vector<std::size_t> interior;
  std::vector<std::size_t> witness;   // closed star-path from the outer ring inwards, if no surface
  std::vector<std::uint32_t> gamma_vertices;
  std::vector<std::uint32_t> ext_vertices;  // includes the graph boundary
  std::vector<std::uint32_t> int_vertices;
};

/// Outermost good surface of a box field: D is the union of closed
/// star-clusters joined to a virtual closed layer outside the outer ring,
/// Gamma_k its outer star-boundary. `exists` is left false here.
SurfaceResult outermost_surface(const BlockGrid& grid, const CoarseField& field);

/// Surface inside the annulus Lambda_m \ Lambda_l: exists iff D avoids
/// Lambda_{l+k}. Requires l < m - 2k.
SurfaceResult find_separating_surface(const BlockGrid& grid, const CoarseField& field, int l);

/// E_{m,A} on a box: some open k-cluster of good centres joins dA^(k) to the
/// outer centre ring, and the largest omega-cluster inside its blocks is
/// joined to the graph boundary in omega.
bool classify_E_mA(const BlockGrid& grid, const BondConfig& omega, std::span<const std::uint32_t> region);

/// E^theta_{m,A} on a torus of side 2m. With `region` empty the path
/// requirement is dropped (the event E^theta_m).
struct ThetaEvent {
  bool holds = false;
  std::size_t large_clusters = 0;  // k-clusters with more than m/(4k) centres
  std::size_t largest = 0;
  bool path = false;
};
ThetaEvent classify_E_m_theta(const BlockGrid& grid, const BondConfig& omega, double theta,
                              std::span<const std::uint32_t> region = {});

/// Centres of region inside the grid and those with a k-neighbour outside.
std::vector<std::size_t> region_centres(const BlockGrid& grid, std::span<const std::uint32_t> region);
std::vector<std::size_t> region_centre_boundary(const BlockGrid& grid, std::span<const std::uint32_t> region);

/// Every k-cluster of good centres must carry exactly one omega-component
/// with >= k vertices on the union of its blocks. Returns the number of
/// clusters that do not.
struct ClusterCheck {
  std::size_t clusters = 0;
  std::size_t violations = 0;
};
ClusterCheck check_good_cluster_uniqueness(const BlockGrid& grid, const BondConfig& omega, const CoarseField& field);

/// Partition induced on the outer vertex boundary of `inner` (the rim) by
/// the open edges avoiding `inner` plus the ghost wirings of xi. label[i]
/// is the first rim index in the same class as rim[i].
struct InducedPartition {
  std::vector<std::uint32_t> rim;
  std::vector<long> label;
};
InducedPartition induced_partition(const Graph& g, const BondConfig& omega, const BoundaryPartition& xi,
                                   std::span<const std::uint32_t> inner);

enum class ConditionalBackend { automatic, enumeration, cftp, mcmc };

std::string to_string(ConditionalBackend b);
ConditionalBackend parse_backend(const std::string& name);

/// Samples the unrevealed edges of two RC systems (boundaries xi, xi_prime)
/// with shared randomness. Each marginal is the conditional law given the
/// revealed edges; the coupling is monotone.
struct PairSampler {
  ConditionalBackend backend = ConditionalBackend::automatic;
  std::size_t enumeration_cap = 20;
  std::size_t mcmc_sweeps = 50;
  std::size_t max_cftp_sweeps = 1 << 16;

  /// Returns the backend actually used.
  ConditionalBackend sample(const Graph& g, const RCParams& params, const BoundaryPartition& xi,
                            const BoundaryPartition& xi_prime, BondConfig& omega, BondConfig& omega_prime,
                            std::span<const std::uint32_t> unrevealed, Rng& rng) const;
};

struct RevealResult {
  BondConfig omega;
  BondConfig omega_prime;
  bool success = false;
  std::vector<std::size_t> processed;  // in processing order
  std::vector<std::uint8_t> very_good; // per processed centre
  SurfaceResult surface;
  bool surface_matches = false;   // processed good centres equal the post-hoc Gamma_k
  bool partitions_agree = false;  // on the boundary of Int(Gamma), success only
  bool interior_agree = false;    // omega = omega' on edges touching Int(Gamma), success only
  bool approximate = false;       // some step used the MCMC backend
  std::size_t enumeration_steps = 0;
  std::size_t cftp_steps = 0;
  std::size_t mcmc_steps = 0;
};

/// Revealing coupling on a centred box. Success: no processed centre lies
/// in Lambda_{m/2}^(k).
RevealResult reveal_coupling(const BlockGrid& grid, const RCParams& params, const BoundaryPartition& xi,
                             const BoundaryPartition& xi_prime, std::uint64_t seed, const PairSampler& sampler = {});

}  // namespace phasemix
