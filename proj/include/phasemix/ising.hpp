#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "phasemix/graph.hpp"

namespace phasemix {

/// Inverse temperature and the derived random-cluster edge parameter
/// p = 1 - exp(-beta) at q = 2.
struct ModelParams {
  double beta = 0.0;

  static constexpr double q = 2.0;

  double p() const noexcept { return -std::expm1(-beta); }
};

/// +-1 spins over the free vertices of a graph, with cached magnetization.
class SpinConfig {
 public:
  SpinConfig() = default;
  SpinConfig(std::size_t n, std::int8_t value);
  explicit SpinConfig(std::vector<std::int8_t> spins);

  static SpinConfig all_plus(const Graph& g) { return SpinConfig(g.num_free(), 1); }
  static SpinConfig all_minus(const Graph& g) { return SpinConfig(g.num_free(), -1); }

  std::size_t size() const noexcept { return spins_.size(); }
  std::int8_t operator[](std::size_t v) const { return spins_[v]; }
  std::span<const std::int8_t> spins() const noexcept { return spins_; }
  long long magnetization() const noexcept { return magnetization_; }

  void set(std::size_t v, std::int8_t s) {
    magnetization_ += s - spins_[v];
    spins_[v] = s;
  }
  void flip(std::size_t v) { set(v, static_cast<std::int8_t>(-spins_[v])); }

  /// Recomputes M from scratch; used by assertions.
  long long recompute_magnetization() const;

  friend bool operator==(const SpinConfig& a, const SpinConfig& b) { return a.spins_ == b.spins_; }

 private:
  std::vector<std::int8_t> spins_;
  long long magnetization_ = 0;
};

/// True if a >= b pointwise.
bool dominates(const SpinConfig& a, const SpinConfig& b);

/// Pointwise minimum.
SpinConfig pointwise_min(const SpinConfig& a, const SpinConfig& b);

/// Frozen spins on a graph's boundary set; empty for graphs without one.
class SpinBoundary {
 public:
  SpinBoundary() = default;
  explicit SpinBoundary(std::vector<std::int8_t> values) : values_(std::move(values)) {}

  static SpinBoundary none() { return {}; }
  static SpinBoundary uniform(const Graph& g, std::int8_t value) {
    return SpinBoundary(std::vector<std::int8_t>(g.num_boundary(), value));
  }

  /// Throws unless the boundary covers exactly the graph's boundary set.
  void validate(const Graph& g) const;

  bool empty() const noexcept { return values_.empty(); }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const std::int8_t> values() const noexcept { return values_; }
  /// Spin of boundary vertex v (a graph vertex index >= g.num_free()).
  std::int8_t at(const Graph& g, std::uint32_t v) const { return values_[v - g.num_free()]; }

  SpinBoundary flipped() const;

 private:
  std::vector<std::int8_t> values_;
};

/// Membership of a configuration in the two phases and the phase boundary
/// {0 <= M <= 1}.
struct PhaseMembership {
  bool plus;           // M >= 0
  bool minus;          // M <= 0
  bool plus_boundary;  // 0 <= M <= 1
};

enum class PhaseTag { plus, minus, plus_boundary };

PhaseMembership classify_phase(const SpinConfig& sigma);
PhaseMembership classify_magnetization(long long m);
bool in_phase(long long magnetization, PhaseTag tag);

/// Spin of any vertex: free spins from sigma, boundary spins from bc.
inline int spin_at(const Graph& g, const SpinConfig& sigma, const SpinBoundary& bc, std::uint32_t v) {
  return g.is_boundary(v) ? bc.at(g, v) : sigma[v];
}

/// Number of edges whose endpoints disagree, boundary spins included.
long long cut_size(const Graph& g, const SpinConfig& sigma, const SpinBoundary& bc);

/// -beta * cut_size (unnormalized log Gibbs weight).
double gibbs_log_weight(const Graph& g, const SpinConfig& sigma, const ModelParams& params,
                        const SpinBoundary& bc);

/// Sum of neighbor spins, k_+ - k_-.
int local_field(const Graph& g, std::uint32_t v, const SpinConfig& sigma, const SpinBoundary& bc);

/// Heat-bath probability of +1 at v: 1 / (1 + exp(-beta (k_+ - k_-))).
double heat_bath_prob_plus(const Graph& g, std::uint32_t v, const SpinConfig& sigma,
                           const ModelParams& params, const SpinBoundary& bc);
double heat_bath_prob_minus(const Graph& g, std::uint32_t v, const SpinConfig& sigma,
                            const ModelParams& params, const SpinBoundary& bc);

/// Change in cut size if v were flipped.
int flip_cut_delta(const Graph& g, std::uint32_t v, const SpinConfig& sigma, const SpinBoundary& bc);

/// Serialized as a header line `N M` followed by N bytes '+' or '-'.
void write_spins(std::ostream& out, const SpinConfig& sigma);
SpinConfig read_spins(std::istream& in);

}  // namespace phasemix
