#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phasemix/glauber.hpp"
#include "phasemix/graph.hpp"
#include "phasemix/ising.hpp"
#include "phasemix/random_cluster.hpp"
#include "phasemix/rng.hpp"

namespace phasemix {

class EstimatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kZ95 = 1.959963984540054;

struct Estimate {
  double estimate = 0.0;
  double half_width = 0.0;
  std::uint64_t n_samples = 0;
};

enum class SupportKind { site, patch, histogram };

/// Counts over a finite support.
class EmpiricalLaw {
 public:
  EmpiricalLaw(SupportKind kind, std::size_t support) : kind_(kind), counts_(support, 0) {}

  void add(std::size_t atom, std::uint64_t times = 1);
  SupportKind kind() const noexcept { return kind_; }
  std::size_t support() const noexcept { return counts_.size(); }
  std::uint64_t samples() const noexcept { return n_; }
  std::uint64_t count(std::size_t atom) const { return counts_[atom]; }
  double prob(std::size_t atom) const;

 private:
  SupportKind kind_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t n_ = 0;
};

/// Half l1 distance of the normalized counts. The half-width propagates the
/// multinomial error of sum_i s_i p_i with s_i the sign of p_i - q_i.
Estimate tv_plugin(const EmpiricalLaw& p, const EmpiricalLaw& q);
Estimate tv_plugin(const EmpiricalLaw& p, std::span<const double> exact);

/// Binomial proportion with a normal-approximation half-width.
Estimate proportion(std::uint64_t hits, std::uint64_t n);
/// One-sided 97.5% Clopper-Pearson upper bound; for hits = 0 this is
/// 1 - 0.025^(1/n).
double clopper_pearson_upper(std::uint64_t hits, std::uint64_t n);

/// Ising sampler driven by Swendsen-Wang sweeps. With `largest_plus` every
/// sweep recolors the fresh bond configuration with the largest cluster
/// forced to +1, which targets the tilde measure (graphs without boundary).
class EquilibriumChain {
 public:
  EquilibriumChain(const Graph& g, double beta, std::uint64_t seed, SpinBoundary bc = {}, bool largest_plus = false);

  void sweep();
  void sweeps(std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) sweep();
  }
  const SpinConfig& state() const noexcept { return sigma_; }

 private:
  const Graph* graph_;
  SwendsenWang sw_;
  Rng rng_;
  SpinConfig sigma_;
  bool largest_plus_;
  BondConfig omega_;
  BoundaryPartition xi_;
};

struct WSMScanConfig {
  std::vector<int> radii;
  std::size_t samples = 100000;
  std::size_t burn_in = 500;
  std::size_t thin = 1;  // sweeps between recorded samples
  double target_half_width = 0.0;  // 0 disables the budget check
  bool patch = true;               // v together with its neighbours
  std::uint64_t seed = 0;
};

struct WSMRow {
  int radius;
  Estimate site;
  std::optional<Estimate> patch;
  double ball_plus;  // pi_{B_r^+}(sigma_v = +1)
};

struct WSMScanResult {
  std::vector<WSMRow> rows;
  double reference_plus = 0.0;  // reference pi-hat(sigma_v = +1)
};

/// For each radius, TV between the centre marginal of the all-plus ball
/// measure and of the plus-phase reference (SW + largest-plus coloring on the
/// whole graph).
WSMScanResult wsm_within_phase_scan(const Graph& g, double beta, std::uint32_t v, const WSMScanConfig& cfg);

struct LdpRow {
  int n = 0;
  Estimate direct;
  std::uint64_t hits = 0;
  double upper_bound = 1.0;  // Clopper-Pearson, meaningful when hits = 0
};

/// Direct SW estimate of pi(|M|/N <= eps) on tori of the given sides.
std::vector<LdpRow> magnetization_ldp_probe(int d, const std::vector<int>& sides, double beta, double eps,
                                            std::size_t samples, std::size_t burn_in, std::uint64_t seed);

struct MulticanonicalConfig {
  std::size_t replicas = 8;
  double final_log_f = 1e-4;
  double flatness = 0.8;
  std::size_t check_interval = 2000;   // sweeps between flatness checks
  std::size_t max_wl_sweeps = 20000000;
  std::size_t production_sweeps = 200000;
  std::uint64_t seed = 0;
};

struct MulticanonicalResult {
  double log_estimate = 0.0;     // mean over replicas of log pi(|M|/N <= eps)
  double log_half_width = 0.0;
  Estimate estimate;             // exp of the log-scale mean, with a delta-method half-width
  std::vector<double> replica_log_estimates;
  std::vector<double> log_histogram;  // averaged log pi(|M| = b) over |M| bins, unnormalized
  std::uint64_t sweeps = 0;
};

/// pi(|M|/N <= eps) by multicanonical reweighting in |M|. Each sweep is N
/// single-spin Metropolis moves plus one Swendsen-Wang proposal, both
/// accepted against the multicanonical weight; weights come from a
/// Wang-Landau stage and the estimate from a separate production run.
MulticanonicalResult multicanonical_ldp(const Graph& g, double beta, double eps, const MulticanonicalConfig& cfg);

struct BinderPoint {
  double u4 = 0.0;
  double mean_abs_m = 0.0;  // E|M|/N
};

/// U4 = 1 - <M^4> / (3 <M^2>^2) from SW samples.
BinderPoint binder_cumulant(const Graph& g, double beta, std::size_t sweeps, std::size_t burn_in, std::uint64_t seed);

struct BinderCrossing {
  double beta_c = 0.0;
  struct Probe {
    double beta;
    double u_small;
    double u_large;
  };
  std::vector<Probe> probes;
};

/// Bisection on U4(large) - U4(small) over [lo, hi].
BinderCrossing binder_crossing(int d, int n_small, int n_large, double lo, double hi, double tol,
                               std::size_t sweeps, std::uint64_t seed);

struct BandRule {
  double band = 0.05;      // relative half-width of the band around the reference
  std::size_t dwell = 10;  // probes in the trailing window
};

/// First probe time at which the mean of the trailing `dwell` probes lies in
/// the band around `reference`; nullopt if it never does.
std::optional<double> time_to_band(std::span<const double> times, std::span<const double> values, double reference,
                                   const BandRule& rule);

struct RelaxConfig {
  std::vector<InitDistribution> inits;
  std::size_t replicas = 20;
  double horizon = 20000.0;
  double probe_interval = 5.0;
  BandRule rule;
  double reference = std::numeric_limits<double>::quiet_NaN();  // E|M|/N; NaN = estimate with SW
  std::size_t reference_sweeps = 20000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct RelaxRow {
  std::string init;
  std::vector<std::optional<double>> times;
  double median = 0.0;  // +inf when more than half never reach the band
  std::size_t reached = 0;
};

struct RelaxResult {
  double reference = 0.0;
  std::vector<RelaxRow> rows;
};

/// Plain Glauber from each initialization; observable |M|/N.
RelaxResult relaxation_compare(const Graph& g, double beta, const RelaxConfig& cfg);

/// Median with nullopt treated as +infinity.
double median_time(std::vector<std::optional<double>> times);

struct SurvivalCurve {
  std::vector<double> times;     // event times, increasing
  std::vector<double> survival;  // S(t) just after each event time
  std::vector<double> half_width;
  std::size_t n = 0;
  std::size_t events = 0;

  double at(double t) const;
  double half_width_at(double t) const;
};

/// Kaplan-Meier estimate with Greenwood half-widths; observed[i] = 0 marks a
/// censored time.
SurvivalCurve kaplan_meier(std::span<const double> times, std::span<const std::uint8_t> observed);

struct HittingConfig {
  InitDistribution init = InitDistribution::parse("all-plus");
  ChainMode mode = ChainMode::restricted_plus;
  PhaseTag target = PhaseTag::plus_boundary;
  double t_cap = 1000.0;
  std::size_t replicas = 100;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct HittingResult {
  std::vector<std::optional<double>> taus;
  SurvivalCurve curve;
};

HittingResult hitting_stats(const Graph& g, double beta, const HittingConfig& cfg);

/// Exact survival P(tau > t) of the hitting time of {0 <= M <= 1} for the
/// beta = 0 restricted chain from all-plus, via the birth-death chain on the
/// number of minus spins (uniformization).
double beta0_survival_exact(std::size_t num_sites, double t);

struct Polymer {
  std::vector<std::uint32_t> vertices;  // minus cluster of w, empty if sigma_w = +1
  std::size_t edge_boundary = 0;        // edges with exactly one endpoint in it
};

Polymer minus_cluster(const Graph& g, const SpinConfig& sigma, std::uint32_t w);

/// Counts of samples with statistic >= ell, ell = 0..max.
struct TailCurve {
  std::vector<std::uint64_t> at_least;
  std::uint64_t n = 0;

  void add(std::size_t value);
  /// Smallest ell with a positive count above zero, and the largest ell with
  /// at least `min_count` hits; the range is empty when first > last.
  std::pair<std::size_t, std::size_t> observed_range(std::uint64_t min_count) const;
  bool strictly_decreasing(std::uint64_t min_count) const;
};

struct PolymerTailConfig {
  std::size_t samples = 20000;
  std::size_t burn_in = 200;
  int radius = 2;                     // ball for the plus-boundary sample
  std::vector<std::uint32_t> roots;   // empty = every vertex
  std::uint64_t seed = 0;
};

struct PolymerTailResult {
  TailCurve reference_boundary;  // |d_e gamma_w| under the plus-phase reference
  TailCurve reference_size;      // |gamma_w|
  TailCurve tilde_boundary;      // gamma_w of sigma-tilde = sigma-plus ^ sigma-hat at roots[0]
  TailCurve tilde_size;
  std::uint64_t order_violations = 0;  // sigma-tilde above either parent somewhere
};

PolymerTailResult polymer_tail(const Graph& g, double beta, const PolymerTailConfig& cfg);

/// max{m <= n : m f(m) <= min(t, exp(n^(d-1) / K))}, 0 if no m >= 1 fits.
/// f[i] holds f(i + 1).
int g_of_t(std::span<const double> f, int n, double K, double t, int d = 2);

}  // namespace phasemix
