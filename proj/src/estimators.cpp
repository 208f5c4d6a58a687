#include "phasemix/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phasemix/parallel.hpp"

namespace phasemix {

void EmpiricalLaw::add(std::size_t atom, std::uint64_t times) {
  if (atom >= counts_.size()) throw EstimatorError("atom outside the support");
  counts_[atom] += times;
  n_ += times;
}

double EmpiricalLaw::prob(std::size_t atom) const {
  if (n_ == 0) throw EstimatorError("empty sample");
  return static_cast<double>(counts_[atom]) / static_cast<double>(n_);
}

namespace {

void check_pair(const EmpiricalLaw& p, std::size_t support) {
  if (p.support() != support) throw EstimatorError("support mismatch");
  if (p.samples() == 0) throw EstimatorError("empty sample");
}

}  // namespace

Estimate tv_plugin(const EmpiricalLaw& p, const EmpiricalLaw& q) {
  check_pair(p, q.support());
  check_pair(q, p.support());
  if (p.kind() != q.kind()) throw EstimatorError("support kinds differ");
  double tv = 0.0, a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < p.support(); ++i) {
    const double pi = p.prob(i), qi = q.prob(i);
    const double s = pi >= qi ? 1.0 : -1.0;
    tv += std::abs(pi - qi);
    a += s * pi;
    b += s * qi;
  }
  const double var = std::max(0.0, 1.0 - a * a) / static_cast<double>(p.samples()) +
                     std::max(0.0, 1.0 - b * b) / static_cast<double>(q.samples());
  return {0.5 * tv, 0.5 * kZ95 * std::sqrt(var), std::min(p.samples(), q.samples())};
}

Estimate tv_plugin(const EmpiricalLaw& p, std::span<const double> exact) {
  check_pair(p, exact.size());
  double tv = 0.0, a = 0.0;
  for (std::size_t i = 0; i < p.support(); ++i) {
    const double pi = p.prob(i);
    const double s = pi >= exact[i] ? 1.0 : -1.0;
    tv += std::abs(pi - exact[i]);
    a += s * pi;
  }
  const double var = std::max(0.0, 1.0 - a * a) / static_cast<double>(p.samples());
  return {0.5 * tv, 0.5 * kZ95 * std::sqrt(var), p.samples()};
}

Estimate proportion(std::uint64_t hits, std::uint64_t n) {
  if (n == 0) throw EstimatorError("empty sample");
  const double ph = static_cast<double>(hits) / static_cast<double>(n);
  return {ph, kZ95 * std::sqrt(ph * (1 - ph) / static_cast<double>(n)), n};
}

double clopper_pearson_upper(std::uint64_t hits, std::uint64_t n) {
  if (n == 0) return 1.0;
  if (hits >= n) return 1.0;
  if (hits == 0) return 1.0 - std::pow(0.025, 1.0 / static_cast<double>(n));
  const double nn = static_cast<double>(n);
  if (hits > 2000) {
    const double ph = static_cast<double>(hits) / nn;
    return std::min(1.0, ph + kZ95 * std::sqrt(ph * (1 - ph) / nn));
  }
  // P(Bin(n, p) <= hits) = 0.025, decreasing in p
  auto cdf = [&](double p) {
    double sum = 0.0;
    const double lp = std::log(p), lq = std::log1p(-p);
    for (std::uint64_t k = 0; k <= hits; ++k) {
      const double kk = static_cast<double>(k);
      sum += std::exp(std::lgamma(nn + 1) - std::lgamma(kk + 1) - std::lgamma(nn - kk + 1) + kk * lp + (nn - kk) * lq);
    }
    return sum;
  };
  double lo = static_cast<double>(hits) / nn, hi = 1.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) > 0.025) lo = mid;
    else hi = mid;
  }
  return hi;
}

EquilibriumChain::EquilibriumChain(const Graph& g, double beta, std::uint64_t seed, SpinBoundary bc, bool largest_plus)
    : graph_(&g),
      sw_(g, ModelParams{beta}, bc),
      rng_(seed),
      sigma_(SpinConfig::all_plus(g)),
      largest_plus_(largest_plus),
      omega_(g.num_edges()),
      xi_(BoundaryPartition::free(g)) {
  if (largest_plus && g.num_boundary() != 0) throw EstimatorError("largest-plus reference needs a graph without boundary");
}

void EquilibriumChain::sweep() {
  if (!largest_plus_) {
    sw_.step(sigma_, rng_);
    return;
  }
  sw_.step(sigma_, rng_, &omega_);
  sigma_ = es_color(*graph_, omega_, ColoringMode::largest_plus, xi_, rng_);
}

namespace {

std::size_t patch_code(const SpinConfig& s, std::span<const std::uint32_t> sites) {
  std::size_t code = 0;
  for (std::size_t i = 0; i < sites.size(); ++i)
    if (s[sites[i]] > 0) code |= std::size_t{1} << i;
  return code;
}

}  // namespace

WSMScanResult wsm_within_phase_scan(const Graph& g, double beta, std::uint32_t v, const WSMScanConfig& cfg) {
  if (g.num_boundary() != 0) throw EstimatorError("WSM scan needs a graph without boundary");
  if (v >= g.num_free()) throw EstimatorError("centre vertex out of range");
  if (cfg.radii.empty()) throw EstimatorError("no radii");
  if (cfg.samples == 0 || cfg.thin == 0) throw EstimatorError("samples and thin must be positive");
  for (std::size_t i = 0; i < cfg.radii.size(); ++i) {
    const int r = cfg.radii[i];
    if (r < 0 || (i > 0 && r <= cfg.radii[i - 1])) throw EstimatorError("radii must be increasing and nonnegative");
    if (g.kind() == GraphKind::torus && 2 * r + 1 >= g.side()) throw EstimatorError("radius too large for the torus");
    if (g.kind() == GraphKind::general) {
      const double delta = static_cast<double>(std::max<std::size_t>(g.max_degree(), 2));
      if (r > 0 && r >= 0.5 * std::log(static_cast<double>(g.num_free())) / std::log(delta))
        throw EstimatorError("radius beyond the tree-like range");
    }
  }
  if (g.kind() == GraphKind::box) throw EstimatorError("WSM scan runs on a torus or a general graph");

  std::vector<std::uint32_t> patch_sites{v};
  for (auto u : g.neighbors(v)) patch_sites.push_back(u);
  std::sort(patch_sites.begin() + 1, patch_sites.end());
  patch_sites.erase(std::unique(patch_sites.begin() + 1, patch_sites.end()), patch_sites.end());
  const bool want_patch = cfg.patch && patch_sites.size() <= 20;

  EmpiricalLaw ref_site(SupportKind::site, 2);
  EmpiricalLaw ref_patch(SupportKind::patch, want_patch ? std::size_t{1} << patch_sites.size() : 1);
  {
    EquilibriumChain ref(g, beta, seed_derive(cfg.seed, "reference"), {}, true);
    ref.sweeps(cfg.burn_in);
    for (std::size_t s = 0; s < cfg.samples; ++s) {
      ref.sweeps(cfg.thin);
      ref_site.add(ref.state()[v] > 0 ? 1 : 0);
      if (want_patch) ref_patch.add(patch_code(ref.state(), patch_sites));
    }
  }

  WSMScanResult out;
  out.reference_plus = ref_site.prob(1);
  for (int r : cfg.radii) {
    const BallView view = ball(g, v, r);
    const Subgraph sub = subgraph_with_boundary(g, view);
    std::vector<std::uint32_t> local(g.num_vertices(), UINT32_MAX);
    for (std::uint32_t i = 0; i < sub.to_parent.size(); ++i) local[sub.to_parent[i]] = i;
    std::vector<std::uint32_t> local_patch;
    bool patch_inside = want_patch && r >= 1;
    for (auto u : patch_sites) {
      if (local[u] == UINT32_MAX || sub.graph.is_boundary(local[u])) patch_inside = false;
      else local_patch.push_back(local[u]);
    }
    EmpiricalLaw site(SupportKind::site, 2);
    EmpiricalLaw patch(SupportKind::patch, ref_patch.support());
    EquilibriumChain chain(sub.graph, beta, seed_derive(cfg.seed, "ball/" + std::to_string(r)),
                           SpinBoundary::uniform(sub.graph, 1));
    chain.sweeps(cfg.burn_in);
    for (std::size_t s = 0; s < cfg.samples; ++s) {
      chain.sweeps(cfg.thin);
      site.add(chain.state()[local[v]] > 0 ? 1 : 0);
      if (patch_inside) patch.add(patch_code(chain.state(), local_patch));
    }
    WSMRow row{r, tv_plugin(site, ref_site), std::nullopt, site.prob(1)};
    if (patch_inside) row.patch = tv_plugin(patch, ref_patch);
    if (cfg.target_half_width > 0 && row.site.half_width > cfg.target_half_width)
      throw EstimatorError("sample budget exhausted before reaching the target half-width at radius " +
                           std::to_string(r));
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::vector<LdpRow> magnetization_ldp_probe(int d, const std::vector<int>& sides, double beta, double eps,
                                            std::size_t samples, std::size_t burn_in, std::uint64_t seed) {
  if (eps < 0) throw EstimatorError("eps must be nonnegative");
  if (samples == 0) throw EstimatorError("samples must be positive");
  std::vector<LdpRow> rows;
  for (int n : sides) {
    const Graph g = Graph::torus(d, n);
    const double cut = eps * static_cast<double>(g.num_free()) + 1e-9;
    EquilibriumChain chain(g, beta, seed_derive(seed, "ldp/" + std::to_string(n)));
    chain.sweeps(burn_in);
    std::uint64_t hits = 0;
    for (std::size_t s = 0; s < samples; ++s) {
      chain.sweep();
      if (std::abs(static_cast<double>(chain.state().magnetization())) <= cut) ++hits;
    }
    rows.push_back({n, proportion(hits, samples), hits, clopper_pearson_upper(hits, samples)});
  }
  return rows;
}

namespace {

double log_sum_exp(std::span<const double> xs) {
  double m = -INFINITY;
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

class MulticanonicalWalker {
 public:
  MulticanonicalWalker(const Graph& g, double beta, std::uint64_t seed)
      : g_(g), beta_(beta), rng_(seed), sw_(g, ModelParams{beta}), sigma_(SpinConfig::all_plus(g)),
        parity_(static_cast<long long>(g.num_free() % 2)),
        bins_(static_cast<std::size_t>((static_cast<long long>(g.num_free()) - parity_) / 2 + 1)),
        log_g_(bins_, 0.0), hist_(bins_, 0) {
    for (int delta = -64; delta <= 64; ++delta) boltz_.push_back(std::exp(-beta * delta));
  }

  std::size_t bins() const { return bins_; }
  std::size_t bin(long long m) const { return static_cast<std::size_t>((std::llabs(m) - parity_) / 2); }
  long long abs_m(std::size_t b) const { return static_cast<long long>(2 * b) + parity_; }

  // One sweep; log_f > 0 updates the weights after every move.
  void sweep(double log_f) {
    const std::size_t n = g_.num_free();
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = static_cast<std::uint32_t>(rng_.uniform_index(n));
      int h = 0;
      for (auto u : g_.neighbors(v)) h += sigma_[u];
      const int dcut = sigma_[v] * h;
      const std::size_t b_old = bin(sigma_.magnetization());
      const std::size_t b_new = bin(sigma_.magnetization() - 2 * sigma_[v]);
      const double ratio = (dcut >= -64 && dcut <= 64 ? boltz_[static_cast<std::size_t>(dcut + 64)]
                                                      : std::exp(-beta_ * dcut)) *
                           std::exp(log_g_[b_old] - log_g_[b_new]);
      if (ratio >= 1.0 || rng_.uniform() < ratio) sigma_.flip(v);
      record(log_f);
    }
    proposal_ = sigma_;
    sw_.step(proposal_, rng_);
    const double a = std::exp(log_g_[bin(sigma_.magnetization())] - log_g_[bin(proposal_.magnetization())]);
    if (a >= 1.0 || rng_.uniform() < a) std::swap(sigma_, proposal_);
    record(log_f);
  }

  bool flat(double flatness) const {
    double mean = 0.0;
    std::uint64_t lo = UINT64_MAX;
    for (auto h : hist_) {
      mean += static_cast<double>(h);
      lo = std::min(lo, h);
    }
    mean /= static_cast<double>(bins_);
    return lo > 0 && static_cast<double>(lo) >= flatness * mean;
  }
  void clear_hist() { std::fill(hist_.begin(), hist_.end(), 0); }
  const std::vector<double>& log_g() const { return log_g_; }
  const std::vector<std::uint64_t>& hist() const { return hist_; }

 private:
  void record(double log_f) {
    const std::size_t b = bin(sigma_.magnetization());
    ++hist_[b];
    if (log_f > 0) log_g_[b] += log_f;
  }

  const Graph& g_;
  double beta_;
  Rng rng_;
  SwendsenWang sw_;
  SpinConfig sigma_, proposal_;
  long long parity_;
  std::size_t bins_;
  std::vector<double> log_g_;
  std::vector<std::uint64_t> hist_;
  std::vector<double> boltz_;
};

}  // namespace

MulticanonicalResult multicanonical_ldp(const Graph& g, double beta, double eps, const MulticanonicalConfig& cfg) {
  if (g.num_boundary() != 0) throw EstimatorError("multicanonical probe needs a graph without boundary");
  if (cfg.replicas == 0) throw EstimatorError("replicas must be positive");
  if (eps < 0) throw EstimatorError("eps must be nonnegative");
  const double cut = eps * static_cast<double>(g.num_free()) + 1e-9;
  MulticanonicalResult out;
  std::vector<std::vector<double>> logp;
  for (std::size_t rep = 0; rep < cfg.replicas; ++rep) {
    MulticanonicalWalker w(g, beta, seed_derive(cfg.seed, "mucA/" + std::to_string(rep)));
    std::uint64_t wl_sweeps = 0;
    for (double f = 1.0; f >= cfg.final_log_f; f *= 0.5) {
      w.clear_hist();
      do {
        for (std::size_t s = 0; s < cfg.check_interval; ++s) w.sweep(f);
        wl_sweeps += cfg.check_interval;
        if (wl_sweeps > cfg.max_wl_sweeps) throw EstimatorError("Wang-Landau stage did not flatten");
      } while (!w.flat(cfg.flatness));
    }
    w.clear_hist();
    for (std::size_t s = 0; s < cfg.production_sweeps; ++s) w.sweep(0.0);
    out.sweeps += wl_sweeps + cfg.production_sweeps;

    std::vector<double> lp(w.bins(), -INFINITY);
    for (std::size_t b = 0; b < w.bins(); ++b)
      if (w.hist()[b] > 0) lp[b] = std::log(static_cast<double>(w.hist()[b])) + w.log_g()[b];
    const double z = log_sum_exp(lp);
    std::vector<double> below;
    for (std::size_t b = 0; b < w.bins(); ++b) {
      lp[b] -= z;
      if (static_cast<double>(w.abs_m(b)) <= cut) below.push_back(lp[b]);
    }
    out.replica_log_estimates.push_back(log_sum_exp(below));
    logp.push_back(std::move(lp));
  }
  const double r = static_cast<double>(cfg.replicas);
  const double mean = std::accumulate(out.replica_log_estimates.begin(), out.replica_log_estimates.end(), 0.0) / r;
  double ss = 0.0;
  for (double x : out.replica_log_estimates) ss += (x - mean) * (x - mean);
  const double sd = cfg.replicas > 1 ? std::sqrt(ss / (r - 1)) : 0.0;
  out.log_estimate = mean;
  out.log_half_width = kZ95 * sd / std::sqrt(r);
  out.estimate = {std::exp(mean), std::exp(mean) * out.log_half_width, cfg.replicas};
  out.log_histogram.assign(logp.front().size(), 0.0);
  for (const auto& lp : logp)
    for (std::size_t b = 0; b < lp.size(); ++b) out.log_histogram[b] += lp[b] / r;
  return out;
}

BinderPoint binder_cumulant(const Graph& g, double beta, std::size_t sweeps, std::size_t burn_in, std::uint64_t seed) {
  if (sweeps == 0) throw EstimatorError("sweeps must be positive");
  EquilibriumChain chain(g, beta, seed);
  chain.sweeps(burn_in);
  const double n = static_cast<double>(g.num_free());
  double m1 = 0.0, m2 = 0.0, m4 = 0.0;
  for (std::size_t s = 0; s < sweeps; ++s) {
    chain.sweep();
    const double m = static_cast<double>(chain.state().magnetization()) / n;
    m1 += std::abs(m);
    m2 += m * m;
    m4 += m * m * m * m;
  }
  const double k = static_cast<double>(sweeps);
  m1 /= k;
  m2 /= k;
  m4 /= k;
  return {1.0 - m4 / (3.0 * m2 * m2), m1};
}

BinderCrossing binder_crossing(int d, int n_small, int n_large, double lo, double hi, double tol, std::size_t sweeps,
                               std::uint64_t seed) {
  if (!(lo < hi) || tol <= 0) throw EstimatorError("bad bracket");
  const Graph gs = Graph::torus(d, n_small);
  const Graph gl = Graph::torus(d, n_large);
  BinderCrossing out;
  int probe = 0;
  auto diff = [&](double beta) {
    const std::string tag = "binder/" + std::to_string(probe++);
    const double us = binder_cumulant(gs, beta, sweeps, sweeps / 10, seed_derive(seed, tag + "/small")).u4;
    const double ul = binder_cumulant(gl, beta, sweeps, sweeps / 10, seed_derive(seed, tag + "/large")).u4;
    out.probes.push_back({beta, us, ul});
    return ul - us;
  };
  if (diff(lo) > 0 || diff(hi) < 0) throw EstimatorError("Binder curves do not cross inside the bracket");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (diff(mid) < 0) lo = mid;
    else hi = mid;
  }
  out.beta_c = 0.5 * (lo + hi);
  return out;
}

std::optional<double> time_to_band(std::span<const double> times, std::span<const double> values, double reference,
                                   const BandRule& rule) {
  if (times.size() != values.size()) throw EstimatorError("times and values differ in length");
  if (rule.dwell == 0) throw EstimatorError("dwell must be positive");
  const double tol = rule.band * std::abs(reference);
  double window = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    window += values[j];
    if (j >= rule.dwell) window -= values[j - rule.dwell];
    if (j + 1 < rule.dwell) continue;
    if (std::abs(window / static_cast<double>(rule.dwell) - reference) <= tol) return times[j];
  }
  return std::nullopt;
}

double median_time(std::vector<std::optional<double>> times) {
  if (times.empty()) throw EstimatorError("no times");
  std::vector<double> t;
  for (auto& x : times) t.push_back(x ? *x : INFINITY);
  std::sort(t.begin(), t.end());
  const std::size_t n = t.size();
  if (n % 2 == 1) return t[n / 2];
  const double a = t[n / 2 - 1], b = t[n / 2];
  if (std::isinf(a) || std::isinf(b)) return INFINITY;
  return 0.5 * (a + b);
}

RelaxResult relaxation_compare(const Graph& g, double beta, const RelaxConfig& cfg) {
  if (cfg.inits.empty()) throw EstimatorError("no initializations");
  if (cfg.replicas == 0 || cfg.probe_interval <= 0 || cfg.horizon <= 0) throw EstimatorError("bad relaxation budget");
  RelaxResult out;
  const double n = static_cast<double>(g.num_free());
  if (std::isnan(cfg.reference)) {
    EquilibriumChain chain(g, beta, seed_derive(cfg.seed, "reference"));
    chain.sweeps(cfg.reference_sweeps / 10);
    double sum = 0.0;
    for (std::size_t s = 0; s < cfg.reference_sweeps; ++s) {
      chain.sweep();
      sum += std::abs(static_cast<double>(chain.state().magnetization())) / n;
    }
    out.reference = sum / static_cast<double>(std::max<std::size_t>(cfg.reference_sweeps, 1));
  } else {
    out.reference = cfg.reference;
  }
  const GlauberDynamics dyn(g, ModelParams{beta});
  ProbeSchedule sched{0.0, cfg.probe_interval, false, {}};
  for (std::size_t i = 0; i < cfg.inits.size(); ++i) {
    RelaxRow row;
    row.init = to_string(cfg.inits[i].kind);
    row.times.resize(cfg.replicas);
    parallel_for(cfg.replicas, cfg.workers, [&](std::size_t r) {
      const auto seeds =
          ReplicaSeeds::from(seed_derive(cfg.seed, "relax/" + std::to_string(i) + "/" + std::to_string(r)));
      Rng init_rng(seeds.init);
      ChainState state{draw_initial(g, cfg.inits[i], init_rng), 0.0, ChainMode::plain, 0};
      EventStream stream(seeds.updates, g.num_free());
      std::vector<double> t, v;
      // chunks end between probe times, so the probes match one long run
      for (std::size_t chunk = 1; !row.times[r]; ++chunk) {
        const double end = std::min(cfg.horizon, (static_cast<double>(chunk) * 200 + 0.5) * cfg.probe_interval);
        for (const auto& p : run(dyn, state, stream, end, &sched).probes) {
          t.push_back(p.time);
          v.push_back(std::abs(static_cast<double>(p.magnetization)) / n);
        }
        row.times[r] = time_to_band(t, v, out.reference, cfg.rule);
        if (end >= cfg.horizon) break;
      }
    });
    for (const auto& t : row.times)
      if (t) ++row.reached;
    row.median = median_time(row.times);
    out.rows.push_back(std::move(row));
  }
  return out;
}

double SurvivalCurve::at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

double SurvivalCurve::half_width_at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0.0;
  return half_width[static_cast<std::size_t>(it - times.begin()) - 1];
}

SurvivalCurve kaplan_meier(std::span<const double> times, std::span<const std::uint8_t> observed) {
  if (times.size() != observed.size()) throw EstimatorError("times and flags differ in length");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  // events before censorings at equal times
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (times[a] != times[b]) return times[a] < times[b];
    return observed[a] > observed[b];
  });
  SurvivalCurve c;
  c.n = times.size();
  double s = 1.0, green = 0.0;
  std::size_t at_risk = times.size();
  for (std::size_t i = 0; i < order.size();) {
    const double t = times[order[i]];
    std::size_t d = 0, removed = 0;
    while (i < order.size() && times[order[i]] == t) {
      if (observed[order[i]]) ++d;
      ++removed;
      ++i;
    }
    if (d > 0) {
      const double nr = static_cast<double>(at_risk), dd = static_cast<double>(d);
      s *= 1.0 - dd / nr;
      if (d < at_risk) green += dd / (nr * (nr - dd));
      c.times.push_back(t);
      c.survival.push_back(s);
      c.half_width.push_back(kZ95 * s * std::sqrt(green));
      c.events += d;
    }
    at_risk -= removed;
  }
  return c;
}

HittingResult hitting_stats(const Graph& g, double beta, const HittingConfig& cfg) {
  if (cfg.replicas == 0) throw EstimatorError("replicas must be positive");
  const GlauberDynamics dyn(g, ModelParams{beta});
  HittingResult out;
  out.taus.resize(cfg.replicas);
  parallel_for(cfg.replicas, cfg.workers, [&](std::size_t r) {
    const auto seeds = ReplicaSeeds::from(seed_derive(cfg.seed, "hit/" + std::to_string(r)));
    Rng init_rng(seeds.init);
    ChainState state{draw_initial(g, cfg.init, init_rng), 0.0, cfg.mode, 0};
    EventStream stream(seeds.updates, g.num_free());
    out.taus[r] = hitting_time(dyn, state, stream, cfg.target, cfg.t_cap);
  });
  std::vector<double> t;
  std::vector<std::uint8_t> seen;
  for (const auto& tau : out.taus) {
    t.push_back(tau ? *tau : cfg.t_cap);
    seen.push_back(tau ? 1 : 0);
  }
  out.curve = kaplan_meier(t, seen);
  return out;
}

double beta0_survival_exact(std::size_t num_sites, double t) {
  if (num_sites == 0) throw EstimatorError("no sites");
  if (t < 0) return 1.0;
  const std::size_t target = num_sites / 2;  // minus spins at M in {0, 1}
  if (target == 0) return 0.0;
  const double n = static_cast<double>(num_sites);
  const double lambda = n / 2.0 * t;
  // uniformized jump chain on transient states 0..target-1
  std::vector<double> p(target, 0.0), next(target);
  p[0] = 1.0;
  const double sd = std::sqrt(lambda);
  const auto jmax = static_cast<std::size_t>(lambda + 12.0 * sd + 50.0);
  const double jmin = std::max(0.0, lambda - 12.0 * sd - 50.0);
  double surv = 0.0;
  for (std::size_t j = 0; j <= jmax; ++j) {
    if (static_cast<double>(j) >= jmin) {
      const double jj = static_cast<double>(j);
      const double w = lambda > 0 ? std::exp(jj * std::log(lambda) - lambda - std::lgamma(jj + 1)) : (j == 0 ? 1.0 : 0.0);
      surv += w * std::accumulate(p.begin(), p.end(), 0.0);
    }
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t k = 0; k < target; ++k) {
      const double kk = static_cast<double>(k);
      if (k > 0) next[k - 1] += p[k] * kk / n;
      if (k + 1 < target) next[k + 1] += p[k] * (n - kk) / n;
    }
    p.swap(next);
  }
  return std::min(1.0, surv);
}

Polymer minus_cluster(const Graph& g, const SpinConfig& sigma, std::uint32_t w) {
  if (w >= g.num_free()) throw EstimatorError("root out of range");
  Polymer out;
  if (sigma[w] > 0) return out;
  std::vector<std::uint8_t> in(g.num_free(), 0);
  in[w] = 1;
  out.vertices.push_back(w);
  for (std::size_t head = 0; head < out.vertices.size(); ++head) {
    for (auto u : g.neighbors(out.vertices[head])) {
      if (g.is_boundary(u) || in[u] || sigma[u] > 0) continue;
      in[u] = 1;
      out.vertices.push_back(u);
    }
  }
  for (auto x : out.vertices)
    for (auto u : g.neighbors(x))
      if (g.is_boundary(u) || !in[u]) ++out.edge_boundary;
  std::sort(out.vertices.begin(), out.vertices.end());
  return out;
}

void TailCurve::add(std::size_t value) {
  if (at_least.size() < value + 1) at_least.resize(value + 1, 0);
  for (std::size_t l = 0; l <= value; ++l) ++at_least[l];
  ++n;
}

std::pair<std::size_t, std::size_t> TailCurve::observed_range(std::uint64_t min_count) const {
  std::size_t first = 1;
  while (first < at_least.size() && first + 1 < at_least.size() && at_least[first + 1] == at_least[first]) ++first;
  if (first >= at_least.size()) return {1, 0};
  std::size_t last = 0;
  for (std::size_t l = 1; l < at_least.size(); ++l)
    if (at_least[l] >= min_count) last = l;
  return {first, last};
}

bool TailCurve::strictly_decreasing(std::uint64_t min_count) const {
  const auto [lo, hi] = observed_range(min_count);
  for (std::size_t l = lo; l < hi; ++l)
    if (at_least[l + 1] >= at_least[l]) return false;
  return true;
}

PolymerTailResult polymer_tail(const Graph& g, double beta, const PolymerTailConfig& cfg) {
  if (g.num_boundary() != 0) throw EstimatorError("polymer tails need a graph without boundary");
  std::vector<std::uint32_t> roots = cfg.roots;
  if (roots.empty()) {
    roots.resize(g.num_free());
    std::iota(roots.begin(), roots.end(), 0u);
  }
  for (auto w : roots)
    if (w >= g.num_free()) throw EstimatorError("root out of range");

  const BallView view = ball(g, roots.front(), cfg.radius);
  const Subgraph sub = subgraph_with_boundary(g, view);
  EquilibriumChain ref(g, beta, seed_derive(cfg.seed, "reference"), {}, true);
  EquilibriumChain plus(sub.graph, beta, seed_derive(cfg.seed, "ball"), SpinBoundary::uniform(sub.graph, 1));
  ref.sweeps(cfg.burn_in);
  plus.sweeps(cfg.burn_in);

  PolymerTailResult out;
  SpinConfig full_plus = SpinConfig::all_plus(g);
  for (std::size_t s = 0; s < cfg.samples; ++s) {
    ref.sweep();
    plus.sweep();
    for (auto w : roots) {
      const Polymer p = minus_cluster(g, ref.state(), w);
      out.reference_boundary.add(p.edge_boundary);
      out.reference_size.add(p.vertices.size());
    }
    for (std::uint32_t i = 0; i < sub.graph.num_free(); ++i) full_plus.set(sub.to_parent[i], plus.state()[i]);
    const SpinConfig tilde = pointwise_min(full_plus, ref.state());
    if (!dominates(full_plus, tilde) || !dominates(ref.state(), tilde)) ++out.order_violations;
    const Polymer p = minus_cluster(g, tilde, roots.front());
    out.tilde_boundary.add(p.edge_boundary);
    out.tilde_size.add(p.vertices.size());
  }
  return out;
}

int g_of_t(std::span<const double> f, int n, double K, double t, int d) {
  if (n < 0 || static_cast<std::size_t>(n) > f.size()) throw EstimatorError("f must be tabulated up to n");
  const double cap = std::min(t, std::exp(std::pow(static_cast<double>(n), d - 1) / K));
  int best = 0;
  for (int m = 1; m <= n; ++m)
    if (static_cast<double>(m) * f[static_cast<std::size_t>(m - 1)] <= cap) best = m;
  return best;
}

}  // namespace phasemix
