#include "phasemix/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace phasemix {

double ExactLaw::total() const { return std::accumulate(prob.begin(), prob.end(), 0.0); }

std::uint64_t encode_spins(const SpinConfig& sigma) {
  std::uint64_t code = 0;
  for (std::size_t v = 0; v < sigma.size(); ++v)
    if (sigma[v] > 0) code |= std::uint64_t{1} << v;
  return code;
}

SpinConfig decode_spins(std::uint64_t code, std::size_t n) {
  std::vector<std::int8_t> s(n);
  for (std::size_t v = 0; v < n; ++v) s[v] = (code >> v) & 1 ? 1 : -1;
  return SpinConfig(std::move(s));
}

std::uint64_t encode_bonds(const BondConfig& omega) {
  std::uint64_t code = 0;
  for (std::size_t e = 0; e < omega.size(); ++e)
    if (omega.is_open(e)) code |= std::uint64_t{1} << e;
  return code;
}

BondConfig decode_bonds(std::uint64_t code, std::size_t m) {
  BondConfig omega(m);
  for (std::size_t e = 0; e < m; ++e) omega.set(e, (code >> e) & 1);
  return omega;
}

double tv_distance(const ExactLaw& a, const ExactLaw& b) {
  if (a.size() != b.size()) throw std::invalid_argument("tv_distance: laws over different spaces");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.prob[i] - b.prob[i]);
  return s / 2;
}

namespace {

void require_cap(std::size_t bits, std::size_t cap, const char* what) {
  if (bits > cap)
    throw OracleCapError(std::string(what) + ": size cap exceeded (" + std::to_string(bits) + " > " +
                         std::to_string(cap) + ")");
}

void normalize(std::vector<double>& w) {
  const double z = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= z;
}

int popcount_sign(std::uint64_t code, std::size_t n) {
  return 2 * std::popcount(code) - static_cast<int>(n);
}

int spin_of(const Graph& g, const SpinBoundary& bc, std::uint64_t code, std::uint32_t v) {
  return g.is_boundary(v) ? bc.at(g, v) : ((code >> v) & 1 ? 1 : -1);
}

long long cut_of(const Graph& g, const SpinBoundary& bc, std::uint64_t code) {
  long long cut = 0;
  for (const auto& e : g.edges())
    if (spin_of(g, bc, code, e.u) != spin_of(g, bc, code, e.v)) ++cut;
  return cut;
}

Graph without_boundary(const Graph& g) {
  return Graph::general(g.num_vertices(), {g.edges().begin(), g.edges().end()}, 0);
}

// Probability that a coloring of the given clusters has M >= 0. `weights`
// holds the free-vertex count of every unforced cluster; `base` is the
// magnetization from forced clusters.
double positive_mass(const std::vector<int>& weights, long long base) {
  const std::size_t k = weights.size();
  std::uint64_t good = 0;
  for (std::uint64_t c = 0; c < (std::uint64_t{1} << k); ++c) {
    long long m = base;
    for (std::size_t i = 0; i < k; ++i) m += (c >> i) & 1 ? weights[i] : -weights[i];
    good += m >= 0;
  }
  return static_cast<double>(good) / static_cast<double>(std::uint64_t{1} << k);
}

// Clusters that must be +1 under the mode.
std::vector<std::uint8_t> forced_clusters(const ComponentLabeling& lab, ColoringMode mode) {
  std::vector<std::uint8_t> f(lab.count(), 0);
  if (mode == ColoringMode::plus_boundary) {
    for (std::size_t c = 0; c < f.size(); ++c) f[c] = lab.touches_boundary[c];
  } else if (mode == ColoringMode::largest_plus) {
    f[lab.largest()] = 1;
  }
  return f;
}

}  // namespace

GibbsEnumeration enumerate_gibbs(const Graph& g, const ModelParams& params, const SpinBoundary& bc) {
  const std::size_t n = g.num_free();
  require_cap(n, kEnumerationCap, "enumerate_gibbs");
  if (g.num_boundary() > 0) bc.validate(g);
  const std::size_t states = std::size_t{1} << n;
  GibbsEnumeration out;
  out.pi.prob.resize(states);
  for (std::uint64_t x = 0; x < states; ++x)
    out.pi.prob[x] = std::exp(-params.beta * static_cast<double>(cut_of(g, bc, x)));
  normalize(out.pi.prob);
  out.pi_plus.prob.assign(states, 0.0);
  out.pi_minus.prob.assign(states, 0.0);
  out.zero_atom = 0;
  for (std::uint64_t x = 0; x < states; ++x) {
    const int m = popcount_sign(x, n);
    if (m >= 0) out.pi_plus.prob[x] = out.pi.prob[x];
    if (m <= 0) out.pi_minus.prob[x] = out.pi.prob[x];
    if (m == 0) out.zero_atom += out.pi.prob[x];
  }
  normalize(out.pi_plus.prob);
  normalize(out.pi_minus.prob);
  return out;
}

ExactLaw enumerate_rc(const Graph& g, const RCParams& params, const BoundaryPartition& xi) {
  const std::size_t m = g.num_edges();
  require_cap(m, kEnumerationCap, "enumerate_rc");
  ExactLaw law;
  law.prob.resize(std::size_t{1} << m);
  std::vector<double> logw(law.prob.size());
  for (std::uint64_t w = 0; w < logw.size(); ++w) logw[w] = rc_log_weight(g, decode_bonds(w, m), params, xi);
  const double mx = *std::max_element(logw.begin(), logw.end());
  for (std::size_t i = 0; i < logw.size(); ++i) law.prob[i] = std::exp(logw[i] - mx);
  normalize(law.prob);
  return law;
}

double check_detailed_balance(const Graph& g, const ModelParams& params, const SpinBoundary& bc, ChainMode mode,
                              const ExactLaw& law) {
  const std::size_t n = g.num_free();
  require_cap(n, kKernelCap, "check_detailed_balance");
  const std::size_t states = std::size_t{1} << n;
  if (law.size() != states) throw std::invalid_argument("check_detailed_balance: law over the wrong space");
  auto in_space = [&](std::uint64_t x) {
    const int m = popcount_sign(x, n);
    if (mode == ChainMode::restricted_plus) return m >= 0;
    if (mode == ChainMode::restricted_minus) return m <= 0;
    return true;
  };
  // P(x, x with sigma_v := s) for s = +1/-1.
  auto kernel = [&](std::uint64_t x, std::uint32_t v, int s) {
    const SpinConfig sigma = decode_spins(x, n);
    const double pp = heat_bath_prob_plus(g, v, sigma, params, bc);
    double to_plus = pp;
    double to_minus = 1 - pp;
    const long long rest = sigma.magnetization() - sigma[v];
    if (mode == ChainMode::restricted_plus && rest - 1 < 0) {
      to_plus += to_minus;
      to_minus = 0;
    }
    if (mode == ChainMode::restricted_minus && rest + 1 > 0) {
      to_minus += to_plus;
      to_plus = 0;
    }
    return (s > 0 ? to_plus : to_minus) / static_cast<double>(n);
  };
  double worst = 0;
  for (std::uint64_t x = 0; x < states; ++x) {
    if (!in_space(x)) continue;
    for (std::uint32_t v = 0; v < n; ++v) {
      const std::uint64_t y = x ^ (std::uint64_t{1} << v);
      if (!in_space(y) || y < x) continue;
      const int sy = (y >> v) & 1 ? 1 : -1;
      const double flow_xy = law.prob[x] * kernel(x, v, sy);
      const double flow_yx = law.prob[y] * kernel(y, v, -sy);
      worst = std::max(worst, std::abs(flow_xy - flow_yx));
    }
  }
  return worst;
}

double check_sw_stationarity(const Graph& g, const ModelParams& params, const SpinBoundary& bc) {
  const std::size_t n = g.num_free();
  require_cap(n, kKernelCap, "check_sw_stationarity");
  require_cap(g.num_edges(), kEnumerationCap, "check_sw_stationarity");
  const auto gibbs = enumerate_gibbs(g, params, bc);
  const std::size_t states = std::size_t{1} << n;
  const double p = params.p();
  std::vector<double> pushed(states, 0.0);
  const BoundaryPartition none = BoundaryPartition::free(g);
  for (std::uint64_t x = 0; x < states; ++x) {
    std::vector<std::size_t> agree;
    for (std::size_t e = 0; e < g.num_edges(); ++e)
      if (spin_of(g, bc, x, g.edge(e).u) == spin_of(g, bc, x, g.edge(e).v)) agree.push_back(e);
    const std::size_t a = agree.size();
    for (std::uint64_t sub = 0; sub < (std::uint64_t{1} << a); ++sub) {
      BondConfig omega(g.num_edges());
      for (std::size_t i = 0; i < a; ++i)
        if ((sub >> i) & 1) omega.set(agree[i], true);
      const auto k = static_cast<double>(omega.num_open());
      const double w = std::pow(p, k) * std::pow(1 - p, static_cast<double>(a) - k);
      const auto lab = label_components(g, omega, none);
      // Cluster spins: boundary spin if the cluster has one, else free.
      std::vector<int> fixed(lab.count(), 0);
      for (auto v = static_cast<std::uint32_t>(n); v < g.num_vertices(); ++v) fixed[lab.label[v]] = bc.at(g, v);
      std::vector<std::uint32_t> free_clusters;
      std::vector<std::uint8_t> has_free(lab.count(), 0);
      for (std::uint32_t v = 0; v < n; ++v) has_free[lab.label[v]] = 1;
      for (std::uint32_t c = 0; c < lab.count(); ++c)
        if (has_free[c] && fixed[c] == 0) free_clusters.push_back(c);
      const std::size_t f = free_clusters.size();
      const double share = w / static_cast<double>(std::uint64_t{1} << f);
      std::vector<int> cs = fixed;
      for (std::uint64_t col = 0; col < (std::uint64_t{1} << f); ++col) {
        for (std::size_t i = 0; i < f; ++i) cs[free_clusters[i]] = (col >> i) & 1 ? 1 : -1;
        std::uint64_t y = 0;
        for (std::uint32_t v = 0; v < n; ++v)
          if (cs[lab.label[v]] > 0) y |= std::uint64_t{1} << v;
        pushed[y] += gibbs.pi.prob[x] * share;
      }
    }
  }
  double worst = 0;
  for (std::size_t y = 0; y < states; ++y) worst = std::max(worst, std::abs(pushed[y] - gibbs.pi.prob[y]));
  return worst;
}

ExactLaw es_composed_law(const Graph& g, const ModelParams& params, const BoundaryPartition& xi, ColoringMode mode) {
  const std::size_t n = g.num_free();
  require_cap(n, kEnumerationCap, "es_composed_law");
  const std::size_t m = g.num_edges();
  require_cap(m, kESIdentityEdgeCap, "es_composed_law");
  const auto rc = enumerate_rc(g, RCParams::from(params), xi);
  ExactLaw law;
  law.prob.assign(std::size_t{1} << n, 0.0);
  for (std::uint64_t w = 0; w < rc.size(); ++w) {
    const auto lab = label_components(g, decode_bonds(w, m), xi);
    const auto forced = forced_clusters(lab, mode);
    std::vector<int> free_count(lab.count(), 0);
    for (std::uint32_t v = 0; v < n; ++v) ++free_count[lab.label[v]];
    std::vector<std::uint32_t> open_clusters;
    std::vector<int> weights;
    long long base = 0;
    for (std::uint32_t c = 0; c < lab.count(); ++c) {
      if (free_count[c] == 0) continue;
      if (forced[c]) {
        base += free_count[c];
      } else {
        open_clusters.push_back(c);
        weights.push_back(free_count[c]);
      }
    }
    const std::size_t k = open_clusters.size();
    double mass = 1.0;
    if (mode == ColoringMode::conditional_positive) mass = positive_mass(weights, base);
    const double share = rc.prob[w] / (static_cast<double>(std::uint64_t{1} << k) * mass);
    std::vector<int> cs(lab.count(), 1);
    for (std::uint64_t col = 0; col < (std::uint64_t{1} << k); ++col) {
      long long mag = base;
      for (std::size_t i = 0; i < k; ++i) {
        cs[open_clusters[i]] = (col >> i) & 1 ? 1 : -1;
        mag += cs[open_clusters[i]] * weights[i];
      }
      if (mode == ColoringMode::conditional_positive && mag < 0) continue;
      std::uint64_t y = 0;
      for (std::uint32_t v = 0; v < n; ++v)
        if (cs[lab.label[v]] > 0) y |= std::uint64_t{1} << v;
      law.prob[y] += share;
    }
  }
  return law;
}

ExactLaw es_composed_law_by_spins(const Graph& g, const ModelParams& params, const BoundaryPartition& xi,
                                  ColoringMode mode) {
  const std::size_t n = g.num_free();
  require_cap(n, kEnumerationCap, "es_composed_law_by_spins");
  const std::size_t m = g.num_edges();
  require_cap(m, kESIdentityEdgeCap, "es_composed_law_by_spins");
  const RCParams rp = RCParams::from(params);
  // Normalizing constant of the RC measure, summed directly.
  double z = 0;
  for (std::uint64_t w = 0; w < (std::uint64_t{1} << m); ++w) z += std::exp(rc_log_weight(g, decode_bonds(w, m), rp, xi));
  ExactLaw law;
  law.prob.assign(std::size_t{1} << n, 0.0);
  for (std::uint64_t x = 0; x < law.size(); ++x) {
    const SpinConfig sigma = decode_spins(x, n);
    if (mode == ColoringMode::conditional_positive && sigma.magnetization() < 0) continue;
    // Bond sets compatible with sigma avoid free edges whose endpoints
    // disagree. Edges into the boundary are kept and settled by the cluster
    // check below.
    std::vector<std::size_t> agree;
    for (std::size_t e = 0; e < m; ++e) {
      const auto& ed = g.edge(e);
      const bool bu = g.is_boundary(ed.u);
      const bool bv = g.is_boundary(ed.v);
      if (!bu && !bv) {
        if (sigma[ed.u] == sigma[ed.v]) agree.push_back(e);
      } else {
        agree.push_back(e);
      }
    }
    for (std::uint64_t sub = 0; sub < (std::uint64_t{1} << agree.size()); ++sub) {
      BondConfig omega(m);
      for (std::size_t i = 0; i < agree.size(); ++i)
        if ((sub >> i) & 1) omega.set(agree[i], true);
      const auto lab = label_components(g, omega, xi);
      // sigma must be constant on each cluster's free vertices.
      std::vector<int> color(lab.count(), 0);
      bool ok = true;
      for (std::uint32_t v = 0; v < n && ok; ++v) {
        auto& c = color[lab.label[v]];
        if (c == 0)
          c = sigma[v];
        else if (c != sigma[v])
          ok = false;
      }
      if (!ok) continue;
      const auto forced = forced_clusters(lab, mode);
      int free_clusters = 0;
      std::vector<int> weights;
      long long base = 0;
      for (std::uint32_t c = 0; c < lab.count(); ++c) {
        if (color[c] == 0) continue;
        if (forced[c]) {
          if (color[c] < 0) ok = false;
          std::uint32_t cnt = 0;
          for (std::uint32_t v = 0; v < n; ++v) cnt += lab.label[v] == c;
          base += cnt;
        } else {
          ++free_clusters;
          int cnt = 0;
          for (std::uint32_t v = 0; v < n; ++v) cnt += lab.label[v] == c;
          weights.push_back(cnt);
        }
      }
      if (!ok) continue;
      double pr = std::exp(rc_log_weight(g, omega, rp, xi)) / z;
      pr /= static_cast<double>(std::uint64_t{1} << free_clusters);
      if (mode == ColoringMode::conditional_positive) pr /= positive_mass(weights, base);
      law.prob[x] += pr;
    }
  }
  return law;
}

ESIdentityReport check_es_identity(const Graph& g, const ModelParams& params, ColoringMode mode) {
  require_cap(g.num_edges(), kESIdentityEdgeCap, "check_es_identity");
  if (mode == ColoringMode::plus_boundary) {
    if (g.num_boundary() == 0) throw std::invalid_argument("plus-boundary identity needs a graph boundary");
    const auto gibbs = enumerate_gibbs(g, params, SpinBoundary::uniform(g, 1));
    const auto es = es_composed_law(g, params, BoundaryPartition::wired(g), mode);
    return {tv_distance(es, gibbs.pi), gibbs.zero_atom};
  }
  const Graph h = g.num_boundary() > 0 ? without_boundary(g) : g;
  const auto gibbs = enumerate_gibbs(h, params);
  const auto es = es_composed_law(h, params, BoundaryPartition::free(h), mode);
  const auto& target = mode == ColoringMode::free_uniform ? gibbs.pi : gibbs.pi_plus;
  return {tv_distance(es, target), gibbs.zero_atom};
}

std::string to_json(const std::vector<OracleReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports)
    arr.push_back({{"instance", r.instance},
                   {"check", r.check},
                   {"max_violation", r.max_violation},
                   {"tolerance", r.tolerance},
                   {"pass", r.pass}});
  return arr.dump(2);
}

std::vector<OracleInstance> oracle_instances() {
  std::vector<OracleInstance> out;
  out.push_back({"path5", Graph::general(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}), {}});
  out.push_back({"cycle5", Graph::general(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}}), {}});
  out.push_back({"triangle", Graph::general(3, {{0, 1}, {1, 2}, {0, 2}}), {}});
  out.push_back({"K4", Graph::general(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}), {}});
  Graph box = Graph::grid_box(2, 2);
  SpinBoundary bc = SpinBoundary::uniform(box, 1);
  out.push_back({"box2x2", std::move(box), std::move(bc)});
  return out;
}

std::vector<OracleReport> run_oracle_suite(const std::string& suite, const std::vector<double>& betas) {
  constexpr double tol = 1e-12;
  std::vector<OracleReport> out;
  for (const auto& inst : oracle_instances()) {
    for (double beta : betas) {
      const ModelParams mp{beta};
      const std::string tag = inst.name + "@beta=" + std::to_string(beta);
      if (suite == "detailed-balance") {
        const auto gibbs = enumerate_gibbs(inst.graph, mp, inst.bc);
        const double plain = check_detailed_balance(inst.graph, mp, inst.bc, ChainMode::plain, gibbs.pi);
        out.push_back({tag, "plain-vs-pi", plain, tol, plain <= tol});
        if (inst.bc.empty()) {
          const double r =
              check_detailed_balance(inst.graph, mp, inst.bc, ChainMode::restricted_plus, gibbs.pi_plus);
          out.push_back({tag, "restricted-plus-vs-pi-hat", r, tol, r <= tol});
          const double rm =
              check_detailed_balance(inst.graph, mp, inst.bc, ChainMode::restricted_minus, gibbs.pi_minus);
          out.push_back({tag, "restricted-minus-vs-pi-check", rm, tol, rm <= tol});
        } else {
          // Plus boundary: the restricted chain is still reversible w.r.t.
          // the conditioned law.
          const double r =
              check_detailed_balance(inst.graph, mp, inst.bc, ChainMode::restricted_plus, gibbs.pi_plus);
          out.push_back({tag, "restricted-plus-vs-pi-hat", r, tol, r <= tol});
        }
      } else if (suite == "es-identity") {
        if (inst.bc.empty()) {
          const auto f = check_es_identity(inst.graph, mp, ColoringMode::free_uniform);
          out.push_back({tag, "free-uniform", f.tv, tol, f.tv <= tol});
        } else {
          const auto f = check_es_identity(inst.graph, mp, ColoringMode::free_uniform);
          out.push_back({tag, "free-uniform(boundary released)", f.tv, tol, f.tv <= tol});
          const auto pb = check_es_identity(inst.graph, mp, ColoringMode::plus_boundary);
          out.push_back({tag, "plus-boundary", pb.tv, tol, pb.tv <= tol});
        }
      } else if (suite == "sw-stationarity") {
        const double v = check_sw_stationarity(inst.graph, mp, inst.bc);
        out.push_back({tag, "sw-invariance", v, tol, v <= tol});
      } else {
        throw std::invalid_argument("unknown oracle suite '" + suite + "'");
      }
    }
  }
  return out;
}

}  // namespace phasemix
