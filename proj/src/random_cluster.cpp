#include "phasemix/random_cluster.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

namespace phasemix {

BoundaryPartition BoundaryPartition::wired(const Graph& g) {
  BoundaryPartition xi;
  if (g.num_boundary() > 0) {
    xi.blocks_.emplace_back();
    for (auto v = static_cast<std::uint32_t>(g.num_free()); v < g.num_vertices(); ++v) xi.blocks_[0].push_back(v);
  }
  xi.index(g);
  return xi;
}

BoundaryPartition BoundaryPartition::free(const Graph& g) {
  BoundaryPartition xi;
  for (auto v = static_cast<std::uint32_t>(g.num_free()); v < g.num_vertices(); ++v) xi.blocks_.push_back({v});
  xi.index(g);
  return xi;
}

BoundaryPartition BoundaryPartition::from_blocks(const Graph& g, std::vector<std::vector<std::uint32_t>> blocks) {
  BoundaryPartition xi;
  xi.blocks_ = std::move(blocks);
  std::erase_if(xi.blocks_, [](const auto& b) { return b.empty(); });
  for (auto& b : xi.blocks_) std::sort(b.begin(), b.end());
  std::sort(xi.blocks_.begin(), xi.blocks_.end());
  xi.index(g);
  return xi;
}

BoundaryPartition BoundaryPartition::from_labels(const Graph& g, const std::vector<std::int64_t>& labels) {
  if (labels.size() != g.num_boundary()) throw std::invalid_argument("partition labels must cover the boundary");
  std::map<std::int64_t, std::vector<std::uint32_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i)
    groups[labels[i]].push_back(static_cast<std::uint32_t>(g.num_free() + i));
  std::vector<std::vector<std::uint32_t>> blocks;
  for (auto& [_, b] : groups) blocks.push_back(std::move(b));
  return from_blocks(g, std::move(blocks));
}

void BoundaryPartition::index(const Graph& g) {
  block_index_.assign(g.num_boundary(), -1);
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    for (auto v : blocks_[b]) {
      if (!g.is_boundary(v) || v >= g.num_vertices())
        throw std::invalid_argument("partition block holds non-boundary vertex " + std::to_string(v));
      auto& slot = block_index_[v - g.num_free()];
      if (slot >= 0) throw std::invalid_argument("partition blocks overlap at vertex " + std::to_string(v));
      slot = static_cast<long>(b);
    }
  for (auto s : block_index_)
    if (s < 0) throw std::invalid_argument("partition does not cover the boundary");
}

void BoundaryPartition::wire(DisjointSets& ds) const {
  for (const auto& b : blocks_)
    for (std::size_t i = 1; i < b.size(); ++i) ds.unite(b[0], b[i]);
}

std::uint32_t ComponentLabeling::largest() const {
  std::uint32_t best = 0;
  for (std::uint32_t c = 1; c < sizes.size(); ++c)
    if (sizes[c] > sizes[best] || (sizes[c] == sizes[best] && min_vertex[c] < min_vertex[best])) best = c;
  return best;
}

ComponentLabeling label_components(const Graph& g, const BondConfig& omega, const BoundaryPartition& xi) {
  const std::size_t n = g.num_vertices();
  DisjointSets ds(n);
  for (std::size_t e = 0; e < g.num_edges(); ++e)
    if (omega.is_open(e)) ds.unite(g.edge(e).u, g.edge(e).v);
  xi.wire(ds);
  ComponentLabeling lab;
  lab.label.assign(n, 0);
  std::vector<long> id(n, -1);
  // Vertices are visited in index order, so min_vertex is the first one seen.
  for (std::uint32_t v = 0; v < n; ++v) {
    const auto r = ds.find(v);
    if (id[r] < 0) {
      id[r] = static_cast<long>(lab.sizes.size());
      lab.sizes.push_back(0);
      lab.touches_boundary.push_back(0);
      lab.min_vertex.push_back(v);
    }
    const auto c = static_cast<std::uint32_t>(id[r]);
    lab.label[v] = c;
    ++lab.sizes[c];
    if (g.is_boundary(v)) lab.touches_boundary[c] = 1;
  }
  return lab;
}

double rc_log_weight(const Graph& g, const BondConfig& omega, const RCParams& params, const BoundaryPartition& xi) {
  if (!(params.p > 0 && params.p < 1)) throw std::invalid_argument("rc_log_weight needs p in (0, 1)");
  const auto open = static_cast<double>(omega.num_open());
  const auto closed = static_cast<double>(g.num_edges()) - open;
  const auto comps = static_cast<double>(label_components(g, omega, xi).count());
  return open * std::log(params.p) + closed * std::log1p(-params.p) + comps * std::log(params.q);
}

ConnectivityProbe::ConnectivityProbe(const Graph& g, const BoundaryPartition& xi)
    : graph_(&g), xi_(&xi), seen_(g.num_vertices(), 0), block_seen_(xi.num_blocks(), 0) {
  queue_.reserve(g.num_vertices());
}

bool ConnectivityProbe::connected(const BondConfig& omega, std::uint32_t u, std::uint32_t v, long skip) {
  if (u == v) return true;
  const Graph& g = *graph_;
  if (++stamp_ == 0) {
    std::fill(seen_.begin(), seen_.end(), 0);
    std::fill(block_seen_.begin(), block_seen_.end(), 0);
    stamp_ = 1;
  }
  queue_.clear();
  queue_.push_back(u);
  seen_[u] = stamp_;
  for (std::size_t head = 0; head < queue_.size(); ++head) {
    const auto x = queue_[head];
    const long b = xi_->block_of(g, x);
    if (b >= 0 && block_seen_[b] != stamp_) {
      block_seen_[b] = stamp_;
      for (auto y : xi_->blocks()[b]) {
        if (seen_[y] == stamp_) continue;
        if (y == v) return true;
        seen_[y] = stamp_;
        queue_.push_back(y);
      }
    }
    auto nb = g.neighbors(x);
    auto inc = g.incident_edges(x);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      const auto y = nb[i];
      if (static_cast<long>(inc[i]) == skip || !omega.is_open(inc[i]) || seen_[y] == stamp_) continue;
      if (y == v) return true;
      seen_[y] = stamp_;
      queue_.push_back(y);
    }
  }
  return false;
}

bool connected_without(const Graph& g, const BondConfig& omega, const BoundaryPartition& xi, std::uint32_t u,
                       std::uint32_t v, long skip) {
  ConnectivityProbe probe(g, xi);
  return probe.connected(omega, u, v, skip);
}

double rc_edge_conditional(const Graph& g, std::size_t e, const BondConfig& omega, const RCParams& params,
                           const BoundaryPartition& xi) {
  const auto& ed = g.edge(e);
  return rc_open_prob(connected_without(g, omega, xi, ed.u, ed.v, static_cast<long>(e)), params);
}

RCGlauberStats rc_glauber_run(const Graph& g, BondConfig& omega, EventStream& stream, double t_max,
                              const RCParams& params, const BoundaryPartition& xi,
                              const std::vector<std::uint32_t>& updatable) {
  RCGlauberStats stats;
  const std::size_t m = updatable.empty() ? g.num_edges() : updatable.size();
  if (stream.num_sites() != m) throw std::invalid_argument("bond stream must be sized to the updatable edges");
  DisjointSets ds(g.num_vertices());
  bool exact = false;  // ds matches omega exactly
  std::uint64_t since_relabel = 0;
  auto relabel = [&] {
    ds.reset(g.num_vertices());
    for (std::size_t e = 0; e < g.num_edges(); ++e)
      if (omega.is_open(e)) ds.unite(g.edge(e).u, g.edge(e).v);
    xi.wire(ds);
    exact = true;
    since_relabel = 0;
    ++stats.relabels;
  };
  relabel();
  ConnectivityProbe probe(g, xi);
  while (stream.peek().time <= t_max) {
    const Event ev = stream.next();
    ++stats.events;
    if (++since_relabel >= m && !exact) relabel();
    const std::size_t e = updatable.empty() ? ev.site : updatable[ev.site];
    const auto& ed = g.edge(e);
    bool conn;
    if (exact && !omega.is_open(e)) {
      conn = ds.same(ed.u, ed.v);
    } else {
      conn = probe.connected(omega, ed.u, ed.v, static_cast<long>(e));
      ++stats.searches;
    }
    const bool open = ev.uniform < rc_open_prob(conn, params);
    if (open == omega.is_open(e)) continue;
    omega.set(e, open);
    if (open) {
      ds.unite(ed.u, ed.v);
    } else if (exact && !conn) {
      exact = false;  // a bridge closed, ds now overstates connectivity
    }
  }
  return stats;
}

SwendsenWang::SwendsenWang(const Graph& g, ModelParams params, SpinBoundary bc)
    : graph_(&g), params_(params), bc_(std::move(bc)), ds_(g.num_vertices()), cluster_spin_(g.num_vertices()) {
  if (bc_.empty() && g.num_boundary() > 0) throw std::invalid_argument("graph has a boundary but no spins were given");
  if (!bc_.empty()) bc_.validate(g);
}

void SwendsenWang::step(SpinConfig& sigma, Rng& rng, BondConfig* omega) {
  const Graph& g = *graph_;
  const double p = params_.p();
  ds_.reset(g.num_vertices());
  if (omega) *omega = BondConfig(g.num_edges());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edge(e);
    if (spin_at(g, sigma, bc_, ed.u) != spin_at(g, sigma, bc_, ed.v)) continue;
    if (!rng.bernoulli(p)) continue;
    ds_.unite(ed.u, ed.v);
    if (omega) omega->set(e, true);
  }
  std::fill(cluster_spin_.begin(), cluster_spin_.end(), std::int8_t{0});
  for (auto v = static_cast<std::uint32_t>(g.num_free()); v < g.num_vertices(); ++v)
    cluster_spin_[ds_.find(v)] = bc_.at(g, v);
  for (std::uint32_t v = 0; v < g.num_free(); ++v) {
    auto& s = cluster_spin_[ds_.find(v)];
    if (s == 0) s = static_cast<std::int8_t>(rng.fair_sign());
    sigma.set(v, s);
  }
}

SWResult swendsen_wang_step(const Graph& g, const SpinConfig& sigma, const ModelParams& params, Rng& rng,
                            const SpinBoundary& bc) {
  SwendsenWang sw(g, params, bc);
  SWResult out{BondConfig(g.num_edges()), sigma};
  sw.step(out.sigma, rng, &out.omega);
  return out;
}

std::string to_string(ColoringMode mode) {
  switch (mode) {
    case ColoringMode::free_uniform: return "free-uniform";
    case ColoringMode::plus_boundary: return "plus-boundary";
    case ColoringMode::largest_plus: return "largest-plus";
    case ColoringMode::conditional_positive: return "conditional-positive";
  }
  return "?";
}

ColoringMode parse_coloring_mode(const std::string& name) {
  for (auto m : {ColoringMode::free_uniform, ColoringMode::plus_boundary, ColoringMode::largest_plus,
                 ColoringMode::conditional_positive})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown coloring mode '" + name + "'");
}

SpinConfig es_color(const Graph& g, const BondConfig& omega, ColoringMode mode, const BoundaryPartition& xi, Rng& rng,
                    std::uint64_t* attempts) {
  if (mode == ColoringMode::plus_boundary && g.num_boundary() == 0)
    throw std::invalid_argument("plus-boundary coloring needs a graph boundary");
  const auto lab = label_components(g, omega, xi);
  std::vector<std::int8_t> cs(lab.count());
  std::vector<std::int8_t> out(g.num_free());
  std::uint64_t tries = 0;
  while (true) {
    ++tries;
    for (auto& c : cs) c = static_cast<std::int8_t>(rng.fair_sign());
    if (mode == ColoringMode::plus_boundary) {
      for (std::size_t c = 0; c < cs.size(); ++c)
        if (lab.touches_boundary[c]) cs[c] = 1;
    } else if (mode == ColoringMode::largest_plus) {
      cs[lab.largest()] = 1;
    }
    long long m = 0;
    for (std::uint32_t v = 0; v < g.num_free(); ++v) {
      out[v] = cs[lab.label[v]];
      m += out[v];
    }
    if (mode != ColoringMode::conditional_positive || m >= 0) break;
  }
  if (attempts) *attempts = tries;
  return SpinConfig(std::move(out));
}

namespace {

std::vector<std::int8_t> color_with_coins(const Graph& g, const ComponentLabeling& lab, ForcedCluster forced,
                                          const std::vector<std::int8_t>& coins) {
  std::vector<std::int8_t> cs(lab.count());
  for (std::size_t c = 0; c < cs.size(); ++c) cs[c] = coins[lab.min_vertex[c]];
  if (forced == ForcedCluster::boundary) {
    for (std::size_t c = 0; c < cs.size(); ++c)
      if (lab.touches_boundary[c]) cs[c] = 1;
  } else if (forced == ForcedCluster::largest) {
    cs[lab.largest()] = 1;
  }
  std::vector<std::int8_t> out(g.num_free());
  for (std::uint32_t v = 0; v < g.num_free(); ++v) out[v] = cs[lab.label[v]];
  return out;
}

}  // namespace

SharedColoring shared_enumeration_color(const Graph& g, const BondConfig& omega, const BoundaryPartition& xi,
                                        ForcedCluster forced, const BondConfig& omega_prime,
                                        const BoundaryPartition& xi_prime, ForcedCluster forced_prime, Rng& rng,
                                        const std::vector<std::uint32_t>& region) {
  std::vector<std::int8_t> coins(g.num_vertices());
  for (auto& c : coins) c = static_cast<std::int8_t>(rng.fair_sign());
  SharedColoring out{SpinConfig(color_with_coins(g, label_components(g, omega, xi), forced, coins)),
                     SpinConfig(color_with_coins(g, label_components(g, omega_prime, xi_prime), forced_prime, coins)),
                     {}};
  auto check = [&](std::uint32_t v) {
    if (out.sigma[v] != out.sigma_prime[v]) out.disagreement.push_back(v);
  };
  if (region.empty()) {
    for (std::uint32_t v = 0; v < g.num_free(); ++v) check(v);
  } else {
    for (auto v : region) check(v);
  }
  return out;
}

void write_bonds(std::ostream& out, const BondConfig& omega) {
  out << omega.size() << ' ' << omega.num_open() << '\n';
  for (auto b : omega.bits()) out.put(b ? '1' : '0');
  out.put('\n');
}

BondConfig read_bonds(std::istream& in) {
  std::size_t n = 0;
  std::size_t k = 0;
  if (!(in >> n >> k)) throw std::invalid_argument("bond config: malformed header");
  in >> std::ws;
  BondConfig omega(n);
  for (std::size_t e = 0; e < n; ++e) {
    const int c = in.get();
    if (c != '0' && c != '1') throw std::invalid_argument("bond config: expected 0/1 at position " + std::to_string(e));
    omega.set(e, c == '1');
  }
  if (omega.num_open() != k) throw std::invalid_argument("bond config: header open count mismatch");
  return omega;
}

void write_partition(std::ostream& out, const BoundaryPartition& xi) {
  for (const auto& b : xi.blocks()) {
    for (std::size_t i = 0; i < b.size(); ++i) out << (i ? " " : "") << b[i];
    out << '\n';
  }
}

}  // namespace phasemix
