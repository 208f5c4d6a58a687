#include "phasemix/graph.hpp"

#include <algorithm>
#include <bit>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>

#include "phasemix/rng.hpp"
#include "phasemix/union_find.hpp"

namespace phasemix {

std::string to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::torus: return "torus";
    case GraphKind::box: return "box";
    case GraphKind::general: return "general";
  }
  return "general";
}

namespace {

std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

// Advance a coordinate odometer over [lo, hi]^d, last coordinate fastest.
bool next_coords(std::vector<int>& c, int lo, int hi) {
  for (int i = static_cast<int>(c.size()) - 1; i >= 0; --i) {
    if (c[i] < hi) {
      ++c[i];
      return true;
    }
    c[i] = lo;
  }
  return false;
}

}  // namespace

Graph Graph::torus(int d, int n) {
  if (d < 2) throw GeometryError("torus requires dimension d >= 2, got " + std::to_string(d));
  if (n < 3) throw GeometryError("torus requires side n >= 3 (parallel edges otherwise), got " + std::to_string(n));
  Graph g;
  g.kind_ = GraphKind::torus;
  g.dim_ = d;
  g.side_ = n;
  g.lo_ = 0;
  g.hi_ = n - 1;
  const std::size_t count = ipow(static_cast<std::size_t>(n), d);
  g.num_free_ = count;
  g.num_vertices_ = count;
  g.coords_.resize(count * d);
  std::vector<int> c(d, 0);
  for (std::size_t v = 0; v < count; ++v) {
    std::copy(c.begin(), c.end(), g.coords_.begin() + static_cast<std::ptrdiff_t>(v * d));
    next_coords(c, 0, n - 1);
  }
  g.lookup_lo_ = 0;
  g.lookup_extent_ = n;
  g.lookup_.resize(count);
  std::iota(g.lookup_.begin(), g.lookup_.end(), std::int64_t{0});

  g.edges_.reserve(count * d);
  std::vector<int> w(d);
  for (std::uint32_t v = 0; v < count; ++v) {
    auto cv = g.coords(v);
    for (int i = 0; i < d; ++i) {
      std::copy(cv.begin(), cv.end(), w.begin());
      w[i] = (w[i] + 1) % n;
      auto u = static_cast<std::uint32_t>(g.vertex_at(w));
      g.edges_.push_back({std::min(u, v), std::max(u, v)});
    }
  }
  g.finalize();
  return g;
}

Graph Graph::box(int d, int m) {
  if (d < 1) throw GeometryError("box requires dimension d >= 1");
  if (m < 0) throw GeometryError("box requires half-side m >= 0");
  Graph g = grid_box(d, 2 * m + 1);
  // Shift coordinates so the free region is [-m, m]^d.
  for (auto& x : g.coords_) x -= m;
  g.lo_ = -m;
  g.hi_ = m;
  g.lookup_lo_ -= m;
  g.side_ = m;
  g.centred_ = true;
  return g;
}

Graph Graph::grid_box(int d, int side) {
  if (d < 1) throw GeometryError("box requires dimension d >= 1");
  if (side < 1) throw GeometryError("box requires side >= 1");
  Graph g;
  g.kind_ = GraphKind::box;
  g.dim_ = d;
  g.side_ = side;
  g.lo_ = 0;
  g.hi_ = side - 1;
  const int outer_lo = -1;
  const int outer_hi = side;
  const int extent = side + 2;
  g.lookup_lo_ = outer_lo;
  g.lookup_extent_ = extent;
  g.lookup_.assign(ipow(static_cast<std::size_t>(extent), d), -1);

  const std::size_t free_count = ipow(static_cast<std::size_t>(side), d);
  const std::size_t total = ipow(static_cast<std::size_t>(extent), d);
  g.num_free_ = free_count;
  g.num_vertices_ = total;
  g.coords_.resize(total * d);

  auto lookup_index = [&](const std::vector<int>& c) {
    std::size_t idx = 0;
    for (int x : c) idx = idx * extent + static_cast<std::size_t>(x - outer_lo);
    return idx;
  };
  std::uint32_t next_free = 0;
  auto next_ring = static_cast<std::uint32_t>(free_count);
  std::vector<int> c(d, outer_lo);
  do {
    const bool inside = std::all_of(c.begin(), c.end(), [&](int x) { return x >= 0 && x < side; });
    const std::uint32_t v = inside ? next_free++ : next_ring++;
    std::copy(c.begin(), c.end(), g.coords_.begin() + static_cast<std::ptrdiff_t>(std::size_t{v} * d));
    g.lookup_[lookup_index(c)] = v;
  } while (next_coords(c, outer_lo, outer_hi));

  std::vector<int> w(d);
  for (std::uint32_t v = 0; v < total; ++v) {
    auto cv = g.coords(v);
    for (int i = 0; i < d; ++i) {
      std::copy(cv.begin(), cv.end(), w.begin());
      ++w[i];
      const long u = g.vertex_at(w);
      if (u < 0) continue;
      const auto uu = static_cast<std::uint32_t>(u);
      if (g.is_boundary(v) && g.is_boundary(uu)) continue;
      g.edges_.push_back({std::min(uu, v), std::max(uu, v)});
    }
  }
  g.finalize();
  return g;
}

Graph Graph::general(std::size_t num_vertices, std::vector<Edge> edges, std::size_t num_boundary) {
  if (num_boundary > num_vertices) throw GeometryError("boundary larger than vertex set");
  Graph g;
  g.kind_ = GraphKind::general;
  g.num_vertices_ = num_vertices;
  g.num_free_ = num_vertices - num_boundary;
  for (auto& e : edges) {
    if (e.u >= num_vertices || e.v >= num_vertices) throw GeometryError("edge endpoint out of range");
    if (e.u == e.v) throw GeometryError("self-loop in general graph");
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  g.edges_ = std::move(edges);
  g.finalize();
  if (std::adjacent_find(g.edges_.begin(), g.edges_.end()) != g.edges_.end())
    throw GeometryError("parallel edge in general graph");
  return g;
}

void Graph::finalize() {
  std::sort(edges_.begin(), edges_.end());
  std::vector<std::size_t> deg(num_vertices_, 0);
  for (const auto& e : edges_) {
    ++deg[e.u];
    ++deg[e.v];
  }
  offsets_.assign(num_vertices_ + 1, 0);
  for (std::size_t v = 0; v < num_vertices_; ++v) offsets_[v + 1] = offsets_[v] + deg[v];
  adj_.resize(offsets_.back());
  inc_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::uint32_t i = 0; i < edges_.size(); ++i) {
    const auto& e = edges_[i];
    adj_[fill[e.u]] = e.v;
    inc_[fill[e.u]++] = i;
    adj_[fill[e.v]] = e.u;
    inc_[fill[e.v]++] = i;
  }
  max_degree_ = deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
}

long Graph::vertex_at(std::span<const int> c) const {
  if (coords_.empty() || static_cast<int>(c.size()) != dim_) return -1;
  std::size_t idx = 0;
  for (int x : c) {
    int local = x - lookup_lo_;
    if (kind_ == GraphKind::torus) {
      local %= lookup_extent_;
      if (local < 0) local += lookup_extent_;
    } else if (local < 0 || local >= lookup_extent_) {
      return -1;
    }
    idx = idx * lookup_extent_ + static_cast<std::size_t>(local);
  }
  return static_cast<long>(lookup_[idx]);
}

int Graph::linf_distance(std::uint32_t a, std::uint32_t b) const {
  auto ca = coords(a);
  auto cb = coords(b);
  int best = 0;
  for (int i = 0; i < dim_; ++i) {
    int diff = std::abs(ca[i] - cb[i]);
    if (kind_ == GraphKind::torus) diff = std::min(diff, side_ - diff);
    best = std::max(best, diff);
  }
  return best;
}

int Graph::l1_distance(std::uint32_t a, std::uint32_t b) const {
  auto ca = coords(a);
  auto cb = coords(b);
  int total = 0;
  for (int i = 0; i < dim_; ++i) {
    int diff = std::abs(ca[i] - cb[i]);
    if (kind_ == GraphKind::torus) diff = std::min(diff, side_ - diff);
    total += diff;
  }
  return total;
}

long Graph::find_edge(std::uint32_t a, std::uint32_t b) const {
  auto nb = neighbors(a);
  auto inc = incident_edges(a);
  for (std::size_t i = 0; i < nb.size(); ++i)
    if (nb[i] == b) return static_cast<long>(inc[i]);
  return -1;
}

Graph random_regular(const RegularGraphSpec& spec) {
  const std::size_t n = spec.num_vertices;
  const auto delta = static_cast<std::size_t>(spec.degree);
  if (spec.degree < 1) throw GeometryError("regular graph requires degree >= 1");
  if ((n * delta) % 2 != 0)
    throw GeometryError("parity error: N * Delta must be even (N=" + std::to_string(n) +
                        ", Delta=" + std::to_string(delta) + ")");
  if (delta >= n) throw GeometryError("regular graph requires Delta < N");

  Rng rng(spec.seed);
  std::vector<std::uint32_t> stubs(n * delta);
  std::vector<Edge> edges;
  std::set<Edge> seen;
  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    for (std::size_t i = 0; i < stubs.size(); ++i) stubs[i] = static_cast<std::uint32_t>(i / delta);
    for (std::size_t i = stubs.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_index(i));
      std::swap(stubs[i - 1], stubs[j]);
    }
    edges.clear();
    seen.clear();
    bool simple = true;
    for (std::size_t i = 0; i < stubs.size(); i += 2) {
      const std::uint32_t a = std::min(stubs[i], stubs[i + 1]);
      const std::uint32_t b = std::max(stubs[i], stubs[i + 1]);
      if (a == b || !seen.insert({a, b}).second) {
        simple = false;
        break;
      }
      edges.push_back({a, b});
    }
    if (simple) return Graph::general(n, std::move(edges));
  }
  throw GeometryError("configuration model exceeded retry cap of " + std::to_string(spec.max_attempts));
}

BallView ball(const Graph& g, std::uint32_t v, int r) {
  if (r < 0) throw GeometryError("ball radius must be nonnegative");
  if (v >= g.num_vertices()) throw GeometryError("ball center out of range");
  BallView view{v, r, g.has_coords() ? BallMetric::linf : BallMetric::graph_distance, {}, {}};
  std::vector<std::uint8_t> inside(g.num_vertices(), 0);
  if (g.has_coords()) {
    if (g.kind() == GraphKind::torus && 2 * r + 1 >= g.side())
      throw GeometryError("wrap error: ball of radius " + std::to_string(r) + " wraps a torus of side " +
                          std::to_string(g.side()));
    for (std::uint32_t w = 0; w < g.num_vertices(); ++w) {
      if (g.linf_distance(v, w) <= r) {
        inside[w] = 1;
        view.interior.push_back(w);
      }
    }
  } else {
    std::vector<int> dist(g.num_vertices(), -1);
    std::queue<std::uint32_t> q;
    dist[v] = 0;
    q.push(v);
    while (!q.empty()) {
      const auto x = q.front();
      q.pop();
      inside[x] = 1;
      view.interior.push_back(x);
      if (dist[x] == r) continue;
      for (auto y : g.neighbors(x)) {
        if (dist[y] < 0) {
          dist[y] = dist[x] + 1;
          q.push(y);
        }
      }
    }
    std::sort(view.interior.begin(), view.interior.end());
  }
  for (auto x : view.interior)
    for (auto y : g.neighbors(x))
      if (!inside[y]) {
        inside[y] = 2;
        view.boundary.push_back(y);
      }
  std::sort(view.boundary.begin(), view.boundary.end());
  return view;
}

Subgraph subgraph_with_boundary(const Graph& g, const BallView& view) {
  std::vector<long> local(g.num_vertices(), -1);
  Subgraph sub;
  for (auto x : view.interior) {
    local[x] = static_cast<long>(sub.to_parent.size());
    sub.to_parent.push_back(x);
  }
  for (auto x : view.boundary) {
    local[x] = static_cast<long>(sub.to_parent.size());
    sub.to_parent.push_back(x);
  }
  std::vector<Edge> edges;
  for (const auto& e : g.edges()) {
    const long a = local[e.u];
    const long b = local[e.v];
    if (a < 0 || b < 0) continue;
    const auto nint = static_cast<long>(view.interior.size());
    if (a >= nint && b >= nint) continue;
    edges.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)});
  }
  sub.graph = Graph::general(sub.to_parent.size(), std::move(edges), view.boundary.size());
  return sub;
}

Rational edge_expansion_exact(const Graph& g) {
  const std::size_t n = g.num_vertices();
  if (n > 24) throw GeometryError("edge_expansion_exact: size cap exceeded (N=" + std::to_string(n) + " > 24)");
  if (n < 2) throw GeometryError("edge_expansion_exact: need at least two vertices");
  std::vector<std::uint32_t> adj(n, 0);
  for (const auto& e : g.edges()) {
    adj[e.u] |= 1u << e.v;
    adj[e.v] |= 1u << e.u;
  }
  const std::size_t half = n / 2;
  std::uint32_t set = 0;
  std::int64_t cut = 0;
  std::size_t size = 0;
  Rational best{-1, 1};
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t i = 1; i < total; ++i) {
    const int v = std::countr_zero(i);
    const std::uint32_t bit = 1u << v;
    const auto deg = static_cast<std::int64_t>(std::popcount(adj[v]));
    if (set & bit) {
      set &= ~bit;
      --size;
      cut -= deg - 2 * std::popcount(adj[v] & set);
    } else {
      cut += deg - 2 * std::popcount(adj[v] & set);
      set |= bit;
      ++size;
    }
    if (size == 0 || size > half) continue;
    const auto s = static_cast<std::int64_t>(size);
    if (best.num < 0 || cut * best.den < best.num * s) best = {cut, s};
  }
  const std::int64_t d = std::gcd(best.num, best.den);
  if (d > 1) best = {best.num / d, best.den / d};
  if (best.num == 0) best.den = 1;
  return best;
}

int tree_like_defect(const Graph& g, std::uint32_t v, int r) {
  const BallView view = ball(g, v, r);
  std::vector<long> local(g.num_vertices(), -1);
  for (std::size_t i = 0; i < view.interior.size(); ++i) local[view.interior[i]] = static_cast<long>(i);
  DisjointSets ds(view.interior.size());
  std::size_t edges = 0;
  std::size_t components = view.interior.size();
  for (const auto& e : g.edges()) {
    if (local[e.u] < 0 || local[e.v] < 0) continue;
    ++edges;
    if (ds.unite(static_cast<std::uint32_t>(local[e.u]), static_cast<std::uint32_t>(local[e.v]))) --components;
  }
  return static_cast<int>(edges + components) - static_cast<int>(view.interior.size());
}

void write_edge_list(std::ostream& out, const Graph& g) {
  const std::size_t n = g.kind() == GraphKind::general ? g.num_vertices() : g.num_free();
  out << to_string(g.kind()) << ' ' << g.dim() << ' ' << g.side() << ' ' << n << '\n';
  for (const auto& e : g.edges()) out << e.u << ' ' << e.v << '\n';
}

Graph read_edge_list(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw GeometryError("edge list: missing header");
  std::istringstream hs(header);
  std::string kind;
  int d = 0;
  int n = 0;
  std::size_t count = 0;
  if (!(hs >> kind >> d >> n >> count)) throw GeometryError("edge list: malformed header '" + header + "'");
  std::vector<Edge> edges;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  while (in >> a >> b) edges.push_back({std::min(a, b), std::max(a, b)});

  Graph g;
  if (kind == "torus") {
    g = Graph::torus(d, n);
  } else if (kind == "box") {
    if (count == ipow(static_cast<std::size_t>(2 * n + 1), d))
      g = Graph::box(d, n);
    else if (count == ipow(static_cast<std::size_t>(n), d))
      g = Graph::grid_box(d, n);
    else
      throw GeometryError("edge list: box header does not match any box geometry");
  } else if (kind == "general") {
    return Graph::general(count, std::move(edges));
  } else {
    throw GeometryError("edge list: unknown kind '" + kind + "'");
  }
  std::sort(edges.begin(), edges.end());
  if (!std::equal(edges.begin(), edges.end(), g.edges().begin(), g.edges().end()))
    throw GeometryError("edge list: edges do not match the " + kind + " geometry in the header");
  return g;
}

}  // namespace phasemix
