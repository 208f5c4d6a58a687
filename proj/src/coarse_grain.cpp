#include "phasemix/coarse_grain.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <set>

#include "phasemix/union_find.hpp"

namespace phasemix {

namespace {

struct BlockTemplate {
  std::size_t count = 0;
  std::vector<std::vector<int>> offsets;
  std::vector<std::pair<std::uint16_t, std::uint16_t>> edges;  // canonical (lexicographic) order
  std::vector<std::uint16_t> faces;
};

BlockTemplate make_template(int d, int k) {
  BlockTemplate t;
  const int w = 2 * k + 1;
  t.count = 1;
  for (int i = 0; i < d; ++i) t.count *= static_cast<std::size_t>(w);
  if (t.count > 65535) throw CoarseGrainError("block too large");
  std::vector<std::size_t> stride(d, 1);
  for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * w;
  std::vector<int> c(d, -k);
  for (std::size_t a = 0; a < t.count; ++a) {
    t.offsets.push_back(c);
    std::uint16_t mask = 0;
    for (int i = 0; i < d; ++i) {
      if (c[i] == -k) mask |= static_cast<std::uint16_t>(1u << (2 * i));
      if (c[i] == k) mask |= static_cast<std::uint16_t>(1u << (2 * i + 1));
    }
    t.faces.push_back(mask);
    for (int i = d - 1; i >= 0; --i) {
      if (++c[i] <= k) break;
      c[i] = -k;
    }
  }
  // Larger strides come first in lexicographic order for a fixed lower end.
  for (std::size_t a = 0; a < t.count; ++a)
    for (int i = d - 1; i >= 0; --i)
      if (t.offsets[a][i] < k)
        t.edges.emplace_back(static_cast<std::uint16_t>(a), static_cast<std::uint16_t>(a + stride[i]));
  return t;
}

bool good_local(std::size_t count, std::span<const std::pair<std::uint16_t, std::uint16_t>> edges,
                std::span<const std::uint8_t> open, std::span<const std::uint16_t> faces, int d, int k) {
  DisjointSets ds(count);
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (open[i]) ds.unite(edges[i].first, edges[i].second);
  std::vector<std::uint16_t> mask(count, 0);
  for (std::uint32_t a = 0; a < count; ++a) mask[ds.find(a)] |= faces[a];
  const auto full = static_cast<std::uint16_t>((1u << (2 * d)) - 1);
  int large = 0;
  bool spans = false;
  for (std::uint32_t a = 0; a < count; ++a) {
    if (ds.find(a) != a) continue;
    if (ds.set_size(a) >= static_cast<std::uint32_t>(k)) ++large;
    if (mask[a] == full) spans = true;
  }
  return large <= 1 && spans;
}

const BlockTemplate& cached_template(int d, int k) {
  static thread_local std::vector<std::pair<std::pair<int, int>, BlockTemplate>> cache;
  for (auto& [key, t] : cache)
    if (key == std::make_pair(d, k)) return t;
  cache.emplace_back(std::make_pair(d, k), make_template(d, k));
  return cache.back().second;
}

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

bool k_good(const BondConfig& omega_block, int d, int k) {
  const auto& t = cached_template(d, k);
  if (omega_block.size() != t.edges.size())
    throw CoarseGrainError("block configuration has " + std::to_string(omega_block.size()) + " edges, expected " +
                           std::to_string(t.edges.size()));
  return good_local(t.count, t.edges, omega_block.bits(), t.faces, d, k);
}

std::size_t block_edge_count(int d, int k) { return cached_template(d, k).edges.size(); }

BlockGrid::BlockGrid(const Graph& g, int k) : graph_(&g), k_(k), dim_(g.dim()), periodic_(false) {
  if (k < 1) throw CoarseGrainError("block scale k must be >= 1");
  if (g.kind() == GraphKind::torus) {
    const int n = g.side();
    if (n % k != 0) throw CoarseGrainError("torus side must be a multiple of k");
    if (n < 2 * k + 2) throw CoarseGrainError("blocks would wrap onto themselves");
    periodic_ = true;
    for (int x = 0; x < n; x += k) axis_.push_back(x);
  } else if (g.kind() == GraphKind::box && g.centred_box()) {
    const int r = g.side() - k;
    if (r < 0) throw CoarseGrainError("box half-side must be >= k");
    std::set<int> pts{-r, r};
    for (int x = -(r / k) * k; x <= r; x += k) pts.insert(x);
    axis_.assign(pts.begin(), pts.end());
  } else {
    throw CoarseGrainError("block grids need a torus or a centred box");
  }
  num_centres_ = 1;
  for (int i = 0; i < dim_; ++i) num_centres_ *= axis_.size();

  const auto& t = cached_template(dim_, k);
  faces_ = t.faces;
  vertices_.resize(num_centres_);
  edges_.resize(num_centres_);
  norm_.resize(num_centres_);
  std::vector<int> w(dim_);
  for (std::size_t c = 0; c < num_centres_; ++c) {
    const auto x = centre_coords(c);
    int nrm = 0;
    for (int i = 0; i < dim_; ++i) nrm = std::max(nrm, periodic_ ? std::min(x[i], g.side() - x[i]) : std::abs(x[i]));
    norm_[c] = nrm;
    auto& verts = vertices_[c];
    verts.reserve(t.count);
    for (const auto& off : t.offsets) {
      for (int i = 0; i < dim_; ++i) w[i] = x[i] + off[i];
      const long v = g.vertex_at(w);
      if (v < 0 || g.is_boundary(static_cast<std::uint32_t>(v))) throw CoarseGrainError("block leaves the free sites");
      verts.push_back(static_cast<std::uint32_t>(v));
    }
    auto& es = edges_[c];
    es.reserve(t.edges.size());
    for (auto& [a, b] : t.edges) {
      const long e = g.find_edge(verts[a], verts[b]);
      if (e < 0) throw CoarseGrainError("block edge missing from graph");
      es.push_back(static_cast<std::uint32_t>(e));
    }
  }
}

std::vector<int> BlockGrid::centre_index(std::size_t c) const {
  std::vector<int> idx(dim_);
  const auto len = axis_.size();
  for (int i = dim_ - 1; i >= 0; --i) {
    idx[i] = static_cast<int>(c % len);
    c /= len;
  }
  return idx;
}

std::vector<int> BlockGrid::centre_coords(std::size_t c) const {
  auto idx = centre_index(c);
  for (auto& x : idx) x = axis_[x];
  return idx;
}

std::size_t BlockGrid::centre_from_index(std::span<const int> idx) const {
  std::size_t c = 0;
  for (int x : idx) c = c * axis_.size() + static_cast<std::size_t>(x);
  return c;
}

bool BlockGrid::on_outer_ring(std::size_t c) const {
  if (periodic_) return false;
  const auto idx = centre_index(c);
  const int last = static_cast<int>(axis_.size()) - 1;
  return std::any_of(idx.begin(), idx.end(), [&](int x) { return x == 0 || x == last; });
}

std::vector<std::size_t> BlockGrid::neighbours(std::size_t c, Adjacency adj) const {
  const auto idx = centre_index(c);
  const int len = static_cast<int>(axis_.size());
  std::vector<std::size_t> out;
  std::vector<int> w(dim_);
  auto add = [&](const std::vector<int>& delta) {
    for (int i = 0; i < dim_; ++i) {
      w[i] = idx[i] + delta[i];
      if (periodic_) {
        w[i] = (w[i] + len) % len;
      } else if (w[i] < 0 || w[i] >= len) {
        return;
      }
    }
    out.push_back(centre_from_index(w));
  };
  std::vector<int> delta(dim_, 0);
  if (adj == Adjacency::k_adjacent) {
    for (int i = 0; i < dim_; ++i)
      for (int s : {-1, 1}) {
        delta[i] = s;
        add(delta);
        delta[i] = 0;
      }
  } else {
    std::fill(delta.begin(), delta.end(), -1);
    for (;;) {
      if (std::any_of(delta.begin(), delta.end(), [](int x) { return x != 0; })) add(delta);
      int i = dim_ - 1;
      while (i >= 0 && delta[i] == 1) delta[i--] = -1;
      if (i < 0) break;
      ++delta[i];
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool BlockGrid::good(std::size_t c, const BondConfig& omega) const {
  const auto& es = edges_[c];
  std::vector<std::uint8_t> open(es.size());
  for (std::size_t i = 0; i < es.size(); ++i) open[i] = omega.is_open(es[i]) ? 1 : 0;
  const auto& t = cached_template(dim_, k_);
  return good_local(vertices_[c].size(), t.edges, open, faces_, dim_, k_);
}

bool BlockGrid::very_good(std::size_t c, const BondConfig& omega, const BondConfig& omega_prime) const {
  for (auto e : edges_[c])
    if (omega.is_open(e) != omega_prime.is_open(e)) return false;
  return good(c, omega);
}

std::size_t CoarseField::count_open() const {
  return static_cast<std::size_t>(std::count(value.begin(), value.end(), std::uint8_t{1}));
}

CoarseField coarse_field(const BlockGrid& grid, const BondConfig& omega) {
  CoarseField f{grid.k(), grid.dim(), grid.axis_len(), std::vector<std::uint8_t>(grid.num_centres())};
  for (std::size_t c = 0; c < grid.num_centres(); ++c) f.value[c] = grid.good(c, omega) ? 1 : 0;
  return f;
}

CoarseField coarse_field(const BlockGrid& grid, const BondConfig& omega, const BondConfig& omega_prime) {
  CoarseField f{grid.k(), grid.dim(), grid.axis_len(), std::vector<std::uint8_t>(grid.num_centres())};
  for (std::size_t c = 0; c < grid.num_centres(); ++c) f.value[c] = grid.very_good(c, omega, omega_prime) ? 1 : 0;
  return f;
}

void write_field(std::ostream& out, const CoarseField& field) {
  out << field.k << ' ' << field.d << ' ' << field.side << '\n';
  for (std::size_t i = 0; i < field.value.size(); ++i) {
    out << static_cast<int>(field.value[i]);
    if ((i + 1) % field.side == 0) out << '\n';
  }
}

CoarseField read_field(std::istream& in) {
  CoarseField f;
  if (!(in >> f.k >> f.d >> f.side) || f.d < 1 || f.side == 0) throw CoarseGrainError("bad field header");
  std::size_t n = 1;
  for (int i = 0; i < f.d; ++i) n *= f.side;
  f.value.reserve(n);
  char ch;
  while (f.value.size() < n && in >> ch) {
    if (ch != '0' && ch != '1') throw CoarseGrainError(std::string("bad field character '") + ch + "'");
    f.value.push_back(static_cast<std::uint8_t>(ch - '0'));
  }
  if (f.value.size() != n) throw CoarseGrainError("field is truncated");
  return f;
}

long FieldClusters::largest() const {
  if (sizes.empty()) return -1;
  return static_cast<long>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
}

FieldClusters field_clusters(const BlockGrid& grid, const CoarseField& field, Adjacency adj, bool open) {
  const std::size_t n = grid.num_centres();
  if (field.value.size() != n) throw CoarseGrainError("field does not match the block grid");
  const std::uint8_t want = open ? 1 : 0;
  DisjointSets ds(n);
  for (std::size_t c = 0; c < n; ++c) {
    if (field.value[c] != want) continue;
    for (auto nb : grid.neighbours(c, adj))
      if (field.value[nb] == want) ds.unite(static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(nb));
  }
  FieldClusters fc;
  fc.label.assign(n, -1);
  std::vector<long> id(n, -1);
  for (std::size_t c = 0; c < n; ++c) {
    if (field.value[c] != want) continue;
    const auto r = ds.find(static_cast<std::uint32_t>(c));
    if (id[r] < 0) {
      id[r] = static_cast<long>(fc.sizes.size());
      fc.sizes.push_back(0);
    }
    fc.label[c] = id[r];
    ++fc.sizes[id[r]];
  }
  return fc;
}

namespace {

struct Exterior {
  std::vector<std::uint8_t> in_d;
  std::vector<long> parent;  // BFS tree inside D; -1 at ring roots
  std::vector<std::size_t> order;
};

// D: closed centres star-joined to a virtual closed layer outside the ring.
Exterior grow_exterior(const BlockGrid& grid, const CoarseField& field) {
  const std::size_t n = grid.num_centres();
  Exterior ex{std::vector<std::uint8_t>(n, 0), std::vector<long>(n, -1), {}};
  std::deque<std::size_t> queue;
  for (std::size_t c = 0; c < n; ++c)
    if (grid.on_outer_ring(c) && field.value[c] == 0) {
      ex.in_d[c] = 1;
      queue.push_back(c);
    }
  while (!queue.empty()) {
    const auto c = queue.front();
    queue.pop_front();
    ex.order.push_back(c);
    for (auto nb : grid.neighbours(c, Adjacency::star))
      if (!ex.in_d[nb] && field.value[nb] == 0) {
        ex.in_d[nb] = 1;
        ex.parent[nb] = static_cast<long>(c);
        queue.push_back(nb);
      }
  }
  return ex;
}

}  // namespace

SurfaceResult outermost_surface(const BlockGrid& grid, const CoarseField& field) {
  if (grid.periodic()) throw CoarseGrainError("separating surfaces need a box");
  const std::size_t n = grid.num_centres();
  if (field.value.size() != n) throw CoarseGrainError("field does not match the block grid");
  const auto ex = grow_exterior(grid, field);
  SurfaceResult res;
  std::vector<std::uint8_t> in_gamma(n, 0);
  for (std::size_t c = 0; c < n; ++c) {
    if (ex.in_d[c]) {
      res.exterior.push_back(c);
      continue;
    }
    bool g = grid.on_outer_ring(c);
    if (!g)
      for (auto nb : grid.neighbours(c, Adjacency::star))
        if (ex.in_d[nb]) {
          g = true;
          break;
        }
    if (g) {
      in_gamma[c] = 1;
      res.gamma.push_back(c);
    } else {
      res.interior.push_back(c);
    }
  }
  const Graph& g = grid.graph();
  std::vector<std::uint8_t> mark(g.num_vertices(), 0);  // 1 gamma, 2 exterior
  for (auto c : res.gamma)
    for (auto v : grid.block_vertices(c)) mark[v] = 1;
  for (auto c : res.exterior)
    for (auto v : grid.block_vertices(c))
      if (mark[v] == 0) mark[v] = 2;
  for (std::uint32_t v = 0; v < g.num_vertices(); ++v) {
    if (mark[v] == 1)
      res.gamma_vertices.push_back(v);
    else if (mark[v] == 2 || g.is_boundary(v))
      res.ext_vertices.push_back(v);
    else
      res.int_vertices.push_back(v);
  }
  return res;
}

SurfaceResult find_separating_surface(const BlockGrid& grid, const CoarseField& field, int l) {
  if (grid.periodic()) throw CoarseGrainError("separating surfaces need a box");
  const int m = grid.graph().side();
  const int k = grid.k();
  if (l < 0 || l >= m - 2 * k)
    throw CoarseGrainError("malformed annulus: need 0 <= l < m - 2k (l=" + std::to_string(l) +
                           ", m=" + std::to_string(m) + ", k=" + std::to_string(k) + ")");
  auto res = outermost_surface(grid, field);
  const auto ex = grow_exterior(grid, field);
  res.exists = true;
  for (auto c : ex.order)
    if (grid.centre_norm(c) <= l + k) {
      res.exists = false;
      for (long x = static_cast<long>(c); x >= 0; x = ex.parent[x]) res.witness.push_back(static_cast<std::size_t>(x));
      std::reverse(res.witness.begin(), res.witness.end());
      break;
    }
  return res;
}

std::vector<std::size_t> region_centres(const BlockGrid& grid, std::span<const std::uint32_t> region) {
  std::vector<std::uint8_t> in(grid.graph().num_vertices(), 0);
  for (auto v : region) in[v] = 1;
  std::vector<std::size_t> out;
  std::vector<int> x;
  for (std::size_t c = 0; c < grid.num_centres(); ++c) {
    x = grid.centre_coords(c);
    const long v = grid.graph().vertex_at(x);
    if (v >= 0 && in[v]) out.push_back(c);
  }
  return out;
}

std::vector<std::size_t> region_centre_boundary(const BlockGrid& grid, std::span<const std::uint32_t> region) {
  const auto inside = region_centres(grid, region);
  std::vector<std::uint8_t> in(grid.num_centres(), 0);
  for (auto c : inside) in[c] = 1;
  const std::size_t full = grid.periodic() ? 0 : 2 * static_cast<std::size_t>(grid.dim());
  std::vector<std::size_t> out;
  for (auto c : inside) {
    const auto nbs = grid.neighbours(c, Adjacency::k_adjacent);
    bool edge = !grid.periodic() && nbs.size() < full;
    for (auto nb : nbs) edge = edge || !in[nb];
    if (edge) out.push_back(c);
  }
  return out;
}

namespace {

// Largest omega-component on the union of the blocks of `centres`, using
// only edges inside some block. Returns one of its vertices and its size.
std::pair<std::uint32_t, std::size_t> largest_on_union(const BlockGrid& grid, const BondConfig& omega,
                                                       const std::vector<std::size_t>& centres,
                                                       std::size_t min_size, std::size_t* count_at_least) {
  const Graph& g = grid.graph();
  std::vector<long> local(g.num_vertices(), -1);
  std::vector<std::uint32_t> verts;
  for (auto c : centres)
    for (auto v : grid.block_vertices(c))
      if (local[v] < 0) {
        local[v] = static_cast<long>(verts.size());
        verts.push_back(v);
      }
  DisjointSets ds(verts.size());
  for (auto c : centres)
    for (auto e : grid.block_edges(c))
      if (omega.is_open(e))
        ds.unite(static_cast<std::uint32_t>(local[g.edge(e).u]), static_cast<std::uint32_t>(local[g.edge(e).v]));
  std::pair<std::uint32_t, std::size_t> best{0, 0};
  std::size_t big = 0;
  for (std::uint32_t i = 0; i < verts.size(); ++i) {
    if (ds.find(i) != i) continue;
    const std::size_t s = ds.set_size(i);
    if (s >= min_size) ++big;
    if (s > best.second) best = {verts[i], s};
  }
  if (count_at_least) *count_at_least = big;
  return best;
}

std::vector<std::vector<std::size_t>> cluster_members(const FieldClusters& fc) {
  std::vector<std::vector<std::size_t>> members(fc.count());
  for (std::size_t c = 0; c < fc.label.size(); ++c)
    if (fc.label[c] >= 0) members[fc.label[c]].push_back(c);
  return members;
}

}  // namespace

bool classify_E_mA(const BlockGrid& grid, const BondConfig& omega, std::span<const std::uint32_t> region) {
  if (grid.periodic()) throw CoarseGrainError("E_{m,A} is defined on a box");
  const Graph& g = grid.graph();
  const auto field = coarse_field(grid, omega);
  const auto fc = field_clusters(grid, field, Adjacency::k_adjacent);
  const auto inner = region_centre_boundary(grid, region);
  std::vector<std::uint8_t> touches_inner(fc.count(), 0), touches_outer(fc.count(), 0);
  for (auto c : inner)
    if (fc.label[c] >= 0) touches_inner[fc.label[c]] = 1;
  for (std::size_t c = 0; c < grid.num_centres(); ++c)
    if (fc.label[c] >= 0 && grid.on_outer_ring(c)) touches_outer[fc.label[c]] = 1;
  const auto members = cluster_members(fc);
  std::optional<ComponentLabeling> full;
  for (std::size_t id = 0; id < fc.count(); ++id) {
    if (!touches_inner[id] || !touches_outer[id]) continue;
    const auto [v, size] = largest_on_union(grid, omega, members[id], 1, nullptr);
    if (!full) full = label_components(g, omega, BoundaryPartition::free(g));
    if (size > 0 && full->touches_boundary[full->label[v]]) return true;
  }
  return false;
}

ThetaEvent classify_E_m_theta(const BlockGrid& grid, const BondConfig& omega, double theta,
                              std::span<const std::uint32_t> region) {
  if (!grid.periodic()) throw CoarseGrainError("E^theta_{m,A} is defined on a torus");
  const int m = grid.graph().side() / 2;
  const auto field = coarse_field(grid, omega);
  const auto fc = field_clusters(grid, field, Adjacency::k_adjacent);
  ThetaEvent ev;
  const double cutoff = static_cast<double>(m) / (4.0 * grid.k());
  for (auto s : fc.sizes) {
    if (static_cast<double>(s) > cutoff) ++ev.large_clusters;
    ev.largest = std::max(ev.largest, s);
  }
  const bool big_enough = static_cast<double>(ev.largest) >= theta * static_cast<double>(grid.num_centres());
  ev.path = true;
  if (!region.empty()) {
    ev.path = false;
    const long top = fc.largest();
    if (top >= 0) {
      bool inner = false, outer = false;
      for (auto c : region_centre_boundary(grid, region)) inner = inner || fc.label[c] == top;
      for (std::size_t c = 0; c < grid.num_centres(); ++c)
        outer = outer || (fc.label[c] == top && grid.centre_norm(c) >= m - grid.k());
      ev.path = inner && outer;
    }
  }
  ev.holds = ev.large_clusters <= 1 && big_enough && ev.path;
  return ev;
}

ClusterCheck check_good_cluster_uniqueness(const BlockGrid& grid, const BondConfig& omega, const CoarseField& field) {
  const auto fc = field_clusters(grid, field, Adjacency::k_adjacent);
  ClusterCheck out;
  for (const auto& members : cluster_members(fc)) {
    std::size_t big = 0;
    largest_on_union(grid, omega, members, static_cast<std::size_t>(grid.k()), &big);
    ++out.clusters;
    if (big != 1) ++out.violations;
  }
  return out;
}

std::string to_string(ConditionalBackend b) {
  switch (b) {
    case ConditionalBackend::automatic: return "auto";
    case ConditionalBackend::enumeration: return "enumeration";
    case ConditionalBackend::cftp: return "cftp";
    case ConditionalBackend::mcmc: return "mcmc";
  }
  return "auto";
}

ConditionalBackend parse_backend(const std::string& name) {
  for (auto b : {ConditionalBackend::automatic, ConditionalBackend::enumeration, ConditionalBackend::cftp,
                 ConditionalBackend::mcmc})
    if (to_string(b) == name) return b;
  throw std::invalid_argument("unknown conditional backend '" + name + "'");
}

namespace {

std::vector<double> completion_log_weights(const Graph& g, const RCParams& params, const BoundaryPartition& xi,
                                           BondConfig omega, std::span<const std::uint32_t> free_edges) {
  const std::size_t u = free_edges.size();
  std::vector<double> lw(std::size_t{1} << u);
  const double lp = std::log(params.p), lq = std::log1p(-params.p), lqq = std::log(params.q);
  DisjointSets ds;
  for (std::size_t x = 0; x < lw.size(); ++x) {
    int open = 0;
    for (std::size_t j = 0; j < u; ++j) {
      const bool o = (x >> j) & 1;
      omega.set(free_edges[j], o);
      open += o;
    }
    ds.reset(g.num_vertices());
    std::size_t comps = g.num_vertices();
    for (std::size_t e = 0; e < g.num_edges(); ++e)
      if (omega.is_open(e) && ds.unite(g.edge(e).u, g.edge(e).v)) --comps;
    for (const auto& b : xi.blocks())
      for (std::size_t i = 1; i < b.size(); ++i)
        if (ds.unite(b[0], b[i])) --comps;
    lw[x] = open * lp + static_cast<double>(u - open) * lq + static_cast<double>(comps) * lqq;
  }
  return lw;
}

void sample_enumeration(const Graph& g, const RCParams& params, const BoundaryPartition& xi,
                        const BoundaryPartition& xi_prime, BondConfig& omega, BondConfig& omega_prime,
                        std::span<const std::uint32_t> free_edges, Rng& rng) {
  auto wa = completion_log_weights(g, params, xi, omega, free_edges);
  auto wb = completion_log_weights(g, params, xi_prime, omega_prime, free_edges);
  for (auto* w : {&wa, &wb}) {
    const double top = *std::max_element(w->begin(), w->end());
    for (auto& x : *w) x = std::exp(x - top);
  }
  std::size_t pa = 0, pb = 0;  // decided low bits
  for (std::size_t j = 0; j < free_edges.size(); ++j) {
    const std::size_t low = (std::size_t{1} << j) - 1;
    double ta = 0, oa = 0, tb = 0, ob = 0;
    for (std::size_t x = 0; x < wa.size(); ++x) {
      if ((x & low) == pa) {
        ta += wa[x];
        if ((x >> j) & 1) oa += wa[x];
      }
      if ((x & low) == pb) {
        tb += wb[x];
        if ((x >> j) & 1) ob += wb[x];
      }
    }
    const double u = rng.uniform();
    if (u < oa / ta) pa |= std::size_t{1} << j;
    if (u < ob / tb) pb |= std::size_t{1} << j;
  }
  for (std::size_t j = 0; j < free_edges.size(); ++j) {
    omega.set(free_edges[j], (pa >> j) & 1);
    omega_prime.set(free_edges[j], (pb >> j) & 1);
  }
}

struct Update {
  std::uint32_t slot;
  double u;
};

void apply_update(const Graph& g, const RCParams& params, ConnectivityProbe& probe, BondConfig& w,
                  std::span<const std::uint32_t> free_edges, const Update& up) {
  const auto e = free_edges[up.slot];
  const auto& ed = g.edge(e);
  const bool conn = probe.connected(w, ed.u, ed.v, static_cast<long>(e));
  w.set(e, up.u < rc_open_prob(conn, params));
}

}  // namespace

ConditionalBackend PairSampler::sample(const Graph& g, const RCParams& params, const BoundaryPartition& xi,
                                       const BoundaryPartition& xi_prime, BondConfig& omega,
                                       BondConfig& omega_prime, std::span<const std::uint32_t> unrevealed,
                                       Rng& rng) const {
  if (unrevealed.empty()) return ConditionalBackend::enumeration;
  if (params.q < 1) throw std::invalid_argument("monotone coupling needs q >= 1");
  ConditionalBackend use = backend;
  if (use == ConditionalBackend::automatic)
    use = unrevealed.size() <= enumeration_cap ? ConditionalBackend::enumeration : ConditionalBackend::cftp;
  if (use == ConditionalBackend::enumeration) {
    if (unrevealed.size() > enumeration_cap)
      throw CoarseGrainError("enumeration backend capped at " + std::to_string(enumeration_cap) + " edges");
    sample_enumeration(g, params, xi, xi_prime, omega, omega_prime, unrevealed, rng);
    return use;
  }
  ConnectivityProbe probe_a(g, xi), probe_b(g, xi_prime);
  const std::size_t u = unrevealed.size();
  auto draw = [&] { return Update{static_cast<std::uint32_t>(rng.uniform_index(u)), rng.uniform()}; };
  if (use == ConditionalBackend::mcmc) {
    for (auto e : unrevealed) {
      omega.set(e, true);
      omega_prime.set(e, true);
    }
    for (std::size_t t = 0; t < mcmc_sweeps * u; ++t) {
      const auto up = draw();
      apply_update(g, params, probe_a, omega, unrevealed, up);
      apply_update(g, params, probe_b, omega_prime, unrevealed, up);
    }
    return use;
  }
  // Monotone coupling from the past: updates[t] acts at time -(t+1) and is
  // reused when the start time is pushed back.
  std::vector<Update> updates;
  std::size_t horizon = u;
  for (;;) {
    while (updates.size() < horizon) updates.push_back(draw());
    BondConfig top_a = omega, bot_a = omega, top_b = omega_prime, bot_b = omega_prime;
    for (auto e : unrevealed) {
      top_a.set(e, true);
      bot_a.set(e, false);
      top_b.set(e, true);
      bot_b.set(e, false);
    }
    for (std::size_t t = horizon; t-- > 0;) {
      apply_update(g, params, probe_a, top_a, unrevealed, updates[t]);
      apply_update(g, params, probe_a, bot_a, unrevealed, updates[t]);
      apply_update(g, params, probe_b, top_b, unrevealed, updates[t]);
      apply_update(g, params, probe_b, bot_b, unrevealed, updates[t]);
    }
    if (top_a == bot_a && top_b == bot_b) {
      omega = std::move(top_a);
      omega_prime = std::move(top_b);
      return use;
    }
    if (horizon >= max_cftp_sweeps * u) throw CoarseGrainError("coupling from the past did not coalesce");
    horizon *= 2;
  }
}

InducedPartition induced_partition(const Graph& g, const BondConfig& omega, const BoundaryPartition& xi,
                                   std::span<const std::uint32_t> inner) {
  std::vector<std::uint8_t> in(g.num_vertices(), 0), rim(g.num_vertices(), 0);
  for (auto v : inner) in[v] = 1;
  DisjointSets ds(g.num_vertices());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edge(e);
    if (in[ed.u] != in[ed.v]) rim[in[ed.u] ? ed.v : ed.u] = 1;
    if (omega.is_open(e) && !in[ed.u] && !in[ed.v]) ds.unite(ed.u, ed.v);
  }
  xi.wire(ds);
  InducedPartition out;
  std::vector<long> first(g.num_vertices(), -1);
  for (std::uint32_t v = 0; v < g.num_vertices(); ++v) {
    if (!rim[v]) continue;
    const auto r = ds.find(v);
    if (first[r] < 0) first[r] = static_cast<long>(out.rim.size());
    out.label.push_back(first[r]);
    out.rim.push_back(v);
  }
  return out;
}

RevealResult reveal_coupling(const BlockGrid& grid, const RCParams& params, const BoundaryPartition& xi,
                             const BoundaryPartition& xi_prime, std::uint64_t seed, const PairSampler& sampler) {
  if (grid.periodic()) throw CoarseGrainError("the revealing coupling runs on a box");
  const Graph& g = grid.graph();
  const int m = g.side();
  const std::size_t n = grid.num_centres();
  RevealResult res;
  res.omega = BondConfig(g.num_edges());
  res.omega_prime = BondConfig(g.num_edges());
  std::vector<std::uint8_t> revealed(g.num_edges(), 0), queued(n, 0), done(n, 0);
  std::deque<std::size_t> frontier;
  for (std::size_t c = 0; c < n; ++c)
    if (grid.on_outer_ring(c)) {
      frontier.push_back(c);
      queued[c] = 1;
    }
  Rng rng(seed);
  auto count = [&](ConditionalBackend b) {
    if (b == ConditionalBackend::enumeration) ++res.enumeration_steps;
    if (b == ConditionalBackend::cftp) ++res.cftp_steps;
    if (b == ConditionalBackend::mcmc) {
      ++res.mcmc_steps;
      res.approximate = true;
    }
  };
  std::vector<std::uint32_t> unrevealed;
  auto collect = [&] {
    unrevealed.clear();
    for (std::uint32_t e = 0; e < g.num_edges(); ++e)
      if (!revealed[e]) unrevealed.push_back(e);
  };
  while (!frontier.empty()) {
    const auto c = frontier.front();
    frontier.pop_front();
    done[c] = 1;
    res.processed.push_back(c);
    bool fresh = false;
    for (auto e : grid.block_edges(c)) fresh = fresh || !revealed[e];
    if (fresh) {
      collect();
      BondConfig a = res.omega, b = res.omega_prime;
      count(sampler.sample(g, params, xi, xi_prime, a, b, unrevealed, rng));
      for (auto e : grid.block_edges(c))
        if (!revealed[e]) {
          res.omega.set(e, a.is_open(e));
          res.omega_prime.set(e, b.is_open(e));
          revealed[e] = 1;
        }
    }
    const bool vg = grid.very_good(c, res.omega, res.omega_prime);
    res.very_good.push_back(vg ? 1 : 0);
    if (!vg)
      for (auto nb : grid.neighbours(c, Adjacency::star))
        if (!done[nb] && !queued[nb]) {
          queued[nb] = 1;
          frontier.push_back(nb);
        }
  }
  // The rest is drawn once from the xi-conditional and copied.
  collect();
  if (!unrevealed.empty()) {
    BondConfig a = res.omega, b = res.omega;
    count(sampler.sample(g, params, xi, xi, a, b, unrevealed, rng));
    for (auto e : unrevealed) {
      res.omega.set(e, a.is_open(e));
      res.omega_prime.set(e, a.is_open(e));
    }
  }

  res.success = std::all_of(res.processed.begin(), res.processed.end(),
                            [&](std::size_t c) { return 2 * grid.centre_norm(c) > m; });
  res.surface = outermost_surface(grid, coarse_field(grid, res.omega, res.omega_prime));
  std::vector<std::size_t> good, bad;
  for (std::size_t i = 0; i < res.processed.size(); ++i)
    (res.very_good[i] ? good : bad).push_back(res.processed[i]);
  res.surface_matches = sorted(good) == res.surface.gamma && sorted(bad) == res.surface.exterior;
  if (res.success) {
    std::vector<std::uint8_t> in_int(g.num_vertices(), 0);
    for (auto v : res.surface.int_vertices) in_int[v] = 1;
    res.interior_agree = true;
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
      const auto& ed = g.edge(e);
      if ((in_int[ed.u] || in_int[ed.v]) && res.omega.is_open(e) != res.omega_prime.is_open(e))
        res.interior_agree = false;
    }
    const auto a = induced_partition(g, res.omega, xi, res.surface.int_vertices);
    const auto b = induced_partition(g, res.omega_prime, xi_prime, res.surface.int_vertices);
    res.partitions_agree = a.label == b.label;
  }
  return res;
}

}  // namespace phasemix
