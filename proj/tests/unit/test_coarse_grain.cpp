#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "phasemix/coarse_grain.hpp"
#include "phasemix/oracle.hpp"

using namespace phasemix;

namespace {

int wrap_offset(int a, int x, const Graph& g) {
  int d = a - x;
  if (g.kind() == GraphKind::torus) {
    const int n = g.side();
    d = ((d % n) + n) % n;
    if (d > n / 2) d -= n;
  }
  return d;
}

// Goodness straight from the definition, using lattice coordinates only.
bool brute_good(const Graph& g, const BondConfig& omega, const std::vector<int>& x, int k) {
  std::vector<std::uint32_t> verts;
  std::map<std::uint32_t, std::vector<int>> off;
  for (std::uint32_t v = 0; v < g.num_free(); ++v) {
    auto c = g.coords(v);
    std::vector<int> o(g.dim());
    bool in = true;
    for (int i = 0; i < g.dim(); ++i) {
      o[i] = wrap_offset(c[i], x[i], g);
      in = in && std::abs(o[i]) <= k;
    }
    if (in) {
      verts.push_back(v);
      off[v] = o;
    }
  }
  std::set<std::uint32_t> seen;
  int large = 0;
  bool spans = false;
  for (auto s : verts) {
    if (seen.count(s)) continue;
    std::vector<std::uint32_t> stack{s}, comp;
    seen.insert(s);
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      auto nb = g.neighbors(v);
      auto inc = g.incident_edges(v);
      for (std::size_t i = 0; i < nb.size(); ++i)
        if (omega.is_open(inc[i]) && off.count(nb[i]) && !seen.count(nb[i])) {
          seen.insert(nb[i]);
          stack.push_back(nb[i]);
        }
    }
    if (static_cast<int>(comp.size()) >= k) ++large;
    std::set<std::pair<int, int>> faces;
    for (auto v : comp)
      for (int i = 0; i < g.dim(); ++i)
        if (std::abs(off[v][i]) == k) faces.insert({i, off[v][i]});
    if (static_cast<int>(faces.size()) == 2 * g.dim()) spans = true;
  }
  return large <= 1 && spans;
}

BondConfig random_bonds(std::size_t m, double p, Rng& rng) {
  BondConfig w(m);
  for (std::size_t e = 0; e < m; ++e) w.set(e, rng.bernoulli(p));
  return w;
}

// Reachability by transitive closure over closed centres: a different route
// from the breadth-first growth in the library.
bool surface_by_closure(const BlockGrid& grid, const CoarseField& f, int l) {
  const std::size_t n = grid.num_centres();
  std::vector<std::vector<char>> r(n, std::vector<char>(n, 0));
  for (std::size_t a = 0; a < n; ++a) {
    if (f.value[a]) continue;
    r[a][a] = 1;
    for (auto b : grid.neighbours(a, Adjacency::star))
      if (!f.value[b]) r[a][b] = 1;
  }
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t a = 0; a < n; ++a)
      if (r[a][c])
        for (std::size_t b = 0; b < n; ++b)
          if (r[c][b]) r[a][b] = 1;
  for (std::size_t a = 0; a < n; ++a) {
    if (f.value[a] || !grid.on_outer_ring(a)) continue;
    for (std::size_t b = 0; b < n; ++b)
      if (r[a][b] && grid.centre_norm(b) <= l + grid.k()) return false;
  }
  return true;
}

// Every star path leaving Int without crossing Gamma stays in Int and never
// reaches the outer ring.
bool interior_sealed(const BlockGrid& grid, const SurfaceResult& s) {
  std::vector<char> gamma(grid.num_centres(), 0), reach(grid.num_centres(), 0);
  for (auto c : s.gamma) gamma[c] = 1;
  std::vector<std::size_t> stack(s.interior.begin(), s.interior.end());
  for (auto c : stack) reach[c] = 1;
  while (!stack.empty()) {
    auto c = stack.back();
    stack.pop_back();
    if (grid.on_outer_ring(c)) return false;
    for (auto nb : grid.neighbours(c, Adjacency::star))
      if (!gamma[nb] && !reach[nb]) {
        reach[nb] = 1;
        stack.push_back(nb);
      }
  }
  for (auto c : s.exterior)
    if (reach[c]) return false;
  return true;
}

std::vector<std::uint32_t> linf_ball(const Graph& g, int r) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t v = 0; v < g.num_free(); ++v) {
    auto c = g.coords(v);
    bool in = true;
    for (int x : c) in = in && std::abs(g.kind() == GraphKind::torus ? wrap_offset(x, 0, g) : x) <= r;
    if (in) out.push_back(v);
  }
  return out;
}

}  // namespace

TEST_CASE("k_good on bare blocks") {
  for (int k : {1, 2, 3}) {
    const auto m = block_edge_count(2, k);
    CHECK(k_good(BondConfig(m, true), 2, k));
    CHECK_FALSE(k_good(BondConfig(m, false), 2, k));
  }
  CHECK(k_good(BondConfig(block_edge_count(3, 1), true), 3, 1));
  CHECK_FALSE(k_good(BondConfig(block_edge_count(3, 1), false), 3, 1));

  // d=2, k=2: rows 1 and 3 of the 5x5 block fully open, nothing else.
  std::vector<Edge> edges;
  for (std::uint32_t r = 0; r < 5; ++r)
    for (std::uint32_t c = 0; c < 5; ++c) {
      const auto v = r * 5 + c;
      if (c < 4) edges.push_back({v, v + 1});
      if (r < 4) edges.push_back({v, v + 5});
    }
  auto block = Graph::general(25, edges);
  REQUIRE(block.num_edges() == block_edge_count(2, 2));
  BondConfig two(block.num_edges());
  for (std::uint32_t r : {1u, 3u})
    for (std::uint32_t c = 0; c < 4; ++c) two.set(block.find_edge(r * 5 + c, r * 5 + c + 1), true);
  CHECK_FALSE(k_good(two, 2, 2));
  // A single spanning row still misses the top and bottom faces.
  BondConfig one(block.num_edges());
  for (std::uint32_t c = 0; c < 4; ++c) one.set(block.find_edge(5 + c, 6 + c), true);
  CHECK_FALSE(k_good(one, 2, 2));
  // A plus shape through the middle spans all four faces and is alone.
  BondConfig plus(block.num_edges());
  for (std::uint32_t c = 0; c < 4; ++c) plus.set(block.find_edge(10 + c, 11 + c), true);
  for (std::uint32_t r = 0; r < 4; ++r) plus.set(block.find_edge(r * 5 + 2, r * 5 + 7), true);
  CHECK(k_good(plus, 2, 2));
  // Adding a separate open pair of size 2 = k breaks condition (1).
  plus.set(block.find_edge(0, 1), true);
  CHECK_FALSE(k_good(plus, 2, 2));

  CHECK_THROWS_AS(k_good(BondConfig(3), 2, 2), CoarseGrainError);
}

TEST_CASE("block grid goodness matches a direct classifier") {
  Rng rng(11);
  auto t = Graph::torus(2, 12);
  for (int k : {2, 3}) {
    BlockGrid grid(t, k);
    CHECK(grid.num_centres() == static_cast<std::size_t>((12 / k) * (12 / k)));
    for (int rep = 0; rep < 6; ++rep) {
      auto w = random_bonds(t.num_edges(), 0.45 + 0.1 * rep, rng);
      for (std::size_t c = 0; c < grid.num_centres(); ++c) {
        const bool g = grid.good(c, w);
        CHECK(g == brute_good(t, w, grid.centre_coords(c), k));
        BondConfig local(grid.block_edges(c).size());
        for (std::size_t i = 0; i < local.size(); ++i) local.set(i, w.is_open(grid.block_edges(c)[i]));
        CHECK(k_good(local, 2, k) == g);
      }
    }
  }
  auto box = Graph::box(2, 7);
  BlockGrid bg(box, 3);
  CHECK(bg.axis() == std::vector<int>{-4, -3, 0, 3, 4});
  auto w = random_bonds(box.num_edges(), 0.7, rng);
  for (std::size_t c = 0; c < bg.num_centres(); ++c) CHECK(bg.good(c, w) == brute_good(box, w, bg.centre_coords(c), 3));
}

TEST_CASE("block cover and overlap") {
  for (auto [m, k] : {std::pair{7, 3}, std::pair{6, 2}, std::pair{5, 1}}) {
    auto box = Graph::box(2, m);
    BlockGrid grid(box, k);
    std::vector<int> cover(box.num_free(), 0);
    for (std::size_t c = 0; c < grid.num_centres(); ++c)
      for (auto v : grid.block_vertices(c)) ++cover[v];
    CHECK(std::all_of(cover.begin(), cover.end(), [](int x) { return x >= 1; }));
    for (std::size_t c = 0; c < grid.num_centres(); ++c)
      for (auto nb : grid.neighbours(c, Adjacency::k_adjacent)) {
        std::set<std::uint32_t> a(grid.block_vertices(c).begin(), grid.block_vertices(c).end());
        std::size_t shared = 0;
        for (auto v : grid.block_vertices(nb)) shared += a.count(v);
        CHECK(shared >= static_cast<std::size_t>((k + 1) * (2 * k + 1)));
      }
  }
  CHECK_THROWS_AS(BlockGrid(Graph::torus(2, 10), 3), CoarseGrainError);
  CHECK_THROWS_AS(BlockGrid(Graph::torus(2, 4), 2), CoarseGrainError);
  CHECK_THROWS_AS(BlockGrid(Graph::grid_box(2, 5), 1), CoarseGrainError);
}

TEST_CASE("very good pairs") {
  auto t = Graph::torus(2, 8);
  BlockGrid grid(t, 2);
  BondConfig full(t.num_edges(), true), empty(t.num_edges());
  CHECK(grid.very_good(0, full, full));
  CHECK_FALSE(grid.very_good(0, empty, empty));
  auto other = full;
  other.set(grid.block_edges(0)[5], false);
  CHECK(grid.good(0, other));
  CHECK_FALSE(grid.very_good(0, full, other));
  CHECK(grid.very_good(0, other, other));
}

TEST_CASE("coarse fields") {
  auto t = Graph::torus(2, 16);
  BlockGrid grid(t, 2);
  BondConfig full(t.num_edges(), true), empty(t.num_edges());
  CHECK(coarse_field(grid, full).count_open() == grid.num_centres());
  CHECK(coarse_field(grid, empty).count_open() == 0);

  // Planted defect: an isolated open pair {a, b}. A block holding both sees
  // a second cluster of size 2 = k; a block holding one sees a singleton.
  std::vector<int> ca{5, 9}, cb{5, 10};
  const auto a = static_cast<std::uint32_t>(t.vertex_at(ca));
  const auto b = static_cast<std::uint32_t>(t.vertex_at(cb));
  auto w = full;
  for (auto v : {a, b})
    for (auto e : t.incident_edges(v)) w.set(e, false);
  w.set(t.find_edge(a, b), true);
  auto f = coarse_field(grid, w);
  std::size_t flipped = 0;
  for (std::size_t c = 0; c < grid.num_centres(); ++c) {
    const auto x = grid.centre_coords(c);
    const auto xv = static_cast<std::uint32_t>(t.vertex_at(x));
    const bool both = t.linf_distance(xv, a) <= 2 && t.linf_distance(xv, b) <= 2;
    CHECK(f.value[c] == (both ? 0 : 1));
    CHECK(static_cast<bool>(f.value[c]) == grid.good(c, w));
    flipped += both;
  }
  CHECK(flipped == 4);  // centre rows {4, 6} x centre columns {8, 10}

  auto pair = coarse_field(grid, full, w);
  for (std::size_t c = 0; c < grid.num_centres(); ++c) {
    bool touched = false;
    for (auto e : grid.block_edges(c)) touched = touched || w.is_open(e) != full.is_open(e);
    CHECK(pair.value[c] == (touched ? 0 : 1));
  }

  std::stringstream ss;
  write_field(ss, f);
  auto back = read_field(ss);
  CHECK(back.k == 2);
  CHECK(back.side == 8);
  CHECK(back.value == f.value);
  std::stringstream bad("2 2 3\n010\n01");
  CHECK_THROWS_AS(read_field(bad), CoarseGrainError);
}

TEST_CASE("k and star clusters") {
  auto t = Graph::torus(2, 8);
  BlockGrid grid(t, 2);  // 4x4 periodic centre grid
  CoarseField ones{2, 2, 4, std::vector<std::uint8_t>(16, 1)};
  CHECK(field_clusters(grid, ones, Adjacency::star).count() == 1);
  CHECK(field_clusters(grid, ones, Adjacency::k_adjacent).count() == 1);

  CoarseField diag{2, 2, 4, std::vector<std::uint8_t>(16, 0)};
  diag.value[grid.centre_from_index(std::vector<int>{1, 1})] = 1;
  diag.value[grid.centre_from_index(std::vector<int>{2, 2})] = 1;
  CHECK(field_clusters(grid, diag, Adjacency::star).count() == 1);
  CHECK(field_clusters(grid, diag, Adjacency::k_adjacent).count() == 2);

  CoarseField checker{2, 2, 4, std::vector<std::uint8_t>(16, 0)};
  for (std::size_t c = 0; c < 16; ++c) {
    auto idx = grid.centre_index(c);
    checker.value[c] = (idx[0] + idx[1]) % 2 == 0;
  }
  auto star = field_clusters(grid, checker, Adjacency::star);
  auto near = field_clusters(grid, checker, Adjacency::k_adjacent);
  CHECK(star.count() == 1);
  CHECK(star.sizes[0] == 8);
  CHECK(near.count() == 8);
  CHECK(std::all_of(near.sizes.begin(), near.sizes.end(), [](std::size_t s) { return s == 1; }));
  auto closed = field_clusters(grid, checker, Adjacency::star, false);
  CHECK(closed.count() == 1);
}

TEST_CASE("separating surfaces") {
  auto box = Graph::box(2, 6);
  BlockGrid grid(box, 1);  // 11x11 centres, |x| <= 5
  const std::size_t n = grid.num_centres();
  CoarseField ones{1, 2, grid.axis_len(), std::vector<std::uint8_t>(n, 1)};
  auto s = find_separating_surface(grid, ones, 2);
  CHECK(s.exists);
  CHECK(s.exterior.empty());
  CHECK(s.gamma.size() == 40);
  for (auto c : s.gamma) CHECK(grid.on_outer_ring(c));
  CHECK(s.gamma.size() + s.interior.size() + s.exterior.size() == n);
  CHECK(s.gamma_vertices.size() + s.int_vertices.size() + s.ext_vertices.size() == box.num_vertices());
  CHECK(s.int_vertices.size() == 49);  // [-3, 3]^2 lies outside every ring block
  CHECK(interior_sealed(grid, s));

  // Closed star path from the ring at x=5 down to the origin.
  auto path = ones;
  for (int x = 5; x >= 0; --x) path.value[grid.centre_from_index(std::vector<int>{x + 5, 5 + (x % 2)})] = 0;
  auto p = find_separating_surface(grid, path, 2);
  CHECK_FALSE(p.exists);
  REQUIRE(p.witness.size() >= 2);
  CHECK(grid.on_outer_ring(p.witness.front()));
  CHECK(grid.centre_norm(p.witness.back()) <= 3);
  for (std::size_t i = 0; i + 1 < p.witness.size(); ++i) {
    auto nbs = grid.neighbours(p.witness[i], Adjacency::star);
    CHECK(std::find(nbs.begin(), nbs.end(), p.witness[i + 1]) != nbs.end());
    CHECK(path.value[p.witness[i]] == 0);
  }

  // A closed centre strictly inside the annulus does not touch D.
  auto inner = ones;
  inner.value[grid.centre_from_index(std::vector<int>{5, 8})] = 0;
  auto q = find_separating_surface(grid, inner, 1);
  CHECK(q.exists);
  CHECK(q.gamma == s.gamma);
  CHECK(interior_sealed(grid, q));

  // A closed centre on the ring: Gamma routes inside around it.
  auto ring = ones;
  const auto notch = grid.centre_from_index(std::vector<int>{10, 5});
  ring.value[notch] = 0;
  auto r = find_separating_surface(grid, ring, 2);
  CHECK(r.exists);
  CHECK(r.exterior == std::vector<std::size_t>{notch});
  CHECK(r.gamma.size() == 39 + 3);
  CHECK(interior_sealed(grid, r));
  for (auto c : r.interior) CHECK(grid.centre_norm(c) <= 4);
  for (int x = -2; x <= 2; ++x)
    for (int y = -2; y <= 2; ++y) {
      auto c = grid.centre_from_index(std::vector<int>{x + 5, y + 5});
      CHECK(std::binary_search(r.interior.begin(), r.interior.end(), c));
    }

  CHECK_THROWS_AS(find_separating_surface(grid, ones, 4), CoarseGrainError);
  CHECK_THROWS_AS(find_separating_surface(grid, ones, -1), CoarseGrainError);
  auto t = Graph::torus(2, 8);
  BlockGrid tg(t, 2);
  CHECK_THROWS_AS(outermost_surface(tg, CoarseField{2, 2, 4, std::vector<std::uint8_t>(16, 1)}), CoarseGrainError);
}

TEST_CASE("separating surface agrees with closure search") {
  // 3x3 centre grids exhaustively, 5x5 on a random sample.
  auto small = Graph::box(2, 3);
  BlockGrid g5(small, 1);  // |x| <= 2: 5x5
  auto tiny = Graph::box(2, 4);
  BlockGrid g3(tiny, 2);  // {-2, 0, 2}: 3x3
  REQUIRE(g5.axis_len() == 5);
  REQUIRE(g3.axis_len() == 3);
  CHECK_THROWS_AS(find_separating_surface(g3, CoarseField{2, 2, 3, std::vector<std::uint8_t>(9, 1)}, 0),
                  CoarseGrainError);
  // Outer structure alone (no annulus) on every 3x3 field.
  for (std::uint32_t code = 0; code < 512; ++code) {
    CoarseField f{2, 2, 3, std::vector<std::uint8_t>(9)};
    for (int i = 0; i < 9; ++i) f.value[i] = (code >> i) & 1;
    auto s = outermost_surface(g3, f);
    CHECK(interior_sealed(g3, s));
    CHECK(s.gamma.size() + s.interior.size() + s.exterior.size() == 9);
  }
  Rng rng(5);
  std::size_t with = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    const double dens = rng.uniform();
    CoarseField f{1, 2, 5, std::vector<std::uint8_t>(25)};
    for (auto& v : f.value) v = rng.bernoulli(dens);
    auto s = find_separating_surface(g5, f, 0);
    REQUIRE(s.exists == surface_by_closure(g5, f, 0));
    REQUIRE(interior_sealed(g5, s));
    for (auto c : s.gamma) REQUIRE(f.value[c] == 1);
    with += s.exists;
  }
  CHECK(with > 100);
  CHECK(with < 9900);
}

TEST_CASE("E events on a box") {
  auto box = Graph::box(2, 8);
  BlockGrid grid(box, 2);
  auto a = linf_ball(box, 2);
  BondConfig full(box.num_edges(), true), empty(box.num_edges());
  CHECK(classify_E_mA(grid, full, a));
  CHECK_FALSE(classify_E_mA(grid, empty, a));
  auto shell = full;
  for (std::size_t e = 0; e < box.num_edges(); ++e)
    if (box.is_boundary(box.edge(e).u) || box.is_boundary(box.edge(e).v)) shell.set(e, false);
  CHECK(coarse_field(grid, shell).count_open() == grid.num_centres());
  CHECK_FALSE(classify_E_mA(grid, shell, a));
  // One boundary edge reopened restores the connection.
  for (std::size_t e = 0; e < box.num_edges(); ++e)
    if (box.is_boundary(box.edge(e).v)) {
      shell.set(e, true);
      break;
    }
  CHECK(classify_E_mA(grid, shell, a));
  CHECK(region_centre_boundary(grid, a).size() == 8);
}

TEST_CASE("E theta events on a torus") {
  auto t = Graph::torus(2, 16);
  BlockGrid grid(t, 2);
  auto a = linf_ball(t, 2);
  BondConfig full(t.num_edges(), true), empty(t.num_edges());
  CHECK(classify_E_m_theta(grid, full, 1.0, a).holds);
  CHECK(classify_E_m_theta(grid, full, 0.5).holds);
  CHECK_FALSE(classify_E_m_theta(grid, empty, 0.1, a).holds);
  CHECK_FALSE(classify_E_m_theta(grid, empty, 0.1).holds);
  auto w = full;
  std::vector<int> ca{5, 9}, cb{5, 10};
  const auto u = static_cast<std::uint32_t>(t.vertex_at(ca));
  const auto v = static_cast<std::uint32_t>(t.vertex_at(cb));
  for (auto x : {u, v})
    for (auto e : t.incident_edges(x)) w.set(e, false);
  w.set(t.find_edge(u, v), true);
  auto ev = classify_E_m_theta(grid, w, 1.0, a);
  CHECK_FALSE(ev.holds);
  CHECK(ev.largest == grid.num_centres() - 4);
  CHECK(ev.large_clusters == 1);
  CHECK(classify_E_m_theta(grid, w, 0.9, a).holds);
}

TEST_CASE("good k-clusters carry one large component") {
  Rng rng(3);
  auto t = Graph::torus(2, 32);
  for (int k : {2, 4}) {
    BlockGrid grid(t, k);
    for (double p : {0.5, 0.7, 0.9}) {
      auto w = random_bonds(t.num_edges(), p, rng);
      auto f = coarse_field(grid, w);
      auto chk = check_good_cluster_uniqueness(grid, w, f);
      CHECK(chk.violations == 0);
      CHECK(chk.clusters == field_clusters(grid, f, Adjacency::k_adjacent).count());
    }
  }
  // A field that lies about the configuration is caught.
  BlockGrid grid(t, 2);
  CoarseField liar{2, 2, grid.axis_len(), std::vector<std::uint8_t>(grid.num_centres(), 1)};
  CHECK(check_good_cluster_uniqueness(grid, BondConfig(t.num_edges()), liar).violations == 1);
}

TEST_CASE("surface screens the interior partition") {
  // Gamma = the outer centre ring, all good. Varying edges outside Gamma's
  // blocks and the boundary partition leaves the partition induced on the
  // rim of Int unchanged.
  auto box = Graph::box(2, 3);
  BlockGrid grid(box, 1);
  Rng rng(9);
  std::vector<std::uint32_t> outside;  // edges in no block: the ones touching the ring
  for (std::uint32_t e = 0; e < box.num_edges(); ++e)
    if (box.is_boundary(box.edge(e).u) || box.is_boundary(box.edge(e).v)) outside.push_back(e);
  REQUIRE(outside.size() == 28);
  for (int rep = 0; rep < 4; ++rep) {
    BondConfig w(box.num_edges());
    for (std::size_t c = 0; c < grid.num_centres(); ++c)
      if (grid.on_outer_ring(c))
        for (auto e : grid.block_edges(c)) w.set(e, rng.bernoulli(0.9));
    auto f = coarse_field(grid, w);
    bool ring_good = true;
    for (std::size_t c = 0; c < grid.num_centres(); ++c)
      if (grid.on_outer_ring(c)) ring_good = ring_good && f.value[c];
    if (!ring_good) {
      --rep;
      continue;
    }
    for (std::size_t c = 0; c < grid.num_centres(); ++c)
      if (!grid.on_outer_ring(c)) f.value[c] = 1;
    auto s = outermost_surface(grid, f);
    REQUIRE(s.int_vertices.size() == 1);
    const auto base = induced_partition(box, w, BoundaryPartition::free(box), s.int_vertices);
    std::vector<std::uint32_t> pick(outside.begin(), outside.begin() + 12);
    for (std::uint32_t code = 0; code < (1u << 12); ++code) {
      auto x = w;
      for (std::size_t j = 0; j < 12; ++j) x.set(pick[j], (code >> j) & 1);
      for (const auto& xi : {BoundaryPartition::free(box), BoundaryPartition::wired(box)})
        REQUIRE(induced_partition(box, x, xi, s.int_vertices).label == base.label);
    }
  }
}

namespace {

// Exact conditional law of the unrevealed edges, by brute force.
std::vector<double> exact_conditional(const Graph& g, const RCParams& rp, const BoundaryPartition& xi, BondConfig w,
                                      const std::vector<std::uint32_t>& free_edges) {
  std::vector<double> prob(std::size_t{1} << free_edges.size());
  double z = 0;
  for (std::size_t x = 0; x < prob.size(); ++x) {
    for (std::size_t j = 0; j < free_edges.size(); ++j) w.set(free_edges[j], (x >> j) & 1);
    prob[x] = std::exp(rc_log_weight(g, w, rp, xi));
    z += prob[x];
  }
  for (auto& v : prob) v /= z;
  return prob;
}

}  // namespace

TEST_CASE("pair sampler backends") {
  auto box = Graph::box(2, 1);
  const RCParams rp{0.6, 2.0};
  auto wired = BoundaryPartition::wired(box), free = BoundaryPartition::free(box);
  Rng rng(21);
  BondConfig base(box.num_edges());
  std::vector<std::uint32_t> unrevealed;
  for (std::uint32_t e = 0; e < box.num_edges(); ++e) {
    if (e % 4 == 1)
      unrevealed.push_back(e);
    else
      base.set(e, e % 3 == 0);
  }
  REQUIRE(unrevealed.size() == 6);
  const auto pa = exact_conditional(box, rp, wired, base, unrevealed);
  const auto pb = exact_conditional(box, rp, free, base, unrevealed);
  for (auto backend : {ConditionalBackend::enumeration, ConditionalBackend::cftp}) {
    PairSampler sampler{backend};
    std::vector<double> ca(pa.size()), cb(pb.size());
    const int n = 20000;
    int ordered = 0;
    for (int i = 0; i < n; ++i) {
      auto a = base, b = base;
      CHECK(sampler.sample(box, rp, wired, free, a, b, unrevealed, rng) == backend);
      std::size_t xa = 0, xb = 0;
      bool dom = true;
      for (std::size_t j = 0; j < unrevealed.size(); ++j) {
        xa |= std::size_t{a.is_open(unrevealed[j])} << j;
        xb |= std::size_t{b.is_open(unrevealed[j])} << j;
        dom = dom && (a.is_open(unrevealed[j]) || !b.is_open(unrevealed[j]));
      }
      ca[xa] += 1.0 / n;
      cb[xb] += 1.0 / n;
      ordered += dom;
    }
    double tva = 0, tvb = 0;
    for (std::size_t x = 0; x < pa.size(); ++x) {
      tva += std::abs(ca[x] - pa[x]) / 2;
      tvb += std::abs(cb[x] - pb[x]) / 2;
    }
    CHECK(tva < 0.03);
    CHECK(tvb < 0.03);
    CHECK(ordered == n);  // wired dominates free
  }
  PairSampler mcmc{ConditionalBackend::mcmc};
  auto a = base, b = base;
  CHECK(mcmc.sample(box, rp, wired, free, a, b, unrevealed, rng) == ConditionalBackend::mcmc);
  PairSampler capped{ConditionalBackend::enumeration, 4};
  CHECK_THROWS_AS(capped.sample(box, rp, wired, free, a, b, unrevealed, rng), CoarseGrainError);
  CHECK(parse_backend("cftp") == ConditionalBackend::cftp);
  CHECK_THROWS(parse_backend("exact"));
}

TEST_CASE("revealing coupling") {
  auto box = Graph::box(2, 4);
  BlockGrid grid(box, 1);
  auto wired = BoundaryPartition::wired(box), free = BoundaryPartition::free(box);

  // Same boundary on both sides: the two processes are identical.
  auto same = reveal_coupling(grid, {0.95, 2.0}, wired, wired, 17);
  CHECK(same.omega == same.omega_prime);
  CHECK(same.surface_matches);
  if (std::all_of(same.very_good.begin(), same.very_good.end(), [](auto x) { return x == 1; })) {
    CHECK(same.success);
    CHECK(same.processed.size() == 24);
  }

  // p = 1: every edge open, only the ring is processed.
  auto sure = reveal_coupling(grid, {1.0, 2.0}, wired, free, 4);
  CHECK(sure.success);
  CHECK(sure.processed.size() == 24);
  CHECK(sure.surface.gamma.size() == 24);
  CHECK(sure.partitions_agree);
  CHECK(sure.interior_agree);
  CHECK(sure.omega.num_open() == box.num_edges());

  int successes = 0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    auto r = reveal_coupling(grid, {0.95, 2.0}, wired, free, seed);
    CHECK(r.surface_matches);
    CHECK_FALSE(r.approximate);
    CHECK(r.mcmc_steps == 0);
    for (std::size_t e = 0; e < box.num_edges(); ++e) CHECK((r.omega.is_open(e) || !r.omega_prime.is_open(e)));
    if (r.success) {
      ++successes;
      CHECK(r.partitions_agree);
      CHECK(r.interior_agree);
    }
  }
  MESSAGE("reveal successes: " << successes << "/12");

  auto again = reveal_coupling(grid, {0.95, 2.0}, wired, free, 3);
  auto first = reveal_coupling(grid, {0.95, 2.0}, wired, free, 3);
  CHECK(again.omega == first.omega);
  CHECK(again.processed == first.processed);
  CHECK_THROWS_AS(reveal_coupling(BlockGrid(Graph::torus(2, 8), 2), {0.9, 2.0},
                                  BoundaryPartition{}, BoundaryPartition{}, 1),
                  CoarseGrainError);
}
