#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace phasemix {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GraphKind { torus, box, general };

std::string to_string(GraphKind kind);

struct Edge {
  std::uint32_t u;
  std::uint32_t v;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Immutable simple graph with an optional frozen boundary.
///
/// Vertices 0..num_free()-1 are the free (interior) sites; vertices
/// num_free()..num_vertices()-1 form the boundary set. Edges are stored with
/// u < v in lexicographic order, which is the canonical edge indexing used by
/// bond configurations and serialization.
///
/// Lattice graphs carry integer coordinates. Free sites are numbered
/// row-major over their coordinates (first coordinate slowest); boundary sites
/// follow in the same order. Boxes keep only edges with at least one free
/// endpoint.
class Graph {
 public:
  /// Periodic lattice (Z/nZ)^d. Requires d >= 2 and n >= 3.
  static Graph torus(int d, int n);

  /// Lambda_m = [-m, m]^d with the frozen ring Lambda_{m+1} \ Lambda_m.
  static Graph box(int d, int m);

  /// side^d free sites at coordinates 0..side-1, ring at -1 and side.
  static Graph grid_box(int d, int side);

  /// Simple graph on `num_vertices` vertices; the last `num_boundary` of them
  /// are boundary vertices.
  static Graph general(std::size_t num_vertices, std::vector<Edge> edges,
                       std::size_t num_boundary = 0);

  GraphKind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }
  /// n for tori, m for centred boxes, side for grid boxes, 0 otherwise.
  int side() const noexcept { return side_; }
  /// True for boxes built by box(d, m); false for grid boxes.
  bool centred_box() const noexcept { return centred_; }

  std::size_t num_free() const noexcept { return num_free_; }
  std::size_t num_boundary() const noexcept { return num_vertices_ - num_free_; }
  std::size_t num_vertices() const noexcept { return num_vertices_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  bool is_boundary(std::uint32_t v) const noexcept { return v >= num_free_; }

  std::span<const Edge> edges() const noexcept { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }
  std::span<const std::uint32_t> neighbors(std::uint32_t v) const {
    return {adj_.data() + offsets_[v], adj_.data() + offsets_[v + 1]};
  }
  /// Edge indices incident to v, parallel to neighbors(v).
  std::span<const std::uint32_t> incident_edges(std::uint32_t v) const {
    return {inc_.data() + offsets_[v], inc_.data() + offsets_[v + 1]};
  }
  std::size_t degree(std::uint32_t v) const { return offsets_[v + 1] - offsets_[v]; }
  std::size_t max_degree() const noexcept { return max_degree_; }

  bool has_coords() const noexcept { return !coords_.empty(); }
  std::span<const int> coords(std::uint32_t v) const {
    return {coords_.data() + static_cast<std::size_t>(v) * dim_, static_cast<std::size_t>(dim_)};
  }
  /// Inclusive coordinate range of the free sites (lattices only).
  int free_lo() const noexcept { return lo_; }
  int free_hi() const noexcept { return hi_; }

  /// Vertex at the given lattice coordinates (wrapped on tori), or -1.
  long vertex_at(std::span<const int> c) const;

  /// Lattice distances; tori use the wrapped metric.
  int linf_distance(std::uint32_t a, std::uint32_t b) const;
  int l1_distance(std::uint32_t a, std::uint32_t b) const;

  /// Index of edge {a, b}, or -1.
  long find_edge(std::uint32_t a, std::uint32_t b) const;

 private:
  void finalize();

  GraphKind kind_ = GraphKind::general;
  int dim_ = 0;
  int side_ = 0;
  bool centred_ = false;
  int lo_ = 0;
  int hi_ = 0;
  std::size_t num_free_ = 0;
  std::size_t num_vertices_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> adj_;
  std::vector<std::uint32_t> inc_;
  std::size_t max_degree_ = 0;
  std::vector<int> coords_;
  // Lookup over the bounding box [lo_-1, hi_+1]^d (boxes) or [0, n)^d (tori).
  std::vector<std::int64_t> lookup_;
  int lookup_lo_ = 0;
  int lookup_extent_ = 0;
};

struct RegularGraphSpec {
  std::size_t num_vertices;
  int degree;
  std::uint64_t seed;
  int max_attempts = 100000;
};

/// Uniform simple Delta-regular graph by the configuration model with
/// whole-matching rejection.
Graph random_regular(const RegularGraphSpec& spec);

enum class BallMetric { linf, graph_distance };

struct BallView {
  std::uint32_t center;
  int radius;
  BallMetric metric;
  std::vector<std::uint32_t> interior;  // sorted
  std::vector<std::uint32_t> boundary;  // sorted; neighbors of interior outside it
};

/// l_inf ball on lattices, graph-distance ball otherwise. On a torus the ball
/// must not wrap onto itself (2r+1 < n).
BallView ball(const Graph& g, std::uint32_t v, int r);

/// Graph whose free sites are `view.interior` and whose boundary is
/// `view.boundary`, keeping edges with at least one interior endpoint.
struct Subgraph {
  Graph graph;
  std::vector<std::uint32_t> to_parent;
};
Subgraph subgraph_with_boundary(const Graph& g, const BallView& view);

struct Rational {
  std::int64_t num;
  std::int64_t den;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// min over nonempty S, |S| <= N/2 of |E(S, S^c)| / |S|, by exhaustive
/// enumeration (N <= 24).
Rational edge_expansion_exact(const Graph& g);

/// Cycle rank of the subgraph induced by ball(g, v, r).interior.
int tree_like_defect(const Graph& g, std::uint32_t v, int r);

/// Text edge list: header `kind d n N`, then one `u v` line per edge.
void write_edge_list(std::ostream& out, const Graph& g);
Graph read_edge_list(std::istream& in);

}  // namespace phasemix
