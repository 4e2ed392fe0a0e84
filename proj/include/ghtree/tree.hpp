#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ghtree/error.hpp"
#include "ghtree/metric_space.hpp"

namespace ghtree {

struct Vertex {
  std::string id;
  std::string label;
};

struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
  double length = 0.0;
};

struct Neighbor {
  std::size_t vertex;
  std::size_t edge;
  double length;
};

// Values are JSON-encoded text (a number, a quoted string, ...), so documents
// round-trip without the core depending on a JSON library.
using Metadata = std::map<std::string, std::string>;

inline std::string json_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", static_cast<unsigned>(c));
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out + "\"";
}

class MetricTree;

namespace detail {
MetricTree assemble(std::vector<Vertex> vertices, std::vector<Edge> edges,
                    std::optional<DistanceMatrix> dist);
}

// Finite metric tree: a connected acyclic graph with positive edge lengths and
// the cached path metric. Immutable once built; every operation below returns
// a new tree.
class MetricTree {
 public:
  MetricTree() = default;

  std::size_t size() const noexcept { return vertices_.size(); }
  const std::vector<Vertex>& vertices() const noexcept { return vertices_; }
  const Vertex& vertex(std::size_t v) const { return vertices_.at(v); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const DistanceMatrix& distances() const noexcept { return dist_; }
  double distance(std::size_t x, std::size_t y) const noexcept { return dist_(x, y); }

  std::span<const Neighbor> neighbors(std::size_t v) const { return adjacency_.at(v); }
  std::size_t degree(std::size_t v) const { return adjacency_.at(v).size(); }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(std::string_view id) const {
    if (auto v = find(id)) return *v;
    throw Error(ErrorCode::unknown_vertex, "unknown vertex id '" + std::string(id) + "'");
  }

  FiniteMetricSpace metric_space() const {
    FiniteMetricSpace space;
    space.dist = dist_;
    for (const auto& v : vertices_) space.labels.push_back(v.id);
    return space;
  }

  double total_length() const {
    double sum = 0.0;
    for (const auto& e : edges_) sum += e.length;
    return sum;
  }

  void check_vertex(std::size_t v) const {
    if (v >= size()) {
      throw Error(ErrorCode::unknown_vertex, "vertex index " + std::to_string(v) + " out of range", {v});
    }
  }

  Metadata metadata;

 private:
  friend MetricTree detail::assemble(std::vector<Vertex>, std::vector<Edge>,
                                     std::optional<DistanceMatrix>);

  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::unordered_map<std::string, std::size_t> index_;
  DistanceMatrix dist_;
};

namespace detail {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

// Path metric by a traversal from every vertex; only the upper triangle is
// computed, then mirrored.
inline DistanceMatrix path_metric(std::size_t n, const std::vector<std::vector<Neighbor>>& adj) {
  DistanceMatrix d(n);
  std::vector<double> from_root(n);
  std::vector<std::size_t> parent(n);
  std::vector<std::size_t> stack;
  for (std::size_t root = 0; root < n; ++root) {
    from_root[root] = 0.0;
    parent[root] = n;
    stack.assign(1, root);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (const auto& nb : adj[v]) {
        if (nb.vertex == parent[v]) continue;
        parent[nb.vertex] = v;
        from_root[nb.vertex] = from_root[v] + nb.length;
        stack.push_back(nb.vertex);
      }
    }
    for (std::size_t j = root + 1; j < n; ++j) d.set_symmetric(root, j, from_root[j]);
  }
  return d;
}

// Validates structure and either computes the path metric or checks a
// supplied matrix against it.
inline MetricTree assemble(std::vector<Vertex> vertices, std::vector<Edge> edges,
                           std::optional<DistanceMatrix> dist) {
  const std::size_t n = vertices.size();
  if (n == 0) throw Error(ErrorCode::invalid_argument, "a tree needs at least one vertex");

  MetricTree t;
  for (std::size_t v = 0; v < n; ++v) {
    if (!t.index_.emplace(vertices[v].id, v).second) {
      throw Error(ErrorCode::duplicate_id, "duplicate vertex id '" + vertices[v].id + "'", {v});
    }
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Edge& edge = edges[e];
    if (edge.a >= n || edge.b >= n) {
      throw Error(ErrorCode::unknown_vertex, "edge " + std::to_string(e) + " references a missing vertex",
                  {edge.a, edge.b});
    }
    if (!(edge.length > 0.0) || !std::isfinite(edge.length)) {
      throw Error(ErrorCode::nonpositive_length,
                  "edge " + vertices[edge.a].id + "-" + vertices[edge.b].id + " has length " +
                      format_number(edge.length),
                  {edge.a, edge.b});
    }
  }
  DisjointSets sets(n);
  for (const Edge& edge : edges) {
    if (!sets.unite(edge.a, edge.b)) {
      throw Error(ErrorCode::cycle,
                  "edge " + vertices[edge.a].id + "-" + vertices[edge.b].id + " closes a cycle",
                  {edge.a, edge.b});
    }
  }
  for (std::size_t v = 1; v < n; ++v) {
    if (sets.find(v) != sets.find(0)) {
      throw Error(ErrorCode::disconnected,
                  "vertex '" + vertices[v].id + "' is not connected to '" + vertices[0].id + "'", {0, v});
    }
  }

  t.adjacency_.assign(n, {});
  for (std::size_t e = 0; e < edges.size(); ++e) {
    t.adjacency_[edges[e].a].push_back({edges[e].b, e, edges[e].length});
    t.adjacency_[edges[e].b].push_back({edges[e].a, e, edges[e].length});
  }
  DistanceMatrix walked = path_metric(n, t.adjacency_);
  if (dist) {
    if (dist->size() != n) throw Error(ErrorCode::invalid_argument, "distance matrix size mismatch");
    const double slack = kDefaultTol * std::max(1.0, diameter(walked));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (std::abs((*dist)(i, j) - walked(i, j)) > slack) {
          throw Error(ErrorCode::invalid_argument,
                      "supplied distance " + vertices[i].id + "-" + vertices[j].id +
                          " disagrees with the path metric",
                      {i, j});
        }
      }
    }
    t.dist_ = std::move(*dist);
  } else {
    t.dist_ = std::move(walked);
  }
  t.vertices_ = std::move(vertices);
  t.edges_ = std::move(edges);
  return t;
}

// Hands out vertex ids that do not collide with existing ones.
class IdAllocator {
 public:
  void reserve(const std::string& id) { used_.insert(id); }
  std::string fresh(const std::string& base) {
    std::string id = base;
    for (int k = 1; used_.count(id); ++k) id = base + "'" + std::to_string(k);
    used_.insert(id);
    return id;
  }

 private:
  std::unordered_set<std::string> used_;
};

}  // namespace detail

inline MetricTree tree_from_edges(std::vector<Vertex> vertices, std::vector<Edge> edges) {
  return detail::assemble(std::move(vertices), std::move(edges), std::nullopt);
}

// Convenience: vertex ids "0".."n-1".
inline MetricTree tree_from_edges(std::size_t n, std::vector<Edge> edges) {
  std::vector<Vertex> vertices;
  for (std::size_t i = 0; i < n; ++i) vertices.push_back({std::to_string(i), ""});
  return tree_from_edges(std::move(vertices), std::move(edges));
}

// The unique simple path from x to y.
inline std::vector<std::size_t> geodesic(const MetricTree& t, std::size_t x, std::size_t y) {
  t.check_vertex(x);
  t.check_vertex(y);
  std::vector<std::size_t> path{x};
  std::size_t cur = x;
  while (cur != y) {
    std::size_t next = cur;
    double best = t.distance(cur, y);
    for (const auto& nb : t.neighbors(cur)) {
      if (t.distance(nb.vertex, y) < best) {
        best = t.distance(nb.vertex, y);
        next = nb.vertex;
      }
    }
    path.push_back(next);
    cur = next;
  }
  return path;
}

// Edge index joining adjacent vertices u and v.
inline std::size_t edge_between(const MetricTree& t, std::size_t u, std::size_t v) {
  for (const auto& nb : t.neighbors(u))
    if (nb.vertex == v) return nb.edge;
  throw Error(ErrorCode::invalid_argument, "vertices are not adjacent", {u, v});
}

// A point on edge `edge`, at `offset` from edges[edge].a.
struct EdgePoint {
  std::size_t edge;
  double offset;
};

struct Insertion {
  MetricTree tree;
  // Vertex index in `tree` for each requested point, in request order.
  std::vector<std::size_t> vertex_of;
};

// Inserts vertices at the requested edge points. Points within tol of an
// endpoint or of each other are merged. Original vertices keep their indices
// and their pairwise distances bit for bit.
inline Insertion insert_points(const MetricTree& t, std::span<const EdgePoint> points,
                               double tol = kDefaultTol) {
  const std::size_t n = t.size();
  const auto& edges = t.edges();
  Insertion result;
  result.vertex_of.assign(points.size(), 0);

  // Per edge: sorted distinct interior offsets.
  std::vector<std::vector<double>> cuts(edges.size());
  for (const auto& p : points) {
    if (p.edge >= edges.size()) throw Error(ErrorCode::index_out_of_range, "edge index out of range", {p.edge});
    const double len = edges[p.edge].length;
    if (p.offset > tol && p.offset < len - tol) cuts[p.edge].push_back(p.offset);
  }
  std::vector<Vertex> vertices = t.vertices();
  detail::IdAllocator ids;
  for (const auto& v : vertices) ids.reserve(v.id);

  struct Placed {
    std::size_t edge;
    double offset;
  };
  std::vector<Placed> placed;  // for vertices n, n+1, ...
  std::vector<std::vector<std::size_t>> cut_vertex(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto& c = cuts[e];
    std::sort(c.begin(), c.end());
    std::vector<double> distinct;
    for (double off : c)
      if (distinct.empty() || off - distinct.back() > tol) distinct.push_back(off);
    c = std::move(distinct);
    for (std::size_t k = 0; k < c.size(); ++k) {
      const auto& ea = t.vertex(edges[e].a).id;
      const auto& eb = t.vertex(edges[e].b).id;
      cut_vertex[e].push_back(vertices.size());
      vertices.push_back({ids.fresh(ea + "/" + eb + "#" + std::to_string(k + 1)), ""});
      placed.push_back({e, c[k]});
    }
  }

  std::vector<Edge> out_edges;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (cuts[e].empty()) {
      out_edges.push_back(edges[e]);
      continue;
    }
    std::size_t prev = edges[e].a;
    double prev_off = 0.0;
    for (std::size_t k = 0; k < cuts[e].size(); ++k) {
      out_edges.push_back({prev, cut_vertex[e][k], cuts[e][k] - prev_off});
      prev = cut_vertex[e][k];
      prev_off = cuts[e][k];
    }
    out_edges.push_back({prev, edges[e].b, edges[e].length - prev_off});
  }

  const std::size_t total = vertices.size();
  DistanceMatrix d(total);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d(i, j) = t.distance(i, j);
  for (std::size_t w = n; w < total; ++w) {
    const auto& pw = placed[w - n];
    const Edge& ew = edges[pw.edge];
    const double tw = pw.offset;
    const double rw = ew.length - tw;
    for (std::size_t y = 0; y < n; ++y)
      d.set_symmetric(w, y, std::min(tw + t.distance(ew.a, y), rw + t.distance(ew.b, y)));
    for (std::size_t z = n; z < w; ++z) {
      const auto& pz = placed[z - n];
      double value;
      if (pz.edge == pw.edge) {
        value = std::abs(tw - pz.offset);
      } else {
        const Edge& ez = edges[pz.edge];
        const double tz = pz.offset;
        const double rz = ez.length - tz;
        value = std::min({tw + t.distance(ew.a, ez.a) + tz, tw + t.distance(ew.a, ez.b) + rz,
                          rw + t.distance(ew.b, ez.a) + tz, rw + t.distance(ew.b, ez.b) + rz});
      }
      d.set_symmetric(w, z, value);
    }
  }

  for (std::size_t r = 0; r < points.size(); ++r) {
    const auto& p = points[r];
    const Edge& e = edges[p.edge];
    if (p.offset <= tol) {
      result.vertex_of[r] = e.a;
    } else if (p.offset >= e.length - tol) {
      result.vertex_of[r] = e.b;
    } else {
      const auto& c = cuts[p.edge];
      std::size_t best = 0;
      for (std::size_t k = 1; k < c.size(); ++k)
        if (std::abs(c[k] - p.offset) < std::abs(c[best] - p.offset)) best = k;
      result.vertex_of[r] = cut_vertex[p.edge][best];
    }
  }
  result.tree = detail::assemble(std::move(vertices), std::move(out_edges), std::move(d));
  result.tree.metadata = t.metadata;
  return result;
}

// Splits every edge into ceil(length / eps) equal pieces.
inline MetricTree subdivide(const MetricTree& t, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::invalid_argument, "subdivision resolution must be positive");
  std::vector<EdgePoint> points;
  for (std::size_t e = 0; e < t.edges().size(); ++e) {
    const double len = t.edges()[e].length;
    const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil(len / eps - 1e-9)));
    for (std::size_t k = 1; k < pieces; ++k)
      points.push_back({e, len * static_cast<double>(k) / static_cast<double>(pieces)});
  }
  if (points.empty()) return t;
  // Offsets here are at least len/pieces apart, far above the merge tolerance.
  return insert_points(t, points, 0.0).tree;
}

inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();

// Subtree of points within distance r of o. Edges leaving the ball are cut
// by a new leaf at exactly distance r, with id "<inside id>~<outside id>".
// A vertex at distance exactly r (within tol) is kept and nothing beyond it.
inline MetricTree closed_ball_subtree(const MetricTree& t, std::size_t o, double r,
                                      double tol = kDefaultTol) {
  t.check_vertex(o);
  if (std::isnan(r) || r < 0.0) throw Error(ErrorCode::invalid_argument, "ball radius must be nonnegative");
  double ecc = 0.0;
  for (double v : t.distances().row(o)) ecc = std::max(ecc, v);
  if (r >= ecc) return t;

  const std::size_t n = t.size();
  std::vector<std::size_t> new_index(n, n);
  std::vector<Vertex> vertices;
  std::vector<std::size_t> kept;
  for (std::size_t v = 0; v < n; ++v) {
    if (t.distance(o, v) <= r + tol) {
      new_index[v] = kept.size();
      kept.push_back(v);
      vertices.push_back(t.vertex(v));
    }
  }
  detail::IdAllocator ids;
  for (const auto& v : t.vertices()) ids.reserve(v.id);

  struct Cut {
    std::size_t inner;  // original index
    double offset;      // distance from inner
  };
  std::vector<Cut> cuts;
  std::vector<Edge> edges;
  for (const auto& e : t.edges()) {
    const bool in_a = new_index[e.a] < n;
    const bool in_b = new_index[e.b] < n;
    if (in_a && in_b) {
      edges.push_back({new_index[e.a], new_index[e.b], e.length});
    } else if (in_a != in_b) {
      const std::size_t inner = in_a ? e.a : e.b;
      const std::size_t outer = in_a ? e.b : e.a;
      const double offset = r - t.distance(o, inner);
      if (offset <= tol) continue;
      const std::size_t idx = vertices.size();
      vertices.push_back({ids.fresh(t.vertex(inner).id + "~" + t.vertex(outer).id), ""});
      cuts.push_back({inner, offset});
      edges.push_back({new_index[inner], idx, offset});
    }
  }

  const std::size_t m = vertices.size();
  DistanceMatrix d(m);
  for (std::size_t i = 0; i < kept.size(); ++i)
    for (std::size_t j = 0; j < kept.size(); ++j) d(i, j) = t.distance(kept[i], kept[j]);
  for (std::size_t c = 0; c < cuts.size(); ++c) {
    const std::size_t w = kept.size() + c;
    for (std::size_t j = 0; j < kept.size(); ++j)
      d.set_symmetric(w, j, cuts[c].offset + t.distance(cuts[c].inner, kept[j]));
    for (std::size_t c2 = 0; c2 < c; ++c2)
      d.set_symmetric(w, kept.size() + c2,
                      cuts[c].offset + t.distance(cuts[c].inner, cuts[c2].inner) + cuts[c2].offset);
  }
  MetricTree out = detail::assemble(std::move(vertices), std::move(edges), std::move(d));
  out.metadata = t.metadata;
  return out;
}

struct PointedTree {
  MetricTree tree;
  std::size_t base = 0;
};

// Glues the parts at their basepoints. The shared vertex is the basepoint of
// the first part; other vertex ids are prefixed with "<part>/" when there is
// more than one part. Within-part distances are copied verbatim.
inline MetricTree wedge_sum(std::span<const PointedTree> parts) {
  if (parts.empty()) throw Error(ErrorCode::invalid_argument, "wedge sum needs at least one part");
  for (const auto& p : parts) p.tree.check_vertex(p.base);
  if (parts.size() == 1) return parts.front().tree;

  struct Slot {
    std::size_t part;
    std::size_t local;
  };
  std::vector<Slot> slots;
  std::vector<Vertex> vertices;
  std::vector<std::vector<std::size_t>> global(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& tree = parts[i].tree;
    global[i].assign(tree.size(), 0);
    for (std::size_t v = 0; v < tree.size(); ++v) {
      if (i > 0 && v == parts[i].base) {
        global[i][v] = global[0][parts[0].base];
        continue;
      }
      global[i][v] = vertices.size();
      slots.push_back({i, v});
      vertices.push_back({std::to_string(i) + "/" + tree.vertex(v).id, tree.vertex(v).label});
    }
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (const auto& e : parts[i].tree.edges()) edges.push_back({global[i][e.a], global[i][e.b], e.length});

  const std::size_t n = vertices.size();
  const std::size_t hub = global[0][parts[0].base];
  DistanceMatrix d(n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      const Slot& sx = slots[x];
      const Slot& sy = slots[y];
      double value;
      if (sx.part == sy.part) {
        value = parts[sx.part].tree.distance(sx.local, sy.local);
      } else if (x == hub) {
        value = parts[sy.part].tree.distance(parts[sy.part].base, sy.local);
      } else {
        value = parts[sx.part].tree.distance(sx.local, parts[sx.part].base) +
                parts[sy.part].tree.distance(parts[sy.part].base, sy.local);
      }
      d.set_symmetric(x, y, value);
    }
  }
  return detail::assemble(std::move(vertices), std::move(edges), std::move(d));
}

// One entry of an edge replacement: the host geodesic [a, b] is replaced by
// `tree`, with alpha glued to a and beta glued to b.
struct ReplacementEntry {
  std::size_t a = 0;
  std::size_t b = 0;
  MetricTree tree;
  std::size_t alpha = 0;
  std::size_t beta = 0;
};

using ReplacementPlan = std::vector<ReplacementEntry>;

// Removes each open segment (a, b) of the host and glues the entry's tree in
// its place. Surviving host vertices keep their ids and exact pairwise
// distances; inserted vertices get ids "r<entry>/<id>". Interior vertices of
// each segment must have degree 2 in the host.
inline MetricTree replace_edges(const MetricTree& host, const ReplacementPlan& plan,
                                double tol = kDefaultTol) {
  const std::size_t n = host.size();
  std::vector<int> owner(n, -1);  // entry whose open segment contains the vertex
  std::vector<char> removed_edge(host.edges().size(), 0);
  std::vector<std::vector<std::size_t>> paths;
  for (std::size_t l = 0; l < plan.size(); ++l) {
    const auto& entry = plan[l];
    host.check_vertex(entry.a);
    host.check_vertex(entry.b);
    entry.tree.check_vertex(entry.alpha);
    entry.tree.check_vertex(entry.beta);
    if (entry.a == entry.b) throw Error(ErrorCode::invalid_argument, "degenerate segment", {entry.a});
    const double want = host.distance(entry.a, entry.b);
    const double got = entry.tree.distance(entry.alpha, entry.beta);
    if (std::abs(want - got) > tol) {
      throw Error(ErrorCode::length_mismatch,
                  "replacement " + std::to_string(l) + " spans " + format_number(got) + " but segment has length " +
                      format_number(want),
                  {l});
    }
    paths.push_back(geodesic(host, entry.a, entry.b));
    const auto& path = paths.back();
    for (std::size_t k = 1; k + 1 < path.size(); ++k) {
      if (host.degree(path[k]) != 2) {
        throw Error(ErrorCode::invalid_argument,
                    "segment " + std::to_string(l) + " passes through branch vertex '" + host.vertex(path[k]).id + "'",
                    {path[k]});
      }
    }
  }
  // Pairwise: at most one shared vertex.
  {
    std::vector<std::vector<std::size_t>> sorted = paths;
    for (auto& p : sorted) std::sort(p.begin(), p.end());
    for (std::size_t l = 0; l < sorted.size(); ++l) {
      for (std::size_t k = l + 1; k < sorted.size(); ++k) {
        std::vector<std::size_t> common;
        std::set_intersection(sorted[l].begin(), sorted[l].end(), sorted[k].begin(), sorted[k].end(),
                              std::back_inserter(common));
        if (common.size() > 1) {
          throw Error(ErrorCode::overlapping_segments,
                      "segments " + std::to_string(l) + " and " + std::to_string(k) + " share " +
                          std::to_string(common.size()) + " vertices",
                      {l, k});
        }
      }
    }
  }
  for (std::size_t l = 0; l < paths.size(); ++l) {
    const auto& path = paths[l];
    for (std::size_t k = 1; k + 1 < path.size(); ++k) owner[path[k]] = static_cast<int>(l);
    for (std::size_t k = 0; k + 1 < path.size(); ++k) removed_edge[edge_between(host, path[k], path[k + 1])] = 1;
  }

  // Vertex layout: surviving host vertices, then each entry's non-marked vertices.
  struct Slot {
    int entry;  // -1 for host
    std::size_t local;
  };
  std::vector<Slot> slots;
  std::vector<Vertex> vertices;
  std::vector<std::size_t> host_new(n, n);
  detail::IdAllocator ids;
  for (const auto& v : host.vertices()) ids.reserve(v.id);
  for (std::size_t v = 0; v < n; ++v) {
    if (owner[v] >= 0) continue;
    host_new[v] = vertices.size();
    slots.push_back({-1, v});
    vertices.push_back(host.vertex(v));
  }
  std::vector<std::vector<std::size_t>> entry_new(plan.size());
  for (std::size_t l = 0; l < plan.size(); ++l) {
    const auto& entry = plan[l];
    entry_new[l].assign(entry.tree.size(), 0);
    for (std::size_t v = 0; v < entry.tree.size(); ++v) {
      if (v == entry.alpha) {
        entry_new[l][v] = host_new[entry.a];
      } else if (v == entry.beta) {
        entry_new[l][v] = host_new[entry.b];
      } else {
        entry_new[l][v] = vertices.size();
        slots.push_back({static_cast<int>(l), v});
        vertices.push_back({ids.fresh("r" + std::to_string(l) + "/" + entry.tree.vertex(v).id),
                            entry.tree.vertex(v).label});
      }
    }
  }
  std::vector<Edge> edges;
  for (std::size_t e = 0; e < host.edges().size(); ++e) {
    if (removed_edge[e]) continue;
    const auto& edge = host.edges()[e];
    edges.push_back({host_new[edge.a], host_new[edge.b], edge.length});
  }
  for (std::size_t l = 0; l < plan.size(); ++l)
    for (const auto& e : plan[l].tree.edges())
      edges.push_back({entry_new[l][e.a], entry_new[l][e.b], e.length});

  // D(x, y) = h_x(x, u) + d(u, v) + h_y(v, y) with u, v the exit points.
  const std::size_t m = vertices.size();
  DistanceMatrix d(m);
  struct Anchor {
    std::size_t host_vertex;
    double offset;
  };
  auto anchors = [&](const Slot& s) -> std::vector<Anchor> {
    if (s.entry < 0) return {{s.local, 0.0}};
    const auto& entry = plan[static_cast<std::size_t>(s.entry)];
    return {{entry.a, entry.tree.distance(s.local, entry.alpha)},
            {entry.b, entry.tree.distance(s.local, entry.beta)}};
  };
  for (std::size_t x = 0; x < m; ++x) {
    const auto ax = anchors(slots[x]);
    for (std::size_t y = x + 1; y < m; ++y) {
      const Slot& sx = slots[x];
      const Slot& sy = slots[y];
      double value;
      if (sx.entry < 0 && sy.entry < 0) {
        value = host.distance(sx.local, sy.local);
      } else if (sx.entry == sy.entry) {
        value = plan[static_cast<std::size_t>(sx.entry)].tree.distance(sx.local, sy.local);
      } else {
        value = std::numeric_limits<double>::infinity();
        for (const auto& u : ax)
          for (const auto& v : anchors(sy))
            value = std::min(value, u.offset + host.distance(u.host_vertex, v.host_vertex) + v.offset);
      }
      d.set_symmetric(x, y, value);
    }
  }
  MetricTree out = detail::assemble(std::move(vertices), std::move(edges), std::move(d));
  out.metadata = host.metadata;
  return out;
}

// A connected component of the vertices of degree <= 2. `vertices` is the
// path in order; an edge joining two branch vertices directly forms a
// component with no vertices. `closure_ends` are the delimiters, or the path
// ends themselves where no delimiter exists.
struct Deg2Component {
  std::vector<std::size_t> vertices;
  std::vector<std::size_t> delimiters;
  std::pair<std::size_t, std::size_t> closure_ends{0, 0};
  double closure_diameter = 0.0;
};

inline std::vector<Deg2Component> deg2_components(const MetricTree& t) {
  const std::size_t n = t.size();
  auto low = [&](std::size_t v) { return t.degree(v) <= 2; };
  std::vector<char> seen(n, 0);
  std::vector<Deg2Component> out;
  for (std::size_t start = 0; start < n; ++start) {
    if (seen[start] || !low(start)) continue;
    // Walk to one end of the path.
    std::size_t end = start;
    std::size_t prev = n;
    for (;;) {
      std::size_t next = n;
      for (const auto& nb : t.neighbors(end))
        if (nb.vertex != prev && low(nb.vertex)) next = nb.vertex;
      if (next == n || next == start) break;
      prev = end;
      end = next;
    }
    Deg2Component comp;
    prev = n;
    for (std::size_t cur = end; cur != n;) {
      comp.vertices.push_back(cur);
      seen[cur] = 1;
      std::size_t next = n;
      for (const auto& nb : t.neighbors(cur))
        if (nb.vertex != prev && low(nb.vertex) && !seen[nb.vertex]) next = nb.vertex;
      prev = cur;
      cur = next;
    }
    auto delimiter_of = [&](std::size_t v, std::optional<std::size_t> skip) -> std::optional<std::size_t> {
      for (const auto& nb : t.neighbors(v))
        if (!low(nb.vertex) && nb.vertex != skip) return nb.vertex;
      return std::nullopt;
    };
    const std::size_t first = comp.vertices.front();
    const std::size_t last = comp.vertices.back();
    auto d_first = delimiter_of(first, std::nullopt);
    auto d_last = delimiter_of(last, first == last ? d_first : std::nullopt);
    if (d_first) comp.delimiters.push_back(*d_first);
    if (d_last) comp.delimiters.push_back(*d_last);
    comp.closure_ends = {d_first.value_or(first), d_last.value_or(last)};
    comp.closure_diameter = t.distance(comp.closure_ends.first, comp.closure_ends.second);
    out.push_back(std::move(comp));
  }
  for (const auto& e : t.edges()) {
    if (low(e.a) || low(e.b)) continue;
    Deg2Component comp;
    comp.delimiters = {e.a, e.b};
    comp.closure_ends = {e.a, e.b};
    comp.closure_diameter = e.length;
    out.push_back(std::move(comp));
  }
  return out;
}

struct Segment {
  std::size_t a = 0;
  std::size_t b = 0;
  double length = 0.0;
};

struct Decomposition {
  // The input tree with chunk boundary vertices inserted.
  MetricTree tree;
  std::vector<Segment> segments;
};

// Covers every deg<=2 component (closure included) by consecutive closed
// segments of length <= 1. Each component is chunked greedily, unit lengths
// first, starting from its closure end with the smaller vertex index. A
// remainder within tol of zero is absorbed into the previous chunk.
inline Decomposition decompose_deg2(const MetricTree& t, double tol = kDefaultTol) {
  struct Plan {
    std::vector<std::size_t> boundary_requests;  // indices into `points`, in order
    std::size_t start;
    std::size_t finish;
  };
  std::vector<EdgePoint> points;
  std::vector<Plan> plans;
  for (const auto& comp : deg2_components(t)) {
    auto [first, second] = comp.closure_ends;
    if (first == second) continue;
    if (second < first) std::swap(first, second);
    const auto path = geodesic(t, first, second);
    const double total = t.distance(first, second);
    Plan plan{{}, first, second};
    std::vector<double> marks;
    for (double at = 1.0; at < total - tol; at += 1.0) marks.push_back(at);
    std::size_t k = 0;
    double walked = 0.0;
    for (double at : marks) {
      while (k + 1 < path.size() && walked + t.distance(path[k], path[k + 1]) < at) {
        walked += t.distance(path[k], path[k + 1]);
        ++k;
      }
      const std::size_t e = edge_between(t, path[k], path[k + 1]);
      const double from_k = at - walked;
      const double offset = t.edges()[e].a == path[k] ? from_k : t.edges()[e].length - from_k;
      plan.boundary_requests.push_back(points.size());
      points.push_back({e, offset});
    }
    plans.push_back(std::move(plan));
  }
  Insertion ins = insert_points(t, points, tol);
  Decomposition out;
  for (const auto& plan : plans) {
    std::size_t prev = plan.start;
    for (std::size_t r : plan.boundary_requests) {
      const std::size_t v = ins.vertex_of[r];
      out.segments.push_back({prev, v, ins.tree.distance(prev, v)});
      prev = v;
    }
    out.segments.push_back({prev, plan.finish, ins.tree.distance(prev, plan.finish)});
  }
  out.tree = std::move(ins.tree);
  return out;
}

}  // namespace ghtree
