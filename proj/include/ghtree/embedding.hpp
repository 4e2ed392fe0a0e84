#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ghtree/error.hpp"
#include "ghtree/families.hpp"
#include "ghtree/gh.hpp"
#include "ghtree/metric_space.hpp"
#include "ghtree/tree.hpp"

namespace ghtree {

// Finite parameter space H (points with planar coordinates in [0,1]^2 and
// Euclidean distances), the marked points v_i and the trees X_i they map to.
struct EmbedConfig {
  std::vector<std::array<double, 2>> coords;
  FiniteMetricSpace grid;
  std::vector<std::size_t> marked;
  std::vector<MetricTree> endpoints;
  std::vector<std::string> basepoints;  // vertex id of p_i in X_i
  int m = 3;
  std::size_t star_branches = 4;
  double eps = 1.0 / 64.0;
  double tol = kDefaultTol;
  int comb_depth = 16;
  std::size_t cap = kDefaultExactCap;

  std::size_t basepoint(std::size_t i) const { return endpoints.at(i).index_of(basepoints.at(i)); }

  std::optional<std::size_t> marked_index(std::size_t u) const {
    for (std::size_t i = 0; i < marked.size(); ++i)
      if (marked[i] == u) return i;
    return std::nullopt;
  }
};

inline FiniteMetricSpace euclidean_grid(const std::vector<std::array<double, 2>>& coords) {
  FiniteMetricSpace h;
  h.dist = DistanceMatrix(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    h.labels.push_back(format_number(coords[i][0]) + "," + format_number(coords[i][1]));
    for (std::size_t j = i + 1; j < coords.size(); ++j)
      h.dist.set_symmetric(i, j, std::hypot(coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]));
  }
  return h;
}

inline void validate_config(const EmbedConfig& cfg) {
  if (cfg.coords.size() != cfg.grid.size())
    throw Error(ErrorCode::invalid_argument, "grid coordinates and distances disagree in size");
  for (const auto& c : cfg.coords)
    if (!(c[0] >= 0.0 && c[0] <= 1.0 && c[1] >= 0.0 && c[1] <= 1.0))
      throw Error(ErrorCode::invalid_argument, "grid coordinates must lie in [0, 1]^2");
  if (cfg.marked.size() < 2) throw Error(ErrorCode::invalid_argument, "need at least two marked points");
  if (cfg.endpoints.size() != cfg.marked.size() || cfg.basepoints.size() != cfg.marked.size())
    throw Error(ErrorCode::invalid_argument, "need one endpoint tree and basepoint per marked point");
  for (std::size_t i = 0; i < cfg.marked.size(); ++i) {
    if (cfg.marked[i] >= cfg.grid.size())
      throw Error(ErrorCode::index_out_of_range, "marked point out of range", {cfg.marked[i]});
    for (std::size_t j = 0; j < i; ++j)
      if (cfg.grid(cfg.marked[i], cfg.marked[j]) <= cfg.tol)
        throw Error(ErrorCode::invalid_argument, "marked points must be distinct", {i, j});
    cfg.basepoint(i);
    if (four_point_defect(cfg.endpoints[i].distances()) > cfg.tol)
      throw Error(ErrorCode::invalid_argument, "endpoint tree is not 0-hyperbolic", {i});
  }
  if (!(diameter(cfg.grid.dist) > 0.0)) throw Error(ErrorCode::invalid_argument, "grid diameter must be positive");
  if (cfg.m < 1) throw Error(ErrorCode::invalid_argument, "branch count m must be positive");
  if (cfg.star_branches < 3) throw Error(ErrorCode::invalid_argument, "need at least 3 star branches");
  if (!(cfg.eps > 0.0)) throw Error(ErrorCode::invalid_argument, "resolution must be positive");
}

struct ScalarFields {
  std::vector<double> sigma;  // ball radius per marked point, may be +inf
  double phi = 0.0;           // in [0, 1/2], zero exactly on marked points
  double xi = 0.0;            // 32 * phi
};

// sigma_i(u) = min_{j != i} d(u, v_j) / d(u, v_i)  (0 at v_j, +inf at v_i)
// phi(u)     = min_i d(u, v_i) / (2 diam H)
inline ScalarFields scalar_fields(const EmbedConfig& cfg, std::size_t u) {
  if (u >= cfg.grid.size()) throw Error(ErrorCode::index_out_of_range, "grid point out of range", {u});
  ScalarFields f;
  const auto& h = cfg.grid;
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cfg.marked.size(); ++i) {
    const double own = h(u, cfg.marked[i]);
    double others = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cfg.marked.size(); ++j)
      if (j != i) others = std::min(others, h(u, cfg.marked[j]));
    double sigma;
    if (others == 0.0) sigma = 0.0;
    else if (own == 0.0) sigma = kInfiniteRadius;
    else sigma = others / own;
    f.sigma.push_back(sigma);
    nearest = std::min(nearest, own);
  }
  f.phi = nearest / (2.0 * diameter(h.dist));
  f.xi = 32.0 * f.phi;
  return f;
}

// Splits the deg<=2 decomposition of x further at every `keep` vertex lying
// inside a segment, so those vertices survive the replacement.
inline Decomposition replacement_segments(const MetricTree& x, const std::vector<std::string>& keep = {}) {
  Decomposition dec = decompose_deg2(x);
  std::vector<Segment> out;
  for (const auto& seg : dec.segments) {
    const auto path = geodesic(dec.tree, seg.a, seg.b);
    std::size_t from = seg.a;
    for (std::size_t k = 1; k + 1 < path.size(); ++k) {
      const auto& id = dec.tree.vertex(path[k]).id;
      if (std::find(keep.begin(), keep.end(), id) != keep.end()) {
        out.push_back({from, path[k], dec.tree.distance(from, path[k])});
        from = path[k];
      }
    }
    out.push_back({from, seg.b, dec.tree.distance(from, seg.b)});
  }
  dec.segments = std::move(out);
  return dec;
}

// Y(s): every decomposition segment [a, b] replaced by the comb B(s) scaled to
// its length, 0_0 glued to a and 1_0 to b.
inline MetricTree replaced_tree(const MetricTree& x, double s, int depth_cap = 16,
                                const std::vector<std::string>& keep = {}) {
  const Decomposition dec = replacement_segments(x, keep);
  ReplacementPlan plan;
  for (const auto& seg : dec.segments) {
    MetricTree comb = comb_tree({s, seg.length, depth_cap});
    const std::size_t alpha = comb.index_of("spine:0");
    const std::size_t beta = comb.index_of("spine:1");
    plan.push_back({seg.a, seg.b, std::move(comb), alpha, beta});
  }
  MetricTree y = replace_edges(dec.tree, plan);
  y.metadata = x.metadata;
  y.metadata["replacement_s"] = format_number(s);
  return y;
}

// The pieces of W(u, k) before gluing.
struct EmbedParts {
  ScalarFields fields;
  std::vector<MetricTree> replaced;  // Y_i(phi(u))
  std::vector<MetricTree> balls;     // Z_i(u, k)
  std::vector<double> star_coeffs;   // rho(u, k)
  MetricTree star;
  MetricTree tree;                   // W(u, k)
};

inline std::vector<double> parameter_sequence(const EmbedConfig& cfg, std::size_t u, int k) {
  return rho_embed(cfg.coords.at(u)[0], cfg.coords.at(u)[1], k, cfg.m, cfg.star_branches);
}

// Builds W(u, k) for u outside the marked points.
inline EmbedParts build_parts(const EmbedConfig& cfg, std::size_t u, int k) {
  if (k < 1 || k > cfg.m) throw Error(ErrorCode::invalid_argument, "branch index k must lie in 1..m");
  if (cfg.marked_index(u)) throw Error(ErrorCode::invalid_argument, "marked points have no wedge construction", {u});
  EmbedParts parts;
  parts.fields = scalar_fields(cfg, u);
  std::vector<PointedTree> pointed;
  for (std::size_t i = 0; i < cfg.endpoints.size(); ++i) {
    MetricTree y = replaced_tree(cfg.endpoints[i], parts.fields.phi, cfg.comb_depth, {cfg.basepoints[i]});
    const std::size_t p = y.index_of(cfg.basepoints[i]);
    MetricTree z = closed_ball_subtree(y, p, parts.fields.sigma[i], cfg.tol);
    const std::size_t pz = z.index_of(cfg.basepoints[i]);
    pointed.push_back({z, pz});
    parts.replaced.push_back(std::move(y));
    parts.balls.push_back(std::move(z));
  }
  parts.star_coeffs = parameter_sequence(cfg, u, k);
  parts.star = star_tree({parts.star_coeffs, parts.fields.xi, cfg.eps});
  pointed.push_back({parts.star, parts.star.index_of(star_vertex_id(0, 1.0))});
  parts.tree = wedge_sum(pointed);
  parts.tree.metadata["generator"] = json_quote("embed");
  parts.tree.metadata["u"] = std::to_string(u);
  parts.tree.metadata["k"] = std::to_string(k);
  parts.tree.metadata["phi"] = format_number(parts.fields.phi);
  parts.tree.metadata["xi"] = format_number(parts.fields.xi);
  return parts;
}

// F(u, k): X_i itself at a marked point v_i, the wedge W(u, k) elsewhere.
inline MetricTree build_F(const EmbedConfig& cfg, std::size_t u, int k) {
  if (k < 1 || k > cfg.m) throw Error(ErrorCode::invalid_argument, "branch index k must lie in 1..m");
  if (u >= cfg.grid.size()) throw Error(ErrorCode::index_out_of_range, "grid point out of range", {u});
  if (auto i = cfg.marked_index(u)) return cfg.endpoints[*i];
  return build_parts(cfg, u, k).tree;
}

struct Fingerprint {
  double xi = 0.0;
  std::vector<double> a;
  double margin = 0.0;
  std::size_t center = 0;
};

// Recovers (xi, a) from the star part of a tree. The two longest deg<=2
// components must be unique, must share their branch endpoint (the centre
// 0_0) and must beat every other component by a positive margin; the
// branches at the centre then give xi (the longest) and a_i = length / xi.
// Components away from the centre must also stay under the comb corner bound
// 1.5 * 2^-n for the band n of xi / 32 (up to tol, since the bound is sharp).
inline Fingerprint star_fingerprint(const MetricTree& t, double tol = kDefaultTol) {
  auto comps = deg2_components(t);
  if (comps.size() < 2) throw Error(ErrorCode::no_certified_star, "fewer than two deg<=2 components");
  std::stable_sort(comps.begin(), comps.end(),
                   [](const Deg2Component& x, const Deg2Component& y) { return x.closure_diameter > y.closure_diameter; });
  const double d1 = comps[0].closure_diameter;
  const double d2 = comps[1].closure_diameter;
  if (d1 - d2 <= tol) throw Error(ErrorCode::ambiguous_star, "longest deg<=2 components tie");
  const double d3 = comps.size() > 2 ? comps[2].closure_diameter : 0.0;
  Fingerprint fp;
  fp.margin = d2 - d3;
  if (fp.margin <= tol) throw Error(ErrorCode::no_certified_star, "second-longest component is not separated");

  auto has = [](const std::vector<std::size_t>& v, std::size_t x) { return std::find(v.begin(), v.end(), x) != v.end(); };
  std::optional<std::size_t> center;
  for (std::size_t c : comps[0].delimiters)
    if (has(comps[1].delimiters, c)) center = c;
  if (!center) throw Error(ErrorCode::no_certified_star, "longest components do not meet at a branch vertex");
  fp.center = *center;

  std::vector<double> legs;
  for (const auto& comp : comps)
    if (has(comp.delimiters, *center)) legs.push_back(comp.closure_diameter);
  std::sort(legs.begin(), legs.end(), std::greater<>());
  fp.xi = legs.front();
  for (std::size_t i = 1; i < legs.size(); ++i) fp.a.push_back(legs[i] / fp.xi);
  if (!in_parameter_cube(fp.a, tol)) throw Error(ErrorCode::no_certified_star, "branch ratios leave the parameter cube");

  const double phi = fp.xi / 32.0;
  if (phi > 0.0 && phi < 1.0) {
    const double corner = 1.5 * pow2(-comb_band(phi, tol));
    for (const auto& comp : comps) {
      if (has(comp.delimiters, *center)) continue;
      if (comp.closure_diameter > corner + tol)
        throw Error(ErrorCode::no_certified_star, "component away from the centre exceeds the comb corner bound");
    }
  }
  return fp;
}

struct GridCell {
  std::size_t u = 0;
  int k = 1;
};

struct InjectivityEntry {
  GridCell cell;
  Fingerprint fingerprint;
  double u1 = 0.0, u2 = 0.0;  // recovered coordinates
  int k = 0;                  // recovered branch index
  double rho_error = 0.0;     // sup |a_hat - rho(u, k)|
  double nearest = std::numeric_limits<double>::infinity();  // tau to closest other cell
};

struct InjectivityReport {
  std::vector<InjectivityEntry> entries;
  std::vector<std::pair<std::size_t, std::size_t>> collisions;  // entry index pairs
  double min_separation = std::numeric_limits<double>::infinity();
  double max_rho_error = 0.0;
  std::vector<int> endpoint_collisions;  // branch k of each endpoint collision
  std::optional<int> selected_k;
  bool all_distinct() const { return collisions.empty(); }
};

inline InjectivityReport injectivity_scan(const EmbedConfig& cfg, const std::vector<GridCell>& cells) {
  for (const auto& c : cells)
    if (cfg.marked_index(c.u)) throw Error(ErrorCode::invalid_argument, "scan grid must avoid marked points", {c.u});
  InjectivityReport report;
  for (const auto& c : cells) {
    InjectivityEntry e;
    e.cell = c;
    e.fingerprint = star_fingerprint(build_F(cfg, c.u, c.k), cfg.tol);
    const auto& a = e.fingerprint.a;
    if (a.size() < 3) throw Error(ErrorCode::no_certified_star, "fingerprint has fewer than 3 coordinates");
    e.u1 = 4.0 * a[0] - 1.0;
    e.u2 = 16.0 * a[1] - 1.0;
    e.k = 1 + static_cast<int>(std::lround((64.0 * a[2] - 1.0) * std::max(1, cfg.m - 1)));
    const auto expected = parameter_sequence(cfg, c.u, c.k);
    e.rho_error = expected.size() == a.size() ? tau(expected, a) : std::numeric_limits<double>::infinity();
    report.max_rho_error = std::max(report.max_rho_error, e.rho_error);
    report.entries.push_back(std::move(e));
  }
  auto& es = report.entries;
  for (std::size_t i = 0; i < es.size(); ++i) {
    for (std::size_t j = i + 1; j < es.size(); ++j) {
      const double sep = tau(es[i].fingerprint.a, es[j].fingerprint.a);
      es[i].nearest = std::min(es[i].nearest, sep);
      es[j].nearest = std::min(es[j].nearest, sep);
      report.min_separation = std::min(report.min_separation, sep);
      if (sep <= cfg.tol) report.collisions.emplace_back(i, j);
    }
  }
  // Endpoints carrying a certified star could coincide with some F(., k).
  for (const auto& x : cfg.endpoints) {
    std::optional<Fingerprint> fx;
    try {
      fx = star_fingerprint(x, cfg.tol);
    } catch (const Error&) {
      continue;
    }
    for (const auto& e : es) {
      if (fx->a.size() == e.fingerprint.a.size() && tau(fx->a, e.fingerprint.a) <= cfg.tol &&
          std::abs(fx->xi - e.fingerprint.xi) <= cfg.tol)
        report.endpoint_collisions.push_back(e.cell.k);
    }
  }
  for (int k = 1; k <= cfg.m; ++k) {
    if (std::find(report.endpoint_collisions.begin(), report.endpoint_collisions.end(), k) ==
        report.endpoint_collisions.end()) {
      report.selected_k = k;
      break;
    }
  }
  return report;
}

struct CellPair {
  std::size_t u = 0;
  std::size_t v = 0;
  int k = 1;
};

// Pieces of the analytic GH modulus between F(u, k) and F(v, k).
struct ContinuityBound {
  double comb = 0.0;  // Hausdorff bound between the two comb replacements
  double ball = 0.0;  // largest change of an effective ball radius
  double star = 0.0;  // pointed distortion bound between the two stars
  double total = 0.0; // GH bound on the wedges
};

// Pointed distortions per wedge part: 2 (2 comb + |r - r'|) for each ball
// part (r the ball radius clipped to the eccentricity of p_i), and
// |xi - xi'| (1 + a_1) + 2 max(xi, xi') tau(a, a') for the star. The wedge
// GH distance is at most half the sum of the two largest.
inline ContinuityBound continuity_bound(const EmbedConfig& cfg, const EmbedParts& p, const EmbedParts& q) {
  ContinuityBound b;
  b.comb = comb_hausdorff_bound(p.fields.phi, q.fields.phi);
  auto effective_radius = [&](const EmbedParts& e, std::size_t i) {
    const auto& y = e.replaced[i];
    const std::size_t base = y.index_of(cfg.basepoints[i]);
    double ecc = 0.0;
    for (double d : y.distances().row(base)) ecc = std::max(ecc, d);
    return std::min(e.fields.sigma[i], ecc);
  };
  std::vector<double> delta;
  for (std::size_t i = 0; i < p.replaced.size(); ++i) {
    const double dr = std::abs(effective_radius(p, i) - effective_radius(q, i));
    b.ball = std::max(b.ball, dr);
    delta.push_back(2.0 * (2.0 * b.comb + dr));
  }
  const double a1 = std::max(p.star_coeffs.front(), q.star_coeffs.front());
  b.star = std::abs(p.fields.xi - q.fields.xi) * (1.0 + a1) +
           2.0 * std::max(p.fields.xi, q.fields.xi) * tau(p.star_coeffs, q.star_coeffs);
  delta.push_back(b.star);
  std::sort(delta.begin(), delta.end(), std::greater<>());
  b.total = 0.5 * (delta[0] + (delta.size() > 1 ? delta[1] : 0.0));
  return b;
}

// Correspondence between samples of two wedges built from the same config,
// following the construction: star points pair up by branch and relative
// position from the centre, points of the i-th ball by distance from the
// wedge point. Each point takes the best partner of its class.
inline Correspondence wedge_correspondence(const EmbedConfig& cfg, const MetricTree& a, const MetricTree& b) {
  const std::size_t star_part = cfg.endpoints.size();
  const std::string star_prefix = std::to_string(star_part) + "/";
  struct Key {
    std::size_t part;
    std::size_t branch;
    double value;
  };
  auto keys = [&](const MetricTree& t) {
    const std::size_t hub = t.index_of("0/" + cfg.basepoints.front());
    const std::size_t centre = t.index_of(star_prefix + star_vertex_id(0, 0.0));
    std::vector<std::size_t> tips{hub};
    for (std::size_t i = 1; i <= cfg.star_branches; ++i) tips.push_back(t.index_of(star_prefix + star_vertex_id(i, 1.0)));
    std::vector<Key> out(t.size());
    for (std::size_t v = 0; v < t.size(); ++v) {
      const auto& id = t.vertex(v).id;
      const std::size_t part = std::stoul(id.substr(0, id.find('/')));
      if (part != star_part && v != hub) {
        out[v] = {part, 0, t.distance(hub, v)};
        continue;
      }
      out[v] = {star_part, 0, 1.0};
      for (std::size_t i = 0; i < tips.size(); ++i) {
        const double len = t.distance(centre, tips[i]);
        if (std::abs(t.distance(centre, v) + t.distance(v, tips[i]) - len) <= cfg.tol * std::max(1.0, len)) {
          out[v] = {star_part, i, len > 0.0 ? t.distance(centre, v) / len : 0.0};
          if (v != centre) break;
        }
      }
      if (v == centre) out[v] = {star_part, 0, 0.0};
    }
    return std::pair{out, hub};
  };
  const auto [ka, hub_a] = keys(a);
  const auto [kb, hub_b] = keys(b);
  // Ties go to a partner with the same vertex id.
  auto match = [&](const Key& k, const std::string& id, const std::vector<Key>& other, const MetricTree& t,
                   std::size_t fallback) {
    std::size_t best = fallback;
    double cost = std::numeric_limits<double>::infinity();
    bool same_id = false;
    for (std::size_t j = 0; j < other.size(); ++j) {
      const Key& o = other[j];
      if (o.part != k.part) continue;
      if (k.part == star_part && o.branch != k.branch && o.value != 0.0 && k.value != 0.0) continue;
      const double c = std::abs(o.value - k.value);
      const bool same = t.vertex(j).id == id;
      if (c < cost || (c == cost && same && !same_id)) {
        cost = c;
        best = j;
        same_id = same;
      }
    }
    return best;
  };
  Correspondence r;
  for (std::size_t x = 0; x < ka.size(); ++x) r.pairs.emplace_back(x, match(ka[x], a.vertex(x).id, kb, b, hub_b));
  for (std::size_t y = 0; y < kb.size(); ++y) r.pairs.emplace_back(match(kb[y], b.vertex(y).id, ka, a, hub_a), y);
  r.normalize();
  return r;
}

struct ContinuityRow {
  CellPair pair;
  ContinuityBound bound;
  GHInterval interval;
  double allowed = 0.0;  // bound.total + 2 eps
  bool ok = false;       // interval.hi <= allowed + tol
  double margin() const { return allowed - interval.hi; }
};

inline std::vector<ContinuityRow> continuity_scan(const EmbedConfig& cfg, const std::vector<CellPair>& pairs) {
  std::vector<ContinuityRow> rows;
  for (const auto& pr : pairs) {
    if (cfg.marked_index(pr.u) || cfg.marked_index(pr.v))
      throw Error(ErrorCode::invalid_argument, "continuity pairs must avoid marked points", {pr.u, pr.v});
    const EmbedParts p = build_parts(cfg, pr.u, pr.k);
    const EmbedParts q = pr.u == pr.v ? p : build_parts(cfg, pr.v, pr.k);
    ContinuityRow row;
    row.pair = pr;
    row.bound = continuity_bound(cfg, p, q);
    row.interval = gh_tree_interval(p.tree, q.tree, cfg.eps, cfg.cap, [&](const MetricTree& a, const MetricTree& b) {
      return wedge_correspondence(cfg, a, b);
    });
    row.allowed = row.bound.total + 2.0 * cfg.eps;
    row.ok = row.interval.hi <= row.allowed + cfg.tol;
    rows.push_back(std::move(row));
  }
  return rows;
}

struct PathStep {
  double s = 0.0;
  MetricTree tree;
  std::optional<double> hi;     // GH upper estimate to the previous step
  std::optional<double> bound;  // comb Hausdorff bound to the previous step
};

// Y(s) along a grid of replacement parameters, with GH estimates between
// consecutive steps.
inline std::vector<PathStep> replacement_path(const MetricTree& x, const std::vector<double>& s_grid, double eps,
                                              std::size_t cap = kDefaultExactCap, int depth_cap = 16) {
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    if (!(s_grid[i] >= 0.0 && s_grid[i] <= 1.0)) throw Error(ErrorCode::invalid_argument, "s values must lie in [0, 1]");
    if (i > 0 && s_grid[i] < s_grid[i - 1]) throw Error(ErrorCode::invalid_argument, "s grid must be sorted");
  }
  std::vector<PathStep> steps;
  for (double s : s_grid) {
    PathStep step;
    step.s = s;
    step.tree = replaced_tree(x, s, depth_cap);
    if (!steps.empty()) {
      step.hi = gh_tree_interval(steps.back().tree, step.tree, eps, cap).hi;
      step.bound = comb_hausdorff_bound(steps.back().s, s);
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

}  // namespace ghtree
