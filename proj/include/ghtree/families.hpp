#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ghtree/error.hpp"
#include "ghtree/tree.hpp"

namespace ghtree {

inline double pow2(int e) { return std::ldexp(1.0, e); }

// Cut-off c_n: 1 up to 2^-(n+1), linear down to 0 at 2^-n, 0 beyond.
inline double c_fun(int n, double s) {
  const double lo = pow2(-(n + 1));
  const double hi = pow2(-n);
  if (s <= lo) return 1.0;
  if (s >= hi) return 0.0;
  return pow2(n + 1) * (hi - s);
}

// The dyadic band n with 2^-(n+1) <= s < 2^-n, for s in (0, 1).
inline int dyadic_band(double s) {
  if (!(s > 0.0) || s >= 1.0) throw Error(ErrorCode::invalid_argument, "dyadic band needs s in (0, 1)");
  int n = 0;
  while (s < pow2(-(n + 1))) ++n;
  return n;
}

// dyadic_band, except that s within rounding below 2^-n (teeth of band n no
// longer than tol) counts as band n - 1, matching the comb actually built.
inline int comb_band(double s, double tol = kDefaultTol) {
  const int n = dyadic_band(s);
  if (n > 0 && s * c_fun(n, s) <= tol) return n - 1;
  return n;
}

// A point x_s of the comb universe I x I: position x on the spine, height s.
struct CombPoint {
  double x = 0.0;
  double h = 0.0;
};

// Comb metric: vertical distance on a common tooth, otherwise down, across
// the spine and up.
inline double comb_dist(CombPoint p, CombPoint q) {
  if (p.x == q.x) return std::abs(p.h - q.h);
  return p.h + std::abs(p.x - q.x) + q.h;
}

struct CombParams {
  double s = 0.0;
  double scale = 1.0;
  int depth_cap = 16;
};

namespace detail {

inline void check_comb(const CombParams& p) {
  if (!(p.s >= 0.0 && p.s <= 1.0)) throw Error(ErrorCode::invalid_argument, "comb parameter s must lie in [0, 1]");
  if (!(p.scale > 0.0 && p.scale <= 1.0 + kDefaultTol))
    throw Error(ErrorCode::invalid_argument, "comb scale must lie in (0, 1]");
  if (p.depth_cap < 1 || p.depth_cap > 40) throw Error(ErrorCode::invalid_argument, "comb depth cap must be in 1..40");
}

// Deepest generation kept: the largest n <= cap with s c_n(s) > tol, or -1.
inline int comb_top_generation(const CombParams& p) {
  if (p.s == 0.0) return -1;
  int top = -1;
  while (top + 1 <= p.depth_cap && p.s < pow2(-(top + 1))) ++top;
  if (top >= 0 && p.s * c_fun(top, p.s) <= kDefaultTol) --top;
  return top;
}

// Smallest n with x in I_n, i.e. x * 2^(n+1) integral.
inline int comb_generation(std::size_t m, int top) {
  // x = m / 2^(top+1)
  int g = top;
  while (g > 0 && m % 2 == 0) {
    m /= 2;
    --g;
  }
  return g;
}

}  // namespace detail

// Points of B(s) carried by vertices: spine points of every kept generation
// and the tooth tips above them, in universe coordinates (unscaled).
struct CombLayout {
  std::vector<double> spine;       // increasing positions
  std::vector<double> tooth;       // tooth height above each spine position (0: none)
  int top_generation = -1;
  double truncation_error = 0.0;   // Hausdorff error from dropped generations
};

inline CombLayout comb_layout(const CombParams& p) {
  detail::check_comb(p);
  CombLayout layout;
  const int top = detail::comb_top_generation(p);
  layout.top_generation = top;
  const std::size_t count = std::size_t{1} << (top + 1);
  for (std::size_t m = 0; m <= count; ++m) {
    layout.spine.push_back(static_cast<double>(m) / static_cast<double>(count));
    double h = 0.0;
    if (top >= 0) h = p.s * c_fun(detail::comb_generation(m, top), p.s);
    layout.tooth.push_back(h);
  }
  if (p.s > 0.0 && p.s < pow2(-(p.depth_cap + 1))) layout.truncation_error = p.scale * p.s;
  return layout;
}

// Comb tree B(s) scaled by `scale`: spine 0_0 .. 1_0 with a tooth at every
// kept attachment point. Vertex ids "spine:x" and "tooth:x"; tooth labels
// "tooth:x:h" with unscaled coordinates.
inline MetricTree comb_tree(const CombParams& p) {
  const CombLayout layout = comb_layout(p);
  std::vector<Vertex> vertices;
  std::vector<CombPoint> where;
  std::vector<Edge> edges;
  for (std::size_t k = 0; k < layout.spine.size(); ++k) {
    const std::string x = format_number(layout.spine[k]);
    vertices.push_back({"spine:" + x, "spine:" + x});
    where.push_back({layout.spine[k], 0.0});
    if (k > 0) edges.push_back({k - 1, k, p.scale * (layout.spine[k] - layout.spine[k - 1])});
  }
  for (std::size_t k = 0; k < layout.spine.size(); ++k) {
    if (!(layout.tooth[k] > 0.0)) continue;
    const std::string x = format_number(layout.spine[k]);
    edges.push_back({k, vertices.size(), p.scale * layout.tooth[k]});
    vertices.push_back({"tooth:" + x, "tooth:" + x + ":" + format_number(layout.tooth[k])});
    where.push_back({layout.spine[k], layout.tooth[k]});
  }
  DistanceMatrix d(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i)
    for (std::size_t j = i + 1; j < vertices.size(); ++j) d.set_symmetric(i, j, p.scale * comb_dist(where[i], where[j]));
  MetricTree t = detail::assemble(std::move(vertices), std::move(edges), std::move(d));
  t.metadata["generator"] = json_quote("comb");
  t.metadata["s"] = format_number(p.s);
  t.metadata["scale"] = format_number(p.scale);
  t.metadata["depth_cap"] = std::to_string(p.depth_cap);
  t.metadata["truncation_error"] = format_number(layout.truncation_error);
  return t;
}

// An eps-dense sample of B(s) in universe coordinates: every vertex point
// plus evenly spaced points along spine gaps and teeth.
inline std::vector<CombPoint> comb_samples(const CombParams& p, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::invalid_argument, "sampling resolution must be positive");
  const CombLayout layout = comb_layout(p);
  auto pieces = [&](double len) {
    return static_cast<std::size_t>(std::max(1.0, std::ceil(len / eps - 1e-9)));
  };
  std::vector<CombPoint> out;
  for (std::size_t k = 0; k < layout.spine.size(); ++k) {
    const double x = layout.spine[k];
    out.push_back({x, 0.0});
    if (k + 1 < layout.spine.size()) {
      const double gap = layout.spine[k + 1] - x;
      const std::size_t q = pieces(gap);
      for (std::size_t j = 1; j < q; ++j) out.push_back({x + gap * static_cast<double>(j) / static_cast<double>(q), 0.0});
    }
    const double h = layout.tooth[k];
    if (h > 0.0) {
      const std::size_t q = pieces(h);
      for (std::size_t j = 1; j <= q; ++j) out.push_back({x, h * static_cast<double>(j) / static_cast<double>(q)});
    }
  }
  return out;
}

// Hausdorff bound between B(s) and B(t) in the comb universe, where one is
// available: t when s = 0; max_{i<=n+1} |s c_i(s) - t c_i(t)| when s lies in
// band n and |s - t| < 2^-(n+2).
inline std::optional<double> comb_continuity_bound(double s, double t) {
  if (s == 0.0) return t;
  if (!(s > 0.0) || s >= 1.0) return std::nullopt;
  const int n = dyadic_band(s);
  if (!(std::abs(s - t) < pow2(-(n + 2)))) return std::nullopt;
  double worst = 0.0;
  for (int i = 0; i <= n + 1; ++i) worst = std::max(worst, std::abs(s * c_fun(i, s) - t * c_fun(i, t)));
  return worst;
}

// Always-valid Hausdorff bound: both combs lie within max(s, t) of the
// common spine, so the band bound is used when it applies and this otherwise.
inline double comb_hausdorff_bound(double s, double t) {
  if (s == t) return 0.0;
  double best = std::max(s, t);
  if (auto b = comb_continuity_bound(s, t)) best = std::min(best, *b);
  if (auto b = comb_continuity_bound(t, s)) best = std::min(best, *b);
  return best;
}

// Star parameters: the truncated sequence a_1..a_N (a_0 = 1 is implicit),
// overall scale K and the subdivision resolution of each branch.
struct StarParams {
  std::vector<double> a;
  double scale = 1.0;
  double resolution = 0.25;

  std::size_t branches() const noexcept { return a.size(); }
  // a_i with the supplemental a_0 = 1.
  double coefficient(std::size_t i) const { return i == 0 ? 1.0 : a.at(i - 1); }
};

// Whether a lies in the truncated parameter cube: a_i in [2^-2i, 2^-2i+1].
inline bool in_parameter_cube(const std::vector<double>& a, double tol = kDefaultTol) {
  for (std::size_t i = 1; i <= a.size(); ++i) {
    const int e = static_cast<int>(2 * i);
    if (a[i - 1] < pow2(-e) - tol || a[i - 1] > pow2(1 - e) + tol) return false;
  }
  return true;
}

namespace detail {
inline void check_star(const StarParams& p) {
  if (p.a.empty()) throw Error(ErrorCode::invalid_argument, "star needs at least one branch coefficient");
  if (!in_parameter_cube(p.a)) throw Error(ErrorCode::invalid_argument, "star coefficients leave [2^-2i, 2^-2i+1]");
  if (!(p.scale >= 0.0) || !std::isfinite(p.scale)) throw Error(ErrorCode::invalid_argument, "star scale must be >= 0");
  if (!(p.resolution > 0.0)) throw Error(ErrorCode::invalid_argument, "star resolution must be positive");
}
}  // namespace detail

// A point s_i of the star: parameter s in [0, 1] along branch i. Every point
// with s = 0 is the centre 0_0.
struct StarPoint {
  double s = 0.0;
  std::size_t branch = 0;
};

// K * R[a]. Points on one branch are |s - t| apart scaled by a_i; otherwise
// the path runs through the centre.
inline double star_metric(const StarParams& p, StarPoint x, StarPoint y) {
  if (x.branch > p.branches() || y.branch > p.branches())
    throw Error(ErrorCode::index_out_of_range, "star branch index out of range", {x.branch, y.branch});
  if (x.branch == y.branch) return p.scale * (p.coefficient(x.branch) * std::abs(x.s - y.s));
  return p.scale * (p.coefficient(x.branch) * x.s + p.coefficient(y.branch) * y.s);
}

inline std::string star_vertex_id(std::size_t branch, double s) {
  if (s == 0.0) return "branch:0:0";
  return "branch:" + std::to_string(branch) + ":" + format_number(s);
}

// Centre 0_0 with branches 0..N of length K * a_i, each split into pieces of
// length <= resolution. K = 0 collapses to the centre alone.
inline MetricTree star_tree(const StarParams& p) {
  detail::check_star(p);
  std::vector<Vertex> vertices{{star_vertex_id(0, 0.0), star_vertex_id(0, 0.0)}};
  std::vector<StarPoint> where{{0.0, 0}};
  std::vector<Edge> edges;
  if (p.scale > 0.0) {
    for (std::size_t i = 0; i <= p.branches(); ++i) {
      const double len = p.scale * p.coefficient(i);
      const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil(len / p.resolution - 1e-9)));
      std::size_t prev = 0;
      double prev_s = 0.0;
      for (std::size_t k = 1; k <= pieces; ++k) {
        const double s = static_cast<double>(k) / static_cast<double>(pieces);
        const std::string id = star_vertex_id(i, s);
        vertices.push_back({id, id});
        where.push_back({s, i});
        edges.push_back({prev, vertices.size() - 1, len * (s - prev_s)});
        prev = vertices.size() - 1;
        prev_s = s;
      }
    }
  }
  DistanceMatrix d(vertices.size());
  for (std::size_t x = 0; x < vertices.size(); ++x)
    for (std::size_t y = x + 1; y < vertices.size(); ++y) d.set_symmetric(x, y, star_metric(p, where[x], where[y]));
  MetricTree t = detail::assemble(std::move(vertices), std::move(edges), std::move(d));
  t.metadata["generator"] = json_quote("star");
  t.metadata["scale"] = format_number(p.scale);
  t.metadata["branches"] = std::to_string(p.branches());
  t.metadata["resolution"] = format_number(p.resolution);
  return t;
}

// sup-distance between truncated sequences.
inline double tau(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::invalid_argument, "tau needs sequences of equal length");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Parameter embedding (u1, u2, k) -> cube: the first three coordinates are
// affine in u1, u2 and the branch index; the tail sits at interval midpoints.
inline std::vector<double> rho_embed(double u1, double u2, int k, int m, std::size_t n_coords) {
  if (m < 1 || k < 1 || k > m) throw Error(ErrorCode::invalid_argument, "branch index k must lie in 1..m");
  if (!(u1 >= 0.0 && u1 <= 1.0 && u2 >= 0.0 && u2 <= 1.0))
    throw Error(ErrorCode::invalid_argument, "parameter coordinates must lie in [0, 1]");
  if (n_coords < 3) throw Error(ErrorCode::invalid_argument, "the embedding needs at least 3 coordinates");
  std::vector<double> a(n_coords);
  a[0] = pow2(-2) * (1.0 + u1);
  a[1] = pow2(-4) * (1.0 + u2);
  a[2] = pow2(-6) * (1.0 + static_cast<double>(k - 1) / static_cast<double>(std::max(1, m - 1)));
  for (std::size_t i = 4; i <= n_coords; ++i) a[i - 1] = 1.5 * pow2(-2 * static_cast<int>(i));
  return a;
}

}  // namespace ghtree
