#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "ghtree/error.hpp"
#include "ghtree/metric_space.hpp"
#include "ghtree/tree.hpp"

namespace ghtree {

// A relation between point indices of X (first) and Y (second).
struct Correspondence {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  void normalize() {
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  }
};

inline void check_covering(std::size_t nx, std::size_t ny, const Correspondence& r) {
  std::vector<char> hit_x(nx, 0), hit_y(ny, 0);
  for (auto [i, j] : r.pairs) {
    if (i >= nx || j >= ny) throw Error(ErrorCode::index_out_of_range, "correspondence index out of range", {i, j});
    hit_x[i] = hit_y[j] = 1;
  }
  for (std::size_t i = 0; i < nx; ++i)
    if (!hit_x[i]) throw Error(ErrorCode::not_covering, "point " + std::to_string(i) + " of X is uncovered", {i});
  for (std::size_t j = 0; j < ny; ++j)
    if (!hit_y[j]) throw Error(ErrorCode::not_covering, "point " + std::to_string(j) + " of Y is uncovered", {j});
}

// max over related pairs (i,j), (i',j') of |dX(i,i') - dY(j,j')|.
inline double distortion(const DistanceMatrix& dx, const DistanceMatrix& dy, const Correspondence& r) {
  check_covering(dx.size(), dy.size(), r);
  double worst = 0.0;
  for (std::size_t p = 0; p < r.pairs.size(); ++p) {
    const auto [i, j] = r.pairs[p];
    for (std::size_t q = p + 1; q < r.pairs.size(); ++q) {
      const auto [k, l] = r.pairs[q];
      worst = std::max(worst, std::abs(dx(i, k) - dy(j, l)));
    }
  }
  return worst;
}

inline double distortion(const FiniteMetricSpace& x, const FiniteMetricSpace& y, const Correspondence& r) {
  return distortion(x.dist, y.dist, r);
}

struct LowerBound {
  double value = 0.0;
  std::string name;  // "diameter" or "eccentricity"
};

// Half the larger of the diameter gap and the Hausdorff distance between the
// eccentricity value sets. Related points of a correspondence with distortion
// delta have eccentricities within delta, so both never exceed the GH value.
inline LowerBound gh_lower_bound_detail(const DistanceMatrix& dx, const DistanceMatrix& dy) {
  const double diam_gap = std::abs(diameter(dx) - diameter(dy));
  const auto ex = eccentricities(dx);
  const auto ey = eccentricities(dy);
  auto directed = [](const std::vector<double>& from, const std::vector<double>& to) {
    double worst = 0.0;
    for (double a : from) {
      double nearest = std::numeric_limits<double>::infinity();
      for (double b : to) nearest = std::min(nearest, std::abs(a - b));
      worst = std::max(worst, nearest);
    }
    return worst;
  };
  double ecc_gap = 0.0;
  if (!ex.empty() && !ey.empty()) ecc_gap = std::max(directed(ex, ey), directed(ey, ex));
  if (ecc_gap > diam_gap) return {0.5 * ecc_gap, "eccentricity"};
  return {0.5 * diam_gap, "diameter"};
}

inline double gh_lower_bound(const DistanceMatrix& dx, const DistanceMatrix& dy) {
  return gh_lower_bound_detail(dx, dy).value;
}
inline double gh_lower_bound(const FiniteMetricSpace& x, const FiniteMetricSpace& y) {
  return gh_lower_bound(x.dist, y.dist);
}

inline double gh_upper_bound(const DistanceMatrix& dx, const DistanceMatrix& dy, const Correspondence& r) {
  return 0.5 * distortion(dx, dy, r);
}
inline double gh_upper_bound(const FiniteMetricSpace& x, const FiniteMetricSpace& y, const Correspondence& r) {
  return gh_upper_bound(x.dist, y.dist, r);
}

inline constexpr std::size_t kGreedyAnchors = 64;

// Greedy correspondence: X points in decreasing eccentricity take the Y point
// that agrees best with the first `anchors` pairs chosen (ties: nearest
// eccentricity, then nearest index); uncovered Y points are then attached the
// same way. The anchor limit keeps the cost quadratic on large samples.
inline Correspondence greedy_correspondence(const DistanceMatrix& dx, const DistanceMatrix& dy,
                                           std::size_t anchors = kGreedyAnchors) {
  const std::size_t nx = dx.size(), ny = dy.size();
  Correspondence r;
  if (nx == 0 || ny == 0) return r;
  const auto ex = eccentricities(dx);
  const auto ey = eccentricities(dy);
  auto by_ecc = [](const std::vector<double>& e) {
    std::vector<std::size_t> order(e.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return e[a] > e[b]; });
    return order;
  };
  auto gap = [](std::size_t a, std::size_t b) { return a > b ? a - b : b - a; };
  std::vector<double> cost;

  std::vector<char> covered(ny, 0);
  for (std::size_t x : by_ecc(ex)) {
    cost.assign(ny, 0.0);
    for (std::size_t p = 0; p < std::min(anchors, r.pairs.size()); ++p)
      for (std::size_t y = 0, px = r.pairs[p].first, py = r.pairs[p].second; y < ny; ++y) cost[y] = std::max(cost[y], std::abs(dx(x, px) - dy(y, py)));
    std::size_t best = 0;
    for (std::size_t y = 1; y < ny; ++y) {
      const double de = std::abs(ex[x] - ey[y]), db = std::abs(ex[x] - ey[best]);
      if (cost[y] < cost[best] || (cost[y] == cost[best] && (de < db || (de == db && gap(x, y) < gap(x, best)))))
        best = y;
    }
    r.pairs.emplace_back(x, best);
    covered[best] = 1;
  }
  for (std::size_t y : by_ecc(ey)) {
    if (covered[y]) continue;
    cost.assign(nx, 0.0);
    for (std::size_t p = 0; p < std::min(anchors, r.pairs.size()); ++p)
      for (std::size_t x = 0, px = r.pairs[p].first, py = r.pairs[p].second; x < nx; ++x) cost[x] = std::max(cost[x], std::abs(dx(x, px) - dy(y, py)));
    std::size_t best = 0;
    for (std::size_t x = 1; x < nx; ++x) {
      const double de = std::abs(ex[x] - ey[y]), db = std::abs(ex[best] - ey[y]);
      if (cost[x] < cost[best] || (cost[x] == cost[best] && (de < db || (de == db && gap(x, y) < gap(best, y)))))
        best = x;
    }
    r.pairs.emplace_back(best, y);
  }
  r.normalize();
  return r;
}

struct GHExact {
  double value = 0.0;
  Correspondence witness;
};

namespace detail {

// Depth-first search over minimal correspondences: every X point picks one
// partner (phase 1), then every Y point left uncovered picks one (phase 2).
// Each partial relation is kept only while its distortion stays within the
// bound and every point still missing a partner has a compatible candidate.
class CorrespondenceSearch {
 public:
  CorrespondenceSearch(const DistanceMatrix& dx, const DistanceMatrix& dy) : dx_(dx), dy_(dy) {}

  // Finds a relation with distortion < bound (strict) or <= bound.
  // Candidates are tried in increasing index order unless `greedy_order`.
  bool run(double bound, bool strict, bool greedy_order, std::uint64_t node_budget) {
    bound_ = bound;
    strict_ = strict;
    greedy_order_ = greedy_order;
    budget_ = node_budget;
    nodes_ = 0;
    exhausted_ = false;
    pairs_.clear();
    cover_y_.assign(dy_.size(), 0);
    found_ = false;
    descend_x(0, 0.0);
    return found_;
  }

  bool exhausted() const noexcept { return exhausted_; }
  double found_value() const noexcept { return found_value_; }
  const Correspondence& found() const noexcept { return result_; }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  bool fits(double value) const { return strict_ ? value < bound_ : value <= bound_; }

  double pair_cost(std::size_t x, std::size_t y) const {
    double worst = 0.0;
    for (auto [px, py] : pairs_) worst = std::max(worst, std::abs(dx_(x, px) - dy_(y, py)));
    return worst;
  }

  // Every X point without a partner, and every uncovered Y point, must still
  // have a compatible candidate.
  bool consistent(std::size_t next_x) const {
    for (std::size_t x = next_x; x < dx_.size(); ++x) {
      bool any = false;
      for (std::size_t y = 0; y < dy_.size() && !any; ++y) any = fits(pair_cost(x, y));
      if (!any) return false;
    }
    for (std::size_t y = 0; y < dy_.size(); ++y) {
      if (cover_y_[y]) continue;
      bool any = false;
      for (std::size_t x = 0; x < dx_.size() && !any; ++x) any = fits(pair_cost(x, y));
      if (!any) return false;
    }
    return true;
  }

  bool tick() {
    if (++nodes_ > budget_) {
      exhausted_ = true;
      return false;
    }
    return true;
  }

  std::vector<std::pair<double, std::size_t>> candidates(std::size_t fixed, bool fixed_is_x) const {
    std::vector<std::pair<double, std::size_t>> out;
    const std::size_t count = fixed_is_x ? dy_.size() : dx_.size();
    for (std::size_t c = 0; c < count; ++c) {
      const double cost = fixed_is_x ? pair_cost(fixed, c) : pair_cost(c, fixed);
      if (fits(cost)) out.emplace_back(cost, c);
    }
    if (greedy_order_) std::stable_sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.first < b.first; });
    return out;
  }

  void descend_x(std::size_t x, double current) {
    if (found_ || exhausted_) return;
    if (x == dx_.size()) {
      descend_y(0, current);
      return;
    }
    for (auto [cost, y] : candidates(x, true)) {
      if (found_ || !tick()) return;
      pairs_.emplace_back(x, y);
      ++cover_y_[y];
      if (consistent(x + 1)) descend_x(x + 1, std::max(current, cost));
      --cover_y_[y];
      pairs_.pop_back();
    }
  }

  void descend_y(std::size_t y, double current) {
    if (found_ || exhausted_) return;
    while (y < dy_.size() && cover_y_[y]) ++y;
    if (y == dy_.size()) {
      found_ = true;
      found_value_ = current;
      result_.pairs = pairs_;
      result_.normalize();
      return;
    }
    for (auto [cost, x] : candidates(y, false)) {
      if (found_ || !tick()) return;
      pairs_.emplace_back(x, y);
      ++cover_y_[y];
      if (consistent(dx_.size())) descend_y(y + 1, std::max(current, cost));
      --cover_y_[y];
      pairs_.pop_back();
    }
  }

  const DistanceMatrix& dx_;
  const DistanceMatrix& dy_;
  double bound_ = 0.0;
  bool strict_ = true;
  bool greedy_order_ = true;
  std::uint64_t budget_ = 0;
  std::uint64_t nodes_ = 0;
  bool exhausted_ = false;
  bool found_ = false;
  double found_value_ = 0.0;
  Correspondence result_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<int> cover_y_;
};

}  // namespace detail

inline constexpr std::size_t kDefaultExactCap = 8;

// Exact GH distance (half the minimum distortion) by branch and bound. The
// witness is the first minimiser in lexicographic search order (X points in
// index order, candidates by increasing index); if that search exceeds its
// node budget the minimiser found while optimising is reported instead.
inline GHExact gh_exact_detail(const DistanceMatrix& dx, const DistanceMatrix& dy,
                               std::size_t cap = kDefaultExactCap) {
  if (dx.size() > cap || dy.size() > cap) {
    throw Error(ErrorCode::size_cap_exceeded,
                "exact GH limited to " + std::to_string(cap) + " points per space (got " +
                    std::to_string(dx.size()) + " and " + std::to_string(dy.size()) + ")");
  }
  if (dx.size() == 0 || dy.size() == 0) throw Error(ErrorCode::invalid_argument, "spaces must be non-empty");
  const double floor = 2.0 * gh_lower_bound(dx, dy);
  Correspondence best = greedy_correspondence(dx, dy);
  double best_value = distortion(dx, dy, best);

  detail::CorrespondenceSearch search(dx, dy);
  constexpr std::uint64_t kUnbounded = std::numeric_limits<std::uint64_t>::max();
  while (best_value > floor && search.run(best_value, /*strict=*/true, /*greedy_order=*/true, kUnbounded)) {
    best = search.found();
    best_value = distortion(dx, dy, best);
  }
  if (search.run(best_value, /*strict=*/false, /*greedy_order=*/false, 2'000'000)) {
    best = search.found();
  }
  return {0.5 * best_value, best};
}

inline double gh_exact(const DistanceMatrix& dx, const DistanceMatrix& dy, std::size_t cap = kDefaultExactCap) {
  return gh_exact_detail(dx, dy, cap).value;
}
inline double gh_exact(const FiniteMetricSpace& x, const FiniteMetricSpace& y, std::size_t cap = kDefaultExactCap) {
  return gh_exact(x.dist, y.dist, cap);
}

struct GHInterval {
  double lo = 0.0;
  double hi = 0.0;
  std::string lo_witness;  // "exact", "diameter" or "eccentricity"
  Correspondence hi_witness;
  double slack = 0.0;
  std::size_t sample_sizes[2] = {0, 0};
};

// Optional extra candidate for the upper bound, built on the two samples.
using CorrespondenceHint = std::function<Correspondence(const MetricTree&, const MetricTree&)>;

// Certified interval for GH between the continua of two trees: both are
// sampled at resolution eps, then solved exactly when both samples have at
// most `cap` points and bounded otherwise; eps is added on either side. In
// the bounded case the upper bound uses the better of the greedy
// correspondence and the hint.
inline GHInterval gh_tree_interval(const MetricTree& t1, const MetricTree& t2, double eps,
                                   std::size_t cap = kDefaultExactCap, const CorrespondenceHint& hint = {}) {
  if (!(eps > 0.0)) throw Error(ErrorCode::invalid_argument, "sampling resolution must be positive");
  const MetricTree s1 = subdivide(t1, eps);
  const MetricTree s2 = subdivide(t2, eps);
  GHInterval out;
  out.slack = eps;
  out.sample_sizes[0] = s1.size();
  out.sample_sizes[1] = s2.size();
  if (s1.size() <= cap && s2.size() <= cap) {
    const GHExact exact = gh_exact_detail(s1.distances(), s2.distances(), cap);
    out.lo = std::max(0.0, exact.value - eps);
    out.hi = exact.value + eps;
    out.lo_witness = "exact";
    out.hi_witness = exact.witness;
    return out;
  }
  const LowerBound lb = gh_lower_bound_detail(s1.distances(), s2.distances());
  out.lo = std::max(0.0, lb.value - eps);
  out.lo_witness = lb.name;
  out.hi_witness = greedy_correspondence(s1.distances(), s2.distances());
  double best = distortion(s1.distances(), s2.distances(), out.hi_witness);
  if (hint) {
    Correspondence r = hint(s1, s2);
    r.normalize();
    const double d = distortion(s1.distances(), s2.distances(), r);
    if (d < best) {
      best = d;
      out.hi_witness = std::move(r);
    }
  }
  out.hi = 0.5 * best + eps;
  return out;
}

}  // namespace ghtree
