#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ghtree/error.hpp"

namespace ghtree {

// Dense square matrix of pairwise distances, row-major.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  // Rows must form a square matrix.
  static DistanceMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    DistanceMatrix m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) {
        throw Error(ErrorCode::not_square,
                    "row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                        " entries, expected " + std::to_string(rows.size()),
                    {i});
      }
      std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * m.n_));
    }
    return m;
  }

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }

  std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * n_, n_}; }

  // Writes both (i,j) and (j,i) so symmetry is exact.
  void set_symmetric(std::size_t i, std::size_t j, double value) noexcept {
    (*this)(i, j) = value;
    (*this)(j, i) = value;
  }

  friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct FiniteMetricSpace {
  std::vector<std::string> labels;
  DistanceMatrix dist;

  std::size_t size() const noexcept { return dist.size(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return dist(i, j); }
};

// Builds a space with labels "0", "1", ... from a square row list.
inline FiniteMetricSpace make_space(const std::vector<std::vector<double>>& rows) {
  FiniteMetricSpace space;
  space.dist = DistanceMatrix::from_rows(rows);
  space.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) space.labels.push_back(std::to_string(i));
  return space;
}

enum class Violation { none, identity, symmetry, positivity, triangle };

inline const char* to_string(Violation v) {
  switch (v) {
    case Violation::none: return "none";
    case Violation::identity: return "identity";
    case Violation::symmetry: return "symmetry";
    case Violation::positivity: return "positivity";
    case Violation::triangle: return "triangle";
  }
  return "unknown";
}

struct ValidationReport {
  bool ok = true;
  double worst_violation = 0.0;
  Violation kind = Violation::none;
  // identity: {i}; symmetry/positivity: {i, j}; triangle: {i, j, k} meaning
  // d(i,j) > d(i,k) + d(k,j).
  std::vector<std::size_t> witness;
};

// Reports the largest violation of the metric axioms. A distinct pair closer
// than tol counts as a positivity violation of size 2*tol - d, which exceeds
// tol exactly when d < tol.
inline ValidationReport validate_metric(const DistanceMatrix& d, double tol = kDefaultTol) {
  ValidationReport report;
  const std::size_t n = d.size();
  auto consider = [&](double amount, Violation kind, std::vector<std::size_t> witness) {
    if (amount > report.worst_violation) {
      report.worst_violation = amount;
      report.kind = kind;
      report.witness = std::move(witness);
    }
  };
  for (std::size_t i = 0; i < n; ++i) consider(std::abs(d(i, i)), Violation::identity, {i});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      consider(std::abs(d(i, j) - d(j, i)), Violation::symmetry, {i, j});
      const double closest = std::min(d(i, j), d(j, i));
      if (closest < tol) consider(2.0 * tol - closest, Violation::positivity, {i, j});
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        consider(d(i, j) - d(i, k) - d(k, j), Violation::triangle, {i, j, k});
      }
    }
  }
  report.ok = report.worst_violation <= tol;
  if (report.ok) {
    report.kind = Violation::none;
    report.witness.clear();
  }
  return report;
}

inline ValidationReport validate_metric(const std::vector<std::vector<double>>& rows,
                                        double tol = kDefaultTol) {
  return validate_metric(DistanceMatrix::from_rows(rows), tol);
}

namespace detail {

inline void check_subset(const FiniteMetricSpace& m, std::span<const std::size_t> subset,
                         const char* what) {
  if (subset.empty()) throw Error(ErrorCode::empty_subset, std::string(what) + " is empty");
  for (std::size_t idx : subset) {
    if (idx >= m.size()) {
      throw Error(ErrorCode::index_out_of_range,
                  std::string(what) + " index " + std::to_string(idx) + " out of range", {idx});
    }
  }
}

}  // namespace detail

// Submatrix on `subset`, in the given order, labels preserved.
inline FiniteMetricSpace restrict_to(const FiniteMetricSpace& m, std::span<const std::size_t> subset) {
  detail::check_subset(m, subset, "subset");
  FiniteMetricSpace out;
  out.dist = DistanceMatrix(subset.size());
  out.labels.reserve(subset.size());
  for (std::size_t a = 0; a < subset.size(); ++a) {
    out.labels.push_back(subset[a] < m.labels.size() ? m.labels[subset[a]] : std::to_string(subset[a]));
    for (std::size_t b = 0; b < subset.size(); ++b) out.dist(a, b) = m(subset[a], subset[b]);
  }
  return out;
}

// max(sup_a inf_b d(a,b), sup_b inf_a d(a,b)) for index subsets of one space.
inline double hausdorff_distance(const FiniteMetricSpace& m, std::span<const std::size_t> a,
                                 std::span<const std::size_t> b) {
  detail::check_subset(m, a, "first subset");
  detail::check_subset(m, b, "second subset");
  auto directed = [&](std::span<const std::size_t> from, std::span<const std::size_t> to) {
    double worst = 0.0;
    for (std::size_t x : from) {
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t y : to) nearest = std::min(nearest, m(x, y));
      worst = std::max(worst, nearest);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

// Largest minus second-largest of the three pair sums, maximised over all
// quadruples (repeats allowed). Zero exactly on 0-hyperbolic spaces. The value
// of a quadruple is invariant under permuting its points, so only sorted index
// tuples are visited.
inline double four_point_defect(const DistanceMatrix& d) {
  const std::size_t n = d.size();
  double worst = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x; y < n; ++y) {
      const double dxy = d(x, y);
      for (std::size_t z = y; z < n; ++z) {
        const double dxz = d(x, z);
        const double dyz = d(y, z);
        const auto rz = d.row(z);
        const auto rx = d.row(x);
        const auto ry = d.row(y);
        for (std::size_t t = z; t < n; ++t) {
          double s1 = dxy + rz[t];
          double s2 = dxz + ry[t];
          double s3 = dyz + rx[t];
          // Sort descending: s1 >= s2 >= s3.
          if (s1 < s2) std::swap(s1, s2);
          if (s2 < s3) std::swap(s2, s3);
          if (s1 < s2) std::swap(s1, s2);
          worst = std::max(worst, s1 - s2);
        }
      }
    }
  }
  return worst;
}

inline double four_point_defect(const FiniteMetricSpace& m) { return four_point_defect(m.dist); }

inline double diameter(const DistanceMatrix& d) {
  double best = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (double v : d.row(i)) best = std::max(best, v);
  return best;
}

inline std::vector<double> eccentricities(const DistanceMatrix& d) {
  std::vector<double> ecc(d.size(), 0.0);
  for (std::size_t i = 0; i < d.size(); ++i)
    for (double v : d.row(i)) ecc[i] = std::max(ecc[i], v);
  return ecc;
}

}  // namespace ghtree
