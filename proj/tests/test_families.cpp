#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "ghtree/ghtree.hpp"
#include "oracles.hpp"

using namespace ghtree;

namespace {

// Distance of R[a] computed from its definition, with a_0 = 1.
double star_oracle(const std::vector<double>& a, double s, std::size_t i, double t, std::size_t j) {
  auto coef = [&](std::size_t b) { return b == 0 ? 1.0 : a[b - 1]; };
  if (s == 0.0 && t == 0.0) return 0.0;
  if (i == j) return coef(i) * std::abs(s - t);
  return coef(i) * s + coef(j) * t;
}

std::vector<double> random_cube_point(std::mt19937& rng, std::size_t n) {
  std::vector<double> a(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const double lo = std::ldexp(1.0, -2 * static_cast<int>(i));
    a[i - 1] = std::uniform_real_distribution<double>(lo, 2.0 * lo)(rng);
  }
  return a;
}

}  // namespace

TEST(CutOff, Examples) {
  EXPECT_EQ(c_fun(0, 0.25), 1.0);
  EXPECT_EQ(c_fun(0, 0.5), 1.0);
  EXPECT_EQ(c_fun(0, 0.75), 0.5);
  EXPECT_EQ(c_fun(0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(c_fun(1, 0.3), 0.8);
  EXPECT_EQ(c_fun(3, 0.5), 0.0);
  EXPECT_EQ(c_fun(3, 0.0), 1.0);
}

TEST(CutOff, Bands) {
  EXPECT_EQ(dyadic_band(0.5), 0);
  EXPECT_EQ(dyadic_band(0.99), 0);
  EXPECT_EQ(dyadic_band(0.49), 1);
  EXPECT_EQ(dyadic_band(0.125), 2);
  EXPECT_THROW(dyadic_band(0.0), Error);
  EXPECT_THROW(dyadic_band(1.0), Error);
}

TEST(CombDist, Examples) {
  EXPECT_EQ(comb_dist({0.5, 0.25}, {0.5, 0.0}), 0.25);
  EXPECT_EQ(comb_dist({0.0, 0.5}, {1.0, 0.5}), 2.0);
  EXPECT_EQ(comb_dist({0.25, 0.0}, {0.75, 0.0}), 0.5);
}

TEST(CombTree, HalfHasSixVertices) {
  const auto t = comb_tree({0.5, 1.0, 16});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.edges().size(), 5u);
  EXPECT_EQ(t.distance(t.index_of("tooth:0"), t.index_of("tooth:1")), 2.0);
  EXPECT_EQ(t.distance(t.index_of("tooth:0.5"), t.index_of("spine:0.5")), 0.5);
}

TEST(CombTree, ZeroIsTheSpine) {
  const auto t = comb_tree({0.0, 0.5, 16});
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.distance(0, 1), 0.5);
}

TEST(CombTree, MatchesDefinition) {
  for (double s : {0.9, 0.6, 0.4, 0.3, 0.2, 0.13, 0.07, 0.01}) {
    const int cap = 8;
    const auto t = comb_tree({s, 1.0, cap});
    std::vector<std::pair<double, double>> got;
    for (const auto& v : t.vertices()) {
      if (v.id.rfind("tooth:", 0) != 0) continue;
      const auto tip = t.index_of(v.id);
      const auto base = t.index_of("spine:" + v.id.substr(6));
      got.emplace_back(std::stod(v.id.substr(6)), t.distance(tip, base));
    }
    std::sort(got.begin(), got.end());
    const auto want = oracle::comb_teeth(s, cap);
    ASSERT_EQ(got.size(), want.size()) << "s=" << s;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_NEAR(got[i].first, want[i].first, 1e-12);
      EXPECT_NEAR(got[i].second, want[i].second, 1e-12);
    }
    EXPECT_LE(oracle::max_abs_diff(t.distances(), oracle::floyd_warshall(t)), 1e-12);
    EXPECT_LE(four_point_defect(t.distances()), 1e-9);
  }
}

TEST(CombTree, ScaleAndErrors) {
  const auto a = comb_tree({0.3, 1.0, 16});
  const auto b = comb_tree({0.3, 0.5, 16});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_DOUBLE_EQ(b.distance(i, j), 0.5 * a.distance(i, j));
  EXPECT_THROW(comb_tree({-0.1, 1.0, 16}), Error);
  EXPECT_THROW(comb_tree({1.1, 1.0, 16}), Error);
  EXPECT_THROW(comb_tree({0.5, 0.0, 16}), Error);
  EXPECT_THROW(comb_tree({0.5, 1.0, 0}), Error);
}

TEST(CombTree, TruncationBelowCap) {
  const auto layout = comb_layout({std::ldexp(1.0, -10), 1.0, 4});
  EXPECT_EQ(layout.top_generation, 4);
  EXPECT_GT(layout.truncation_error, 0.0);
  EXPECT_EQ(comb_layout({0.3, 1.0, 4}).truncation_error, 0.0);
}

TEST(CombContinuity, BandBoundHolds) {
  const double eps = std::ldexp(1.0, -8);
  std::mt19937 rng(3);
  for (int n = 0; n <= 2; ++n) {
    const double lo = std::ldexp(1.0, -(n + 1)), hi = std::ldexp(1.0, -n), w = std::ldexp(1.0, -(n + 2));
    std::uniform_real_distribution<double> su(lo, hi), du(-w, w);
    for (int trial = 0; trial < 6; ++trial) {
      const double s = su(rng);
      const double t = std::clamp(s + 0.999 * du(rng), 0.0, 1.0);
      const auto bound = comb_continuity_bound(s, t);
      ASSERT_TRUE(bound.has_value());
      const double h = oracle::comb_hausdorff(comb_samples({s, 1.0, 16}, eps), comb_samples({t, 1.0, 16}, eps));
      EXPECT_LE(h, *bound + 2.0 * eps) << "s=" << s << " t=" << t;
    }
  }
  EXPECT_EQ(comb_continuity_bound(0.0, 0.3), 0.3);
  EXPECT_FALSE(comb_continuity_bound(0.3, 0.5).has_value());
}

TEST(CombContinuity, GeneralBound) {
  const double eps = std::ldexp(1.0, -7);
  for (double s : {0.0, 0.1, 0.3, 0.7})
    for (double t : {0.05, 0.3, 0.9}) {
      const double h = oracle::comb_hausdorff(comb_samples({s, 1.0, 16}, eps), comb_samples({t, 1.0, 16}, eps));
      EXPECT_LE(h, comb_hausdorff_bound(s, t) + 2.0 * eps);
      EXPECT_EQ(comb_hausdorff_bound(s, t), comb_hausdorff_bound(t, s));
    }
}

TEST(CombSamples, Dense) {
  const double eps = 0.05;
  const auto pts = comb_samples({0.3, 1.0, 16}, eps);
  for (double x = 0.0; x <= 1.0; x += 0.01) {
    double nearest = 1e9;
    for (const auto& p : pts) nearest = std::min(nearest, comb_dist({x, 0.0}, p));
    EXPECT_LE(nearest, eps);
  }
}

TEST(Horizon, ComponentDiameters) {
  for (int k = 1; k <= 50; ++k) {
    const double s = static_cast<double>(k) / 51.0;
    const int n = dyadic_band(s);
    const auto t = comb_tree({s, 1.0, 16});
    const std::set<std::size_t> corners{t.index_of("spine:0"), t.index_of("spine:1")};
    for (const auto& c : deg2_components(t)) {
      const bool corner = std::any_of(c.vertices.begin(), c.vertices.end(), [&](auto v) { return corners.count(v); });
      const double limit = corner ? 1.5 * std::ldexp(1.0, -n) : std::ldexp(1.0, -n);
      EXPECT_LT(c.closure_diameter, limit) << "s=" << s;
    }
  }
}

TEST(Star, Examples) {
  const StarParams p{{0.25, 0.0625}, 1.0, 0.5};
  EXPECT_EQ(star_metric(p, {1.0, 0}, {1.0, 1}), 1.25);
  EXPECT_EQ(star_metric(p, {0.0, 0}, {0.0, 2}), 0.0);
  EXPECT_EQ(star_metric(p, {0.5, 1}, {1.0, 1}), 0.125);
  const auto t = star_tree(p);
  const auto c = t.index_of("branch:0:0");
  EXPECT_EQ(t.distance(c, t.index_of("branch:0:1")), 1.0);
  EXPECT_EQ(t.distance(c, t.index_of("branch:1:1")), 0.25);
  EXPECT_EQ(t.distance(c, t.index_of("branch:2:1")), 0.0625);
  EXPECT_EQ(t.size(), 5u);  // branch 0 split in half
  EXPECT_EQ(deg2_components(t).size(), 3u);
}

TEST(Star, MetricAndTreeAgree) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_cube_point(rng, 3 + trial % 3);
    const double scale = 0.2 + 0.1 * trial;
    const auto t = star_tree({a, scale, 0.1});
    EXPECT_LE(oracle::max_abs_diff(t.distances(), oracle::floyd_warshall(t)), 1e-12);
    EXPECT_LE(four_point_defect(t.distances()), 1e-9);
  }
}

TEST(Star, ZeroScaleAndErrors) {
  EXPECT_EQ(star_tree({{0.3}, 0.0, 0.1}).size(), 1u);
  EXPECT_THROW(star_tree({{}, 1.0, 0.1}), Error);
  EXPECT_THROW(star_tree({{0.9}, 1.0, 0.1}), Error);
  EXPECT_THROW(star_tree({{0.3}, -1.0, 0.1}), Error);
  EXPECT_THROW(star_tree({{0.3}, 1.0, 0.0}), Error);
  EXPECT_TRUE(in_parameter_cube({0.25, 0.125}));
  EXPECT_FALSE(in_parameter_cube({0.2}));
}

TEST(Star, SupDistanceBound) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4;
    const auto a = random_cube_point(rng, n), b = random_cube_point(rng, n);
    const StarParams pa{a, 1.0, 1.0}, pb{b, 1.0, 1.0};
    double worst = 0.0;
    for (int k = 0; k < 40; ++k) {
      const StarPoint x{u(rng), rng() % (n + 1)}, y{u(rng), rng() % (n + 1)};
      const double da = star_metric(pa, x, y), db = star_metric(pb, x, y);
      EXPECT_NEAR(da, star_oracle(a, x.s, x.branch, y.s, y.branch), 1e-15);
      worst = std::max(worst, std::abs(da - db));
    }
    EXPECT_LE(worst, 2.0 * tau(a, b) + 1e-12);
  }
}

TEST(Tau, Examples) {
  EXPECT_DOUBLE_EQ(tau({0.25, 0.1}, {0.3, 0.1}), 0.05);
  EXPECT_EQ(tau({}, {}), 0.0);
  EXPECT_THROW(tau({0.1}, {0.1, 0.2}), Error);
}

TEST(RhoEmbed, ExamplesAndInverse) {
  const auto a = rho_embed(0.0, 1.0, 1, 3, 5);
  ASSERT_EQ(a.size(), 5u);
  EXPECT_EQ(a[0], 0.25);
  EXPECT_EQ(a[1], 0.125);
  EXPECT_EQ(a[2], std::ldexp(1.0, -6));
  EXPECT_EQ(rho_embed(0.0, 0.0, 3, 3, 3)[2], std::ldexp(1.0, -5));
  EXPECT_EQ(a[3], 1.5 * std::ldexp(1.0, -8));
  EXPECT_TRUE(in_parameter_cube(a));
  std::set<std::vector<double>> seen;
  for (double u1 : {0.0, 0.5, 1.0})
    for (double u2 : {0.0, 0.5, 1.0})
      for (int k = 1; k <= 3; ++k) {
        const auto r = rho_embed(u1, u2, k, 3, 4);
        EXPECT_TRUE(in_parameter_cube(r));
        EXPECT_DOUBLE_EQ(4.0 * r[0] - 1.0, u1);
        EXPECT_DOUBLE_EQ(16.0 * r[1] - 1.0, u2);
        EXPECT_TRUE(seen.insert(r).second);
      }
  EXPECT_THROW(rho_embed(0.5, 0.5, 0, 3, 4), Error);
  EXPECT_THROW(rho_embed(0.5, 0.5, 4, 3, 4), Error);
  EXPECT_THROW(rho_embed(1.5, 0.5, 1, 3, 4), Error);
  EXPECT_THROW(rho_embed(0.5, 0.5, 1, 3, 2), Error);
}

TEST(CombTree, RoundingBelowBandEdgeSnaps) {
  const double s = std::nextafter(0.25, 0.0);
  EXPECT_EQ(dyadic_band(s), 2);
  EXPECT_EQ(comb_band(s), 1);
  EXPECT_EQ(comb_band(0.2), 2);
  const auto t = comb_tree({s, 1.0, 16});
  const auto edge = comb_tree({0.25, 1.0, 16});
  ASSERT_EQ(t.size(), edge.size());
  EXPECT_LE(oracle::max_abs_diff(t.distances(), edge.distances()), 1e-15);
  EXPECT_TRUE(validate_metric(t.distances()).ok);
}
