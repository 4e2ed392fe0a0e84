#include <array>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ghtree/ghtree.hpp"
#include "oracles.hpp"

using namespace ghtree;

namespace {

MetricTree unit_segment() { return tree_from_edges({{"p", ""}, {"q", ""}}, {{0, 1, 1.0}}); }

MetricTree tripod() {
  return tree_from_edges({{"c", ""}, {"x", ""}, {"y", ""}, {"z", ""}}, {{0, 1, 0.5}, {0, 2, 0.5}, {0, 3, 0.5}});
}

// Grid points first, then the marked points (0,0) and (1,1).
EmbedConfig make_config(const std::vector<std::array<double, 2>>& grid, int m, double eps) {
  EmbedConfig cfg;
  cfg.coords = grid;
  cfg.coords.push_back({0.0, 0.0});
  cfg.coords.push_back({1.0, 1.0});
  cfg.grid = euclidean_grid(cfg.coords);
  cfg.marked = {grid.size(), grid.size() + 1};
  cfg.endpoints = {unit_segment(), tripod()};
  cfg.basepoints = {"p", "c"};
  cfg.m = m;
  cfg.eps = eps;
  validate_config(cfg);
  return cfg;
}

std::vector<std::array<double, 2>> square_grid(std::size_t n) {
  std::vector<std::array<double, 2>> g;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      g.push_back({(2.0 * static_cast<double>(i) + 1.0) / (2.0 * static_cast<double>(n)),
                   (2.0 * static_cast<double>(j) + 1.0) / (2.0 * static_cast<double>(n))});
  return g;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST(ScalarFields, Examples) {
  const auto cfg = make_config({{0.5, 0.5}, {0.0, 1.0}, {0.25, 0.25}}, 3, 0.25);
  const auto mid = scalar_fields(cfg, 0);
  EXPECT_DOUBLE_EQ(mid.sigma[0], 1.0);
  EXPECT_DOUBLE_EQ(mid.sigma[1], 1.0);
  EXPECT_DOUBLE_EQ(mid.phi, 0.25);
  EXPECT_DOUBLE_EQ(mid.xi, 8.0);
  const auto q = scalar_fields(cfg, 2);
  EXPECT_DOUBLE_EQ(q.sigma[0], 3.0);
  EXPECT_DOUBLE_EQ(q.sigma[1], 1.0 / 3.0);
  const auto v0 = scalar_fields(cfg, 3);
  EXPECT_TRUE(std::isinf(v0.sigma[0]));
  EXPECT_EQ(v0.sigma[1], 0.0);
  EXPECT_EQ(v0.phi, 0.0);
  EXPECT_THROW(scalar_fields(cfg, 99), Error);
}

TEST(ScalarFields, PhiRange) {
  const auto cfg = make_config(square_grid(6), 3, 0.25);
  for (std::size_t u = 0; u < cfg.grid.size(); ++u) {
    const auto f = scalar_fields(cfg, u);
    EXPECT_GE(f.phi, 0.0);
    EXPECT_LE(f.phi, 0.5);
    EXPECT_EQ(f.phi == 0.0, cfg.marked_index(u).has_value());
  }
}

TEST(ConfigValidation, Errors) {
  auto cfg = make_config({{0.5, 0.5}}, 3, 0.25);
  auto broken = cfg;
  broken.marked = {0};
  EXPECT_THROW(validate_config(broken), Error);
  broken = cfg;
  broken.marked = {1, 1};
  EXPECT_THROW(validate_config(broken), Error);
  broken = cfg;
  broken.basepoints[0] = "nope";
  EXPECT_THROW(validate_config(broken), Error);
  broken = cfg;
  broken.star_branches = 2;
  EXPECT_THROW(validate_config(broken), Error);
  broken = cfg;
  broken.coords[0] = {1.5, 0.5};
  EXPECT_THROW(validate_config(broken), Error);
}

TEST(BuildF, MarkedPointsGiveEndpoints) {
  const auto cfg = make_config({{0.5, 0.5}}, 3, 0.25);
  for (std::size_t i = 0; i < 2; ++i)
    for (int k = 1; k <= 3; ++k) EXPECT_EQ(build_F(cfg, cfg.marked[i], k).distances(), cfg.endpoints[i].distances());
  EXPECT_THROW(build_F(cfg, 0, 0), Error);
  EXPECT_THROW(build_F(cfg, 0, 4), Error);
  EXPECT_THROW(build_parts(cfg, cfg.marked[0], 1), Error);
}

TEST(BuildF, TreesAreValid) {
  const auto cfg = make_config(square_grid(3), 2, 0.125);
  for (std::size_t u = 0; u < 9; ++u)
    for (int k = 1; k <= 2; ++k) {
      const auto t = build_F(cfg, u, k);
      EXPECT_LE(four_point_defect(t.distances()), 1e-9);
      EXPECT_TRUE(validate_metric(t.distances()).ok);
      EXPECT_LE(oracle::max_abs_diff(t.distances(), oracle::floyd_warshall(t)), 1e-9);
    }
}

TEST(BuildF, PartsMatchConstruction) {
  const auto cfg = make_config({{0.5, 0.5}, {0.2, 0.6}}, 3, 0.125);
  const auto parts = build_parts(cfg, 1, 2);
  ASSERT_EQ(parts.balls.size(), 2u);
  const double phi = parts.fields.phi;
  // Each ball is the radius-sigma ball of the basepoint in the comb replacement.
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& z = parts.balls[i];
    const auto p = z.index_of(cfg.basepoints[i]);
    for (std::size_t v = 0; v < z.size(); ++v) EXPECT_LE(z.distance(p, v), parts.fields.sigma[i] + 1e-9);
  }
  EXPECT_DOUBLE_EQ(parts.star.distance(parts.star.index_of("branch:0:0"), parts.star.index_of("branch:0:1")),
                   32.0 * phi);
  EXPECT_EQ(parts.star_coeffs, rho_embed(0.2, 0.6, 2, 3, cfg.star_branches));
}

TEST(Fingerprint, RecoversParameters) {
  const auto cfg = make_config(square_grid(3), 3, 0.125);
  for (std::size_t u = 0; u < 9; u += 2)
    for (int k = 1; k <= 3; ++k) {
      const auto fp = star_fingerprint(build_F(cfg, u, k));
      const auto want = rho_embed(cfg.coords[u][0], cfg.coords[u][1], k, 3, cfg.star_branches);
      ASSERT_EQ(fp.a.size(), want.size());
      EXPECT_LE(tau(fp.a, want), 1e-9);
      EXPECT_NEAR(fp.xi, scalar_fields(cfg, u).xi, 1e-9);
      EXPECT_GT(fp.margin, 0.0);
    }
}

TEST(Fingerprint, Rejections) {
  EXPECT_EQ(code_of([] { star_fingerprint(tree_from_edges(2, {{0, 1, 1.0}})); }), ErrorCode::no_certified_star);
  EXPECT_EQ(code_of([] { star_fingerprint(tripod()); }), ErrorCode::ambiguous_star);
  // Two long legs meeting at the centre, ratio outside the cube.
  const auto bad = tree_from_edges(4, {{0, 1, 1.0}, {0, 2, 0.9}, {0, 3, 0.1}});
  EXPECT_EQ(code_of([&] { star_fingerprint(bad); }), ErrorCode::no_certified_star);
}

TEST(Injectivity, SmallGridAllDistinct) {
  const auto cfg = make_config(square_grid(2), 2, 0.125);
  std::vector<GridCell> cells;
  for (std::size_t u = 0; u < 4; ++u)
    for (int k = 1; k <= 2; ++k) cells.push_back({u, k});
  const auto report = injectivity_scan(cfg, cells);
  EXPECT_EQ(report.entries.size(), 8u);
  EXPECT_TRUE(report.all_distinct());
  EXPECT_GT(report.min_separation, 1e-6);
  EXPECT_LE(report.max_rho_error, 1e-9);
  ASSERT_TRUE(report.selected_k.has_value());
  for (const auto& e : report.entries) {
    EXPECT_NEAR(e.u1, cfg.coords[e.cell.u][0], 1e-9);
    EXPECT_NEAR(e.u2, cfg.coords[e.cell.u][1], 1e-9);
    EXPECT_EQ(e.k, e.cell.k);
  }
}

TEST(Injectivity, DuplicateCellFlagged) {
  const auto cfg = make_config(square_grid(2), 2, 0.125);
  const auto report = injectivity_scan(cfg, {{0, 1}, {1, 1}, {0, 1}});
  ASSERT_EQ(report.collisions.size(), 1u);
  EXPECT_EQ(report.collisions[0], (std::pair<std::size_t, std::size_t>{0, 2}));
}

TEST(Injectivity, MarkedPointRejected) {
  const auto cfg = make_config(square_grid(2), 2, 0.125);
  EXPECT_THROW(injectivity_scan(cfg, {{cfg.marked[0], 1}}), Error);
}

TEST(Continuity, SamePointIsWithinResolution) {
  const auto cfg = make_config(square_grid(2), 2, 0.0625);
  const auto rows = continuity_scan(cfg, {{1, 1, 1}});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].bound.total, 0.0);
  EXPECT_LE(rows[0].interval.hi, 2.0 * cfg.eps + 1e-12);
  EXPECT_TRUE(rows[0].ok);
}

TEST(Continuity, NeighboursWithinModulus) {
  const auto cfg = make_config(square_grid(3), 2, 0.0625);
  const auto rows = continuity_scan(cfg, {{4, 5, 1}, {0, 1, 2}, {3, 4, 1}});
  for (const auto& r : rows) {
    EXPECT_TRUE(r.ok) << r.pair.u << "-" << r.pair.v << " hi=" << r.interval.hi << " allowed=" << r.allowed;
    EXPECT_LE(r.interval.lo, r.interval.hi);
    EXPECT_DOUBLE_EQ(r.margin(), r.allowed - r.interval.hi);
  }
  EXPECT_THROW(continuity_scan(cfg, {{cfg.marked[0], 0, 1}}), Error);
}

TEST(WedgeCorrespondence, Covers) {
  const auto cfg = make_config(square_grid(3), 2, 0.0625);
  const auto a = build_F(cfg, 0, 1), b = build_F(cfg, 4, 1);
  const auto r = wedge_correspondence(cfg, a, b);
  EXPECT_NO_THROW(check_covering(a.size(), b.size(), r));
  EXPECT_EQ(distortion(a.distances(), a.distances(), wedge_correspondence(cfg, a, a)), 0.0);
}

TEST(ReplacementPath, ZeroIsIsometricAndRepeatsAreClose) {
  const auto x = tripod();
  const auto steps = replacement_path(x, {0.0, 0.25, 0.25}, 0.25, 8, 16);
  ASSERT_EQ(steps.size(), 3u);
  for (std::size_t v = 0; v < x.size(); ++v)
    for (std::size_t w = 0; w < x.size(); ++w)
      EXPECT_EQ(steps[0].tree.distance(steps[0].tree.index_of(x.vertex(v).id), steps[0].tree.index_of(x.vertex(w).id)),
                x.distance(v, w));
  EXPECT_FALSE(steps[0].hi.has_value());
  ASSERT_TRUE(steps[2].hi.has_value());
  EXPECT_LE(*steps[2].hi, 2.0 * 0.25 + 1e-12);
  EXPECT_EQ(*steps[2].bound, 0.0);
  EXPECT_LE(*steps[1].hi, *steps[1].bound + 2.0 * 0.25 + 1e-12);
}

TEST(ReplacementPath, GridValidation) {
  EXPECT_THROW(replacement_path(tripod(), {0.5, 0.25}, 0.25), Error);
  EXPECT_THROW(replacement_path(tripod(), {-0.1}, 0.25), Error);
  EXPECT_THROW(replacement_path(tripod(), {1.5}, 0.25), Error);
}
