#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "ghtree/ghtree.hpp"
#include "ghtree/io.hpp"
#include "oracles.hpp"

using namespace ghtree;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::invalid_argument;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(TreeJson, RoundTrip) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = oracle::random_tree(rng, 2 + trial);
    const auto back = parse_tree(serialize_tree(t));
    ASSERT_EQ(back.size(), t.size());
    EXPECT_EQ(back.edges().size(), t.edges().size());
    EXPECT_LE(oracle::max_abs_diff(back.distances(), t.distances()), 1e-10);
    for (std::size_t v = 0; v < t.size(); ++v) EXPECT_EQ(back.vertex(v).id, t.vertex(v).id);
  }
}

TEST(TreeJson, HalfCombDocument) {
  const auto t = comb_tree({0.5, 1.0, 16});
  const auto doc = tree_to_json(t);
  EXPECT_EQ(doc["schema_version"], "1.0");
  EXPECT_EQ(doc["nodes"].size(), 6u);
  EXPECT_EQ(doc["edges"].size(), 5u);
  EXPECT_EQ(doc["metadata"]["generator"], "comb");
  const auto back = tree_from_json(doc);
  EXPECT_EQ(back.distances(), t.distances());
  EXPECT_EQ(serialize_tree(back), serialize_tree(t));
}

TEST(TreeJson, Errors) {
  EXPECT_EQ(code_of([] { parse_tree("not json"); }), ErrorCode::schema);
  EXPECT_EQ(code_of([] { parse_tree(R"({"nodes": [], "edges": []})"); }), ErrorCode::schema);
  EXPECT_EQ(code_of([] {
              parse_tree(R"({"schema_version": "1.0", "nodes": [{"id": "a"}, {"id": "a"}], "edges": []})");
            }),
            ErrorCode::duplicate_id);
  EXPECT_EQ(code_of([] {
              parse_tree(R"({"schema_version": "1.0", "nodes": [{"id": "a"}],
                             "edges": [{"a": "a", "b": "zz", "len": 1}]})");
            }),
            ErrorCode::unknown_vertex);
  EXPECT_EQ(code_of([] {
              parse_tree(R"({"schema_version": "1.0", "nodes": [{"id": "a"}, {"id": "b"}],
                             "edges": [{"a": "a", "b": "b", "len": "x"}]})");
            }),
            ErrorCode::schema);
  EXPECT_EQ(code_of([] {
              parse_tree(R"({"schema_version": "1.0", "nodes": [{"id": "a"}, {"id": "b"}, {"id": "c"}],
                             "edges": [{"a": "a", "b": "b", "len": 1}, {"a": "b", "b": "c", "len": 1},
                                       {"a": "c", "b": "a", "len": 1}]})");
            }),
            ErrorCode::cycle);
}

TEST(MatrixCsv, RoundTripAndErrors) {
  const auto m = make_space({{0, 1, 2}, {1, 0, 1}, {2, 1, 0}});
  const auto back = matrix_from_csv(matrix_to_csv(m));
  EXPECT_EQ(back.dist, m.dist);
  EXPECT_EQ(back.labels, m.labels);
  EXPECT_EQ(code_of([] { matrix_from_csv("a,b\n0,1\n"); }), ErrorCode::not_square);
  EXPECT_EQ(code_of([] { matrix_from_csv("a,b\n0,x\n1,0\n"); }), ErrorCode::schema);
  EXPECT_EQ(code_of([] { matrix_from_csv(""); }), ErrorCode::schema);
  EXPECT_EQ(split_csv_line(" a , b,"), (std::vector<std::string>{"a", "b", ""}));
}

TEST(MatrixCsv, FixtureFiles) {
  const auto x = matrix_from_csv(read_file(GHTREE_TEST_DATA "/two_point_1.csv"));
  const auto y = matrix_from_csv(read_file(GHTREE_TEST_DATA "/two_point_2.csv"));
  EXPECT_DOUBLE_EQ(gh_exact(x, y), 0.5);
  const auto bad = matrix_from_csv(read_file(GHTREE_TEST_DATA "/triangle_violation.csv"));
  const auto report = validate_metric(bad.dist);
  EXPECT_FALSE(report.ok);
  EXPECT_EQ(report.kind, Violation::triangle);
}

TEST(Config, DemoParses) {
  const auto cfg = parse_config(read_file(GHTREE_DEMO_CONFIG));
  EXPECT_EQ(cfg.grid.size(), 27u);
  EXPECT_EQ(cfg.marked, (std::vector<std::size_t>{25, 26}));
  EXPECT_EQ(cfg.m, 3);
  EXPECT_EQ(cfg.star_branches, 4u);
  EXPECT_EQ(cfg.eps, 0.015625);
  EXPECT_EQ(cfg.endpoints.size(), 2u);
}

TEST(Config, Errors) {
  EXPECT_EQ(code_of([] { parse_config("[]"); }), ErrorCode::schema);
  EXPECT_EQ(code_of([] { parse_config(R"({"grid": [[0.1]], "marked": [], "endpoints": [], "basepoints": []})"); }),
            ErrorCode::schema);
  EXPECT_EQ(code_of([] {
              parse_config(R"({"grid": [[0.1, 0.1], [0.9, 0.9]], "marked": [0, 1], "endpoints": [],
                               "basepoints": []})");
            }),
            ErrorCode::invalid_argument);
}

TEST(Tables, CsvAndJson) {
  const std::vector<TableRow> rows{{0.1, 0.3, 2, 0.5, 0.25, 0.25}};
  EXPECT_EQ(table_to_csv(rows), "u1,u2,k,bound,hi,margin\n0.1,0.3,2,0.5,0.25,0.25\n");
  const auto j = table_to_json(rows);
  EXPECT_EQ(j[0]["k"], 2);
  EXPECT_EQ(j[0]["hi"], 0.25);
}

TEST(Reports, IntervalAndValidation) {
  GHInterval g;
  g.lo = 0.25;
  g.hi = std::numeric_limits<double>::infinity();
  g.lo_witness = "diameter";
  g.hi_witness.pairs = {{0, 1}};
  const auto j = interval_to_json(g);
  EXPECT_EQ(j["hi"], "inf");
  EXPECT_EQ(j["hi_witness"][0][1], 1);
  const auto r = report_to_json(validate_metric(make_space({{0, 1}, {1, 0}}).dist));
  EXPECT_EQ(r["ok"], true);
  EXPECT_EQ(round12(0.1 + 0.2), 0.3);
}
