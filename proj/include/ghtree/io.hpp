#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghtree/embedding.hpp"
#include "ghtree/error.hpp"
#include "ghtree/gh.hpp"
#include "ghtree/metric_space.hpp"
#include "ghtree/tree.hpp"

namespace ghtree {

using json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "1.0";

// Rounds to 12 significant digits so emitted numbers are short and stable.
inline double round12(double value) {
  if (!std::isfinite(value)) return value;
  return std::stod(format_number(value));
}

namespace detail {

[[noreturn]] inline void schema_error(const std::string& what) { throw Error(ErrorCode::schema, what); }

inline const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) schema_error(std::string("missing key '") + key + "'");
  return obj.at(key);
}

inline json number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return round12(value);
}

}  // namespace detail

// {schema_version, nodes: [{id, label}], edges: [{a, b, len}], metadata}
inline json tree_to_json(const MetricTree& t) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  json nodes = json::array();
  for (const auto& v : t.vertices()) nodes.push_back({{"id", v.id}, {"label", v.label}});
  json edges = json::array();
  for (const auto& e : t.edges())
    edges.push_back({{"a", t.vertex(e.a).id}, {"b", t.vertex(e.b).id}, {"len", round12(e.length)}});
  json meta = json::object();
  for (const auto& [k, v] : t.metadata) {
    json value = json::parse(v, nullptr, false);
    meta[k] = value.is_discarded() ? json(v) : value;
  }
  doc["nodes"] = std::move(nodes);
  doc["edges"] = std::move(edges);
  doc["metadata"] = std::move(meta);
  return doc;
}

inline std::string serialize_tree(const MetricTree& t) { return tree_to_json(t).dump(2) + "\n"; }

inline MetricTree tree_from_json(const json& doc) {
  using detail::require;
  using detail::schema_error;
  if (!doc.is_object()) schema_error("tree document must be an object");
  const auto& version = require(doc, "schema_version");
  if (!version.is_string()) schema_error("schema_version must be a string");
  const auto& nodes = require(doc, "nodes");
  const auto& edges = require(doc, "edges");
  if (!nodes.is_array() || !edges.is_array()) schema_error("nodes and edges must be arrays");

  std::vector<Vertex> vertices;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& n : nodes) {
    const auto& id = require(n, "id");
    if (!id.is_string()) schema_error("node id must be a string");
    Vertex v{id.get<std::string>(), ""};
    if (n.contains("label")) {
      if (!n.at("label").is_string()) schema_error("node label must be a string");
      v.label = n.at("label").get<std::string>();
    }
    if (!index.emplace(v.id, vertices.size()).second)
      throw Error(ErrorCode::duplicate_id, "duplicate node id '" + v.id + "'", {vertices.size()});
    vertices.push_back(std::move(v));
  }
  std::vector<Edge> list;
  for (const auto& e : edges) {
    const auto& a = require(e, "a");
    const auto& b = require(e, "b");
    const auto& len = require(e, "len");
    if (!a.is_string() || !b.is_string()) schema_error("edge endpoints must be node ids");
    if (!len.is_number()) schema_error("edge len must be a number");
    auto lookup = [&](const json& id) {
      auto it = index.find(id.get<std::string>());
      if (it == index.end())
        throw Error(ErrorCode::unknown_vertex, "edge references unknown node '" + id.get<std::string>() + "'");
      return it->second;
    };
    list.push_back({lookup(a), lookup(b), len.get<double>()});
  }
  MetricTree t = tree_from_edges(std::move(vertices), std::move(list));
  if (doc.contains("metadata")) {
    const auto& meta = doc.at("metadata");
    if (!meta.is_object()) schema_error("metadata must be an object");
    for (const auto& [k, v] : meta.items()) t.metadata[k] = v.dump();
  }
  return t;
}

inline MetricTree parse_tree(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) detail::schema_error("tree document is not valid JSON");
  return tree_from_json(doc);
}

// Header row of labels, then one row of distances per point.
inline std::string matrix_to_csv(const FiniteMetricSpace& m) {
  std::ostringstream out;
  for (std::size_t i = 0; i < m.size(); ++i) out << (i ? "," : "") << m.labels.at(i);
  out << "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) out << (j ? "," : "") << format_number(m(i, j));
    out << "\n";
  }
  return out.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

// Parses a labelled CSV matrix. Squareness is enforced; the metric axioms are
// left to validate_metric.
inline FiniteMetricSpace matrix_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  FiniteMetricSpace m;
  std::vector<std::vector<double>> rows;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (header) {
      m.labels = std::move(cells);
      header = false;
      continue;
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != c.size()) detail::schema_error("matrix entry '" + c + "' is not a number");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (header) detail::schema_error("matrix CSV is empty");
  m.dist = DistanceMatrix::from_rows(rows);
  if (m.labels.size() != m.size()) throw Error(ErrorCode::not_square, "header has a different size than the matrix");
  return m;
}

inline json correspondence_to_json(const Correspondence& r) {
  json pairs = json::array();
  for (const auto& [i, j] : r.pairs) pairs.push_back({i, j});
  return pairs;
}

inline json interval_to_json(const GHInterval& g) {
  return {{"lo", detail::number(g.lo)},
          {"hi", detail::number(g.hi)},
          {"lo_witness", g.lo_witness},
          {"hi_witness", correspondence_to_json(g.hi_witness)},
          {"slack", detail::number(g.slack)},
          {"sample_sizes", {g.sample_sizes[0], g.sample_sizes[1]}}};
}

inline json report_to_json(const ValidationReport& r) {
  return {{"ok", r.ok}, {"worst_violation", detail::number(r.worst_violation)}, {"kind", to_string(r.kind)},
          {"witness", r.witness}};
}

// {grid: [[u1, u2], ...], marked: [index, ...], endpoints: [tree, ...],
//  basepoints: [id, ...], m, star_branches, eps, tol, comb_depth, cap}
inline EmbedConfig config_from_json(const json& doc) {
  using detail::require;
  using detail::schema_error;
  EmbedConfig cfg;
  const auto& grid = require(doc, "grid");
  if (!grid.is_array()) schema_error("grid must be an array of coordinate pairs");
  for (const auto& p : grid) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      schema_error("grid entries must be [u1, u2] pairs");
    cfg.coords.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  cfg.grid = euclidean_grid(cfg.coords);
  for (const auto& v : require(doc, "marked")) {
    if (!v.is_number_unsigned()) schema_error("marked entries must be grid indices");
    cfg.marked.push_back(v.get<std::size_t>());
  }
  for (const auto& t : require(doc, "endpoints")) cfg.endpoints.push_back(tree_from_json(t));
  for (const auto& b : require(doc, "basepoints")) {
    if (!b.is_string()) schema_error("basepoints must be node ids");
    cfg.basepoints.push_back(b.get<std::string>());
  }
  auto read = [&](const char* key, auto& field) {
    if (doc.contains(key)) {
      try {
        field = doc.at(key).get<std::decay_t<decltype(field)>>();
      } catch (const json::exception&) {
        schema_error(std::string("bad value for '") + key + "'");
      }
    }
  };
  read("m", cfg.m);
  read("star_branches", cfg.star_branches);
  read("eps", cfg.eps);
  read("tol", cfg.tol);
  read("comb_depth", cfg.comb_depth);
  read("cap", cfg.cap);
  validate_config(cfg);
  return cfg;
}

inline EmbedConfig parse_config(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) detail::schema_error("config is not valid JSON");
  return config_from_json(doc);
}

// One table row: u1,u2,k,bound,hi,margin.
struct TableRow {
  double u1 = 0.0, u2 = 0.0;
  int k = 0;
  double bound = 0.0, hi = 0.0, margin = 0.0;
};

inline std::string table_to_csv(const std::vector<TableRow>& rows) {
  std::ostringstream out;
  out << "u1,u2,k,bound,hi,margin\n";
  for (const auto& r : rows)
    out << format_number(r.u1) << ',' << format_number(r.u2) << ',' << r.k << ',' << format_number(r.bound) << ','
        << format_number(r.hi) << ',' << format_number(r.margin) << "\n";
  return out.str();
}

inline json table_to_json(const std::vector<TableRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"u1", detail::number(r.u1)},
                   {"u2", detail::number(r.u2)},
                   {"k", r.k},
                   {"bound", detail::number(r.bound)},
                   {"hi", detail::number(r.hi)},
                   {"margin", detail::number(r.margin)}});
  return out;
}

}  // namespace ghtree
