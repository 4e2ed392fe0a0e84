// ghtree: build metric trees, compare them by Gromov-Hausdorff distance and
// run the embedding scans from the command line.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ghtree/ghtree.hpp"
#include "ghtree/io.hpp"

namespace {

using namespace ghtree;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInvalid = 2;

struct Globals {
  double tol = kDefaultTol;
  std::optional<double> eps;
  std::string out;
  std::string format = "json";
  unsigned seed = 0;
};

// Raised for missing files and similar problems with the invocation itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a scan or check completes but its verdict is negative.
struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_csv(const std::string& path) { return path.size() >= 4 && path.substr(path.size() - 4) == ".csv"; }

// A tree document or a CSV matrix, as a finite metric space.
FiniteMetricSpace load_space(const std::string& path) {
  const std::string text = read_file(path);
  if (is_csv(path)) return matrix_from_csv(text);
  return parse_tree(text).metric_space();
}

MetricTree load_tree(const std::string& path) { return parse_tree(read_file(path)); }

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(g.out, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + g.out + "'");
  out << text;
}

void emit_json(const Globals& g, const json& doc) { emit(g, doc.dump(2) + "\n"); }

void emit_tree(const Globals& g, const MetricTree& t) {
  if (g.format == "csv") emit(g, matrix_to_csv(t.metric_space()));
  else emit(g, serialize_tree(t));
}

double require_eps(const Globals& g, double fallback) { return g.eps.value_or(fallback); }

// ---- tree ----------------------------------------------------------------

void cmd_validate(const Globals& g, const std::string& path) {
  json report;
  FiniteMetricSpace space;
  if (is_csv(path)) {
    space = matrix_from_csv(read_file(path));
  } else {
    const MetricTree t = load_tree(path);
    space = t.metric_space();
    report["vertices"] = t.size();
    report["edges"] = t.edges().size();
  }
  const ValidationReport r = validate_metric(space.dist, g.tol);
  report["ok"] = r.ok;
  report["worst_violation"] = round12(r.worst_violation);
  report["kind"] = to_string(r.kind);
  report["witness"] = r.witness;
  if (r.ok) report["four_point_defect"] = round12(four_point_defect(space.dist));
  emit_json(g, report);
  if (!r.ok) throw CheckFailed(std::string(to_string(r.kind)) + " violation");
}

// Parses "file@vertex".
PointedTree load_pointed(const std::string& arg) {
  const auto at = arg.rfind('@');
  if (at == std::string::npos) throw UsageError("wedge parts are given as file@vertex, got '" + arg + "'");
  MetricTree t = load_tree(arg.substr(0, at));
  const std::size_t base = t.index_of(arg.substr(at + 1));
  return {std::move(t), base};
}

// Plan entries: {"a": id, "b": id, "tree": file or document, "alpha": id, "beta": id}.
ReplacementPlan load_plan(const MetricTree& host, const std::string& path) {
  const json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) throw Error(ErrorCode::schema, "replacement plan must be a JSON array");
  ReplacementPlan plan;
  for (const auto& e : doc) {
    const auto& tree = detail::require(e, "tree");
    MetricTree t = tree.is_string() ? load_tree(tree.get<std::string>()) : tree_from_json(tree);
    auto id = [&](const char* key) {
      const auto& v = detail::require(e, key);
      if (!v.is_string()) throw Error(ErrorCode::schema, std::string(key) + " must be a vertex id");
      return v.get<std::string>();
    };
    const std::size_t alpha = t.index_of(id("alpha"));
    const std::size_t beta = t.index_of(id("beta"));
    plan.push_back({host.index_of(id("a")), host.index_of(id("b")), std::move(t), alpha, beta});
  }
  return plan;
}

// ---- gh ------------------------------------------------------------------

json bounds_json(const FiniteMetricSpace& x, const FiniteMetricSpace& y) {
  const LowerBound lb = gh_lower_bound_detail(x.dist, y.dist);
  const Correspondence r = greedy_correspondence(x.dist, y.dist);
  return {{"lower", round12(lb.value)},
          {"lower_name", lb.name},
          {"upper", round12(gh_upper_bound(x.dist, y.dist, r))},
          {"upper_witness", correspondence_to_json(r)}};
}

// ---- lab -----------------------------------------------------------------

EmbedConfig load_config(const Globals& g, const std::string& path) {
  EmbedConfig cfg = parse_config(read_file(path));
  if (g.eps) cfg.eps = *g.eps;
  cfg.tol = g.tol;
  validate_config(cfg);
  return cfg;
}

std::vector<std::size_t> unmarked(const EmbedConfig& cfg) {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < cfg.grid.size(); ++u)
    if (!cfg.marked_index(u)) out.push_back(u);
  return out;
}

// Nearest-neighbour pairs among unmarked grid points: distance within the
// smallest positive spacing.
std::vector<CellPair> adjacent_pairs(const EmbedConfig& cfg, int k) {
  const auto pts = unmarked(cfg);
  double spacing = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (cfg.grid(pts[i], pts[j]) > cfg.tol) spacing = std::min(spacing, cfg.grid(pts[i], pts[j]));
  std::vector<CellPair> pairs;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (cfg.grid(pts[i], pts[j]) <= spacing * (1.0 + 1e-9)) pairs.push_back({pts[i], pts[j], k});
  return pairs;
}

void cmd_scan_continuity(const Globals& g, const std::string& config, int k) {
  const EmbedConfig cfg = load_config(g, config);
  const auto rows = continuity_scan(cfg, adjacent_pairs(cfg, k));
  std::vector<TableRow> table;
  json detail_rows = json::array();
  bool ok = true;
  for (const auto& r : rows) {
    const auto& u = cfg.coords[r.pair.u];
    table.push_back({u[0], u[1], r.pair.k, r.allowed, r.interval.hi, r.margin()});
    const auto& v = cfg.coords[r.pair.v];
    detail_rows.push_back({{"u", {round12(u[0]), round12(u[1])}},
                           {"v", {round12(v[0]), round12(v[1])}},
                           {"k", r.pair.k},
                           {"comb", round12(r.bound.comb)},
                           {"ball", round12(r.bound.ball)},
                           {"star", round12(r.bound.star)},
                           {"bound", round12(r.allowed)},
                           {"interval", interval_to_json(r.interval)},
                           {"ok", r.ok}});
    ok = ok && r.ok;
  }
  if (g.format == "csv") {
    emit(g, table_to_csv(table));
  } else {
    emit_json(g, {{"eps", round12(cfg.eps)}, {"seed", g.seed}, {"pairs", rows.size()}, {"ok", ok},
                  {"rows", detail_rows}});
  }
  if (!ok) throw CheckFailed("continuity bound exceeded");
}

void cmd_scan_injectivity(const Globals& g, const std::string& config) {
  const EmbedConfig cfg = load_config(g, config);
  std::vector<GridCell> cells;
  for (std::size_t u : unmarked(cfg))
    for (int k = 1; k <= cfg.m; ++k) cells.push_back({u, k});
  const InjectivityReport rep = injectivity_scan(cfg, cells);
  constexpr double kRecoveryTol = 1e-6;
  if (g.format == "csv") {
    std::vector<TableRow> table;
    for (const auto& e : rep.entries) {
      const auto& u = cfg.coords[e.cell.u];
      table.push_back({u[0], u[1], e.cell.k, kRecoveryTol, e.rho_error, kRecoveryTol - e.rho_error});
    }
    emit(g, table_to_csv(table));
  } else {
    json entries = json::array();
    for (const auto& e : rep.entries) {
      const auto& u = cfg.coords[e.cell.u];
      entries.push_back({{"u", {round12(u[0]), round12(u[1])}},
                         {"k", e.cell.k},
                         {"xi", round12(e.fingerprint.xi)},
                         {"a", e.fingerprint.a},
                         {"margin", round12(e.fingerprint.margin)},
                         {"recovered", {round12(e.u1), round12(e.u2), e.k}},
                         {"rho_error", round12(e.rho_error)},
                         {"nearest", round12(e.nearest)}});
    }
    json collisions = json::array();
    for (const auto& [i, j] : rep.collisions) collisions.push_back({i, j});
    emit_json(g, {{"cells", rep.entries.size()},
                  {"collisions", rep.collisions.size()},
                  {"collision_pairs", collisions},
                  {"min_separation", round12(rep.min_separation)},
                  {"max_rho_error", round12(rep.max_rho_error)},
                  {"endpoint_collisions", rep.endpoint_collisions},
                  {"selected_k", rep.selected_k ? json(*rep.selected_k) : json(nullptr)},
                  {"entries", entries}});
  }
  if (!rep.all_distinct() || rep.max_rho_error > kRecoveryTol || !rep.selected_k)
    throw CheckFailed("injectivity check failed");
}

void cmd_path(const Globals& g, const std::string& path, const std::vector<double>& s_grid, std::size_t cap,
              int depth) {
  const MetricTree x = load_tree(path);
  const double eps = require_eps(g, 1.0 / 64.0);
  const auto steps = replacement_path(x, s_grid, eps, cap, depth);
  if (g.format == "csv") {
    std::ostringstream out;
    out << "s,vertices,bound,hi,margin\n";
    for (const auto& st : steps) {
      out << format_number(st.s) << ',' << st.tree.size() << ',';
      if (st.hi) {
        const double allowed = *st.bound + 2.0 * eps;
        out << format_number(allowed) << ',' << format_number(*st.hi) << ',' << format_number(allowed - *st.hi);
      } else {
        out << ",,";
      }
      out << "\n";
    }
    emit(g, out.str());
    return;
  }
  json rows = json::array();
  for (const auto& st : steps) {
    json row = {{"s", round12(st.s)}, {"vertices", st.tree.size()}};
    row["hi"] = st.hi ? json(round12(*st.hi)) : json(nullptr);
    row["bound"] = st.bound ? json(round12(*st.bound + 2.0 * eps)) : json(nullptr);
    rows.push_back(row);
  }
  emit_json(g, {{"eps", round12(eps)}, {"steps", rows}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metric trees and Gromov-Hausdorff distances"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--tol", g.tol, "Comparison tolerance")->capture_default_str();
  app.add_option("--eps", g.eps, "Sampling resolution");
  app.add_option("--out", g.out, "Write output to this file instead of stdout");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  app.add_option("--seed", g.seed, "Seed recorded in reports")->capture_default_str();

  // tree
  auto* tree = app.add_subcommand("tree", "Build and check trees");
  tree->require_subcommand(1);
  tree->fallthrough();

  std::string validate_path;
  auto* validate = tree->add_subcommand("validate", "Check a tree document or CSV matrix");
  validate->add_option("file", validate_path)->required();

  CombParams comb;
  auto* comb_cmd = tree->add_subcommand("comb", "Comb tree B(s)");
  comb_cmd->add_option("--s", comb.s, "Parameter s in [0, 1]")->required();
  comb_cmd->add_option("--scale", comb.scale, "Spine length")->capture_default_str();
  comb_cmd->add_option("--depth", comb.depth_cap, "Generation cap")->capture_default_str();

  std::vector<double> star_a;
  double star_k = 1.0;
  std::optional<std::size_t> star_branches;
  auto* star = tree->add_subcommand("star", "Star tree K * R[a]");
  star->add_option("--a", star_a, "Coefficients a_1 .. a_N")->required();
  star->add_option("--k", star_k, "Scale K")->capture_default_str();
  star->add_option("--branches", star_branches, "Branch count; missing coefficients take interval midpoints");

  std::vector<std::string> wedge_parts;
  auto* wedge = tree->add_subcommand("wedge", "Wedge sum of pointed trees");
  wedge->add_option("parts", wedge_parts, "file@vertex, the first part's basepoint is the wedge point")->required();

  std::string replace_host, replace_plan;
  std::optional<double> replace_comb;
  int replace_depth = 16;
  auto* replace = tree->add_subcommand("replace", "Edge replacement");
  replace->add_option("host", replace_host)->required();
  auto* plan_opt = replace->add_option("--plan", replace_plan, "JSON list of replacement entries");
  auto* comb_opt = replace->add_option("--comb", replace_comb, "Replace every unit segment by the comb B(s)");
  replace->add_option("--depth", replace_depth, "Comb generation cap")->capture_default_str();
  plan_opt->excludes(comb_opt);

  std::string subdivide_path;
  auto* subdivide_cmd = tree->add_subcommand("subdivide", "Split edges to pieces of length <= eps");
  subdivide_cmd->add_option("file", subdivide_path)->required();

  // gh
  auto* gh = app.add_subcommand("gh", "Gromov-Hausdorff distances");
  gh->require_subcommand(1);
  gh->fallthrough();
  std::string gh_a, gh_b;
  std::size_t gh_cap = kDefaultExactCap;
  auto add_pair = [&](CLI::App* c) {
    c->add_option("first", gh_a, "Tree document or CSV matrix")->required();
    c->add_option("second", gh_b, "Tree document or CSV matrix")->required();
    c->add_option("--cap", gh_cap, "Largest space solved exactly")->capture_default_str();
  };
  auto* gh_exact_cmd = gh->add_subcommand("exact", "Exact distance of two small spaces");
  auto* gh_bounds_cmd = gh->add_subcommand("bounds", "Lower and upper bounds");
  auto* gh_trees_cmd = gh->add_subcommand("trees", "Certified interval between two trees");
  add_pair(gh_exact_cmd);
  add_pair(gh_bounds_cmd);
  add_pair(gh_trees_cmd);

  // lab
  auto* lab = app.add_subcommand("lab", "Embedding scans");
  lab->require_subcommand(1);
  lab->fallthrough();
  std::string config;
  std::size_t embed_u = 0;
  int lab_k = 1;
  auto* embed = lab->add_subcommand("embed", "Build F(u, k)");
  embed->add_option("--config", config)->required();
  embed->add_option("--u", embed_u, "Grid index")->required();
  embed->add_option("--k", lab_k, "Branch index")->capture_default_str();
  auto* continuity = lab->add_subcommand("scan-continuity", "GH estimates against the analytic modulus");
  continuity->add_option("--config", config)->required();
  continuity->add_option("--k", lab_k, "Branch index")->capture_default_str();
  auto* injectivity = lab->add_subcommand("scan-injectivity", "Star fingerprints over the grid");
  injectivity->add_option("--config", config)->required();
  std::string path_tree;
  std::vector<double> s_grid;
  std::size_t path_cap = kDefaultExactCap;
  int path_depth = 16;
  auto* path = lab->add_subcommand("path", "Replacement path Y(s)");
  path->add_option("file", path_tree)->required();
  path->add_option("--s-grid", s_grid, "Sorted values in [0, 1]")->required();
  path->add_option("--cap", path_cap)->capture_default_str();
  path->add_option("--depth", path_depth)->capture_default_str();

  for (auto* c : {validate, comb_cmd, star, wedge, replace, subdivide_cmd, gh_exact_cmd, gh_bounds_cmd, gh_trees_cmd,
                  embed, continuity, injectivity, path})
    c->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate) {
      cmd_validate(g, validate_path);
    } else if (*comb_cmd) {
      emit_tree(g, comb_tree(comb));
    } else if (*star) {
      std::vector<double> a = star_a;
      if (star_branches) {
        a.resize(*star_branches);
        for (std::size_t i = star_a.size(); i < a.size(); ++i) a[i] = 1.5 * pow2(-2 * static_cast<int>(i + 1));
      }
      emit_tree(g, star_tree({a, star_k, require_eps(g, 0.25)}));
    } else if (*wedge) {
      std::vector<PointedTree> parts;
      for (const auto& p : wedge_parts) parts.push_back(load_pointed(p));
      emit_tree(g, wedge_sum(parts));
    } else if (*replace) {
      const MetricTree host = load_tree(replace_host);
      if (replace_comb) emit_tree(g, replaced_tree(host, *replace_comb, replace_depth));
      else if (!replace_plan.empty()) emit_tree(g, replace_edges(host, load_plan(host, replace_plan), g.tol));
      else throw UsageError("tree replace needs --plan or --comb");
    } else if (*subdivide_cmd) {
      if (!g.eps) throw UsageError("tree subdivide needs --eps");
      emit_tree(g, subdivide(load_tree(subdivide_path), *g.eps));
    } else if (*gh_exact_cmd) {
      emit(g, format_number(gh_exact(load_space(gh_a), load_space(gh_b), gh_cap)) + "\n");
    } else if (*gh_bounds_cmd) {
      emit_json(g, bounds_json(load_space(gh_a), load_space(gh_b)));
    } else if (*gh_trees_cmd) {
      const GHInterval iv = gh_tree_interval(load_tree(gh_a), load_tree(gh_b), require_eps(g, 1.0 / 64.0), gh_cap);
      emit_json(g, interval_to_json(iv));
    } else if (*embed) {
      emit_tree(g, build_F(load_config(g, config), embed_u, lab_k));
    } else if (*continuity) {
      cmd_scan_continuity(g, config, lab_k);
    } else if (*injectivity) {
      cmd_scan_injectivity(g, config);
    } else if (*path) {
      cmd_path(g, path_tree, s_grid, path_cap, path_depth);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const CheckFailed& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what();
    if (!e.witness().empty()) {
      std::cerr << " (witness";
      for (auto w : e.witness()) std::cerr << ' ' << w;
      std::cerr << ')';
    }
    std::cerr << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}
