// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "feedforge/export.hpp"
#include "feedforge/metrics.hpp"
#include "feedforge/pipeline.hpp"
#include "networks.hpp"
#include "support.hpp"

using namespace feedforge;
namespace fs = std::filesystem;
namespace ts = testing_support;
using json = nlohmann::json;

namespace {

const fs::path kData = FEEDFORGE_DATA_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& why) {
    if (!ok && pass) {
      pass = false;
      detail = why;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("feedforge_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

SynthesisProblem random_problem(std::mt19937_64& rng, int n, int m, int terminals, bool integer_costs) {
  const auto raw = ts::random_connected(rng, n, m, integer_costs);
  const auto ids = ts::random_terminals(rng, n, terminals);
  return ts::problem_from(n, raw, ids[0], {ids.begin() + 1, ids.end()});
}

/// Shared instance set of the oracle and heuristic-quality checks.
std::vector<SynthesisProblem> oracle_instances() {
  std::mt19937_64 rng(2002);
  std::vector<SynthesisProblem> out;
  for (int k = 0; k < 50; ++k) {
    const int n = std::uniform_int_distribution<int>(6, 30)(rng);
    const int m = std::uniform_int_distribution<int>(n - 1, std::min(n * (n - 1) / 2, 3 * n))(rng);
    const int t = std::uniform_int_distribution<int>(2, 6)(rng);
    out.push_back(random_problem(rng, n, m, t, k % 2 == 0));
  }
  return out;
}

bool connected_tree_with(const FeederGraph& f, const SynthesisProblem& p) {
  if (f.edges.size() + 1 != f.nodes.size()) return false;
  std::map<NodeId, NodeId> parent;
  for (const auto& n : f.nodes) parent[n.id] = n.id;
  std::function<NodeId(NodeId)> find = [&](NodeId x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (const auto& e : f.edges) parent[find(e.parent)] = find(e.child);
  const NodeId root = find(f.root);
  for (const auto& n : f.nodes)
    if (find(n.id) != root) return false;
  if (!f.find(p.source)) return false;
  for (NodeId r : p.required)
    if (!f.find(r)) return false;
  return true;
}

struct DeskRun {
  ExitCode code = ExitCode::internal;
  double seconds = 0.0;
  fs::path dir;
};

DeskRun run_config(const fs::path& config, const fs::path& out) {
  std::ostringstream table, log;
  const auto t0 = std::chrono::steady_clock::now();
  const auto code = run_pipeline(load_config(config), out, table, log);
  return {code, seconds_since(t0), out};
}

std::map<std::string, std::string> artifacts(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "run_manifest.json") out[e.path().filename().string()] = slurp(e.path());
  return out;
}

// ---------------------------------------------------------------------------

Outcome exact_vs_brute_force() {
  Outcome o;
  std::mt19937_64 rng(1001);
  const auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < 200 && o.pass; ++k) {
    const int n = std::uniform_int_distribution<int>(3, 8)(rng);
    const int m = std::uniform_int_distribution<int>(n - 1, std::min(n * (n - 1) / 2, n + 6))(rng);
    const int req = std::uniform_int_distribution<int>(2, std::min(4, n - 1))(rng);
    const auto p = random_problem(rng, n, m, req + 1, k % 2 == 0);
    const auto s = solve_exact(p);
    const auto bf = ts::brute_force(p);
    o.require(s.proven_optimal, fmt::format("instance {} not proven optimal", k));
    o.require(s.objective == bf.objective, fmt::format("instance {}: exact {} vs enumeration {}", k, s.objective, bf.objective));
  }
  const double secs = seconds_since(t0);
  o.require(secs < 10.0, fmt::format("took {:.2f} s", secs));
  if (o.pass) o.detail = fmt::format("200 instances, objectives identical, {:.2f} s", secs);
  return o;
}

Outcome exact_vs_oracle() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto set = oracle_instances();
  for (std::size_t k = 0; k < set.size() && o.pass; ++k) {
    const double e = solve_exact(set[k]).objective, d = steiner_oracle(set[k]).objective;
    o.require(std::abs(e - d) <= 1e-9 * std::max(1.0, std::abs(d)), fmt::format("instance {}: exact {} vs DP {}", k, e, d));
  }
  const double secs = seconds_since(t0);
  o.require(secs < 60.0, fmt::format("took {:.2f} s", secs));
  if (o.pass) o.detail = fmt::format("50 instances agree to 1e-9, {:.2f} s", secs);
  return o;
}

Outcome radiality_fuzz() {
  Outcome o;
  std::mt19937_64 rng(3003);
  for (int k = 0; k < 1000 && o.pass; ++k) {
    const int n = std::uniform_int_distribution<int>(2, 150)(rng);
    const int m = std::uniform_int_distribution<int>(n - 1, std::min(n * (n - 1) / 2, 3 * n))(rng);
    const int t = std::uniform_int_distribution<int>(1, std::min(n, 40))(rng);
    const auto p = random_problem(rng, n, m, t, k % 3 == 0);
    const auto s = solve_heuristic(p);
    const auto report = verify_solution(p, s);
    o.require(report.ok(), fmt::format("instance {}: {} violations", k, report.violations.size()));
    if (!report.ok()) break;
    o.require(connected_tree_with(to_feeder_graph(p, s), p), fmt::format("instance {}: feeder not a spanning tree", k));
  }
  if (o.pass) o.detail = "1000 instances, zero violations";
  return o;
}

Outcome heuristic_quality() {
  Outcome o;
  double worst = 1.0;
  for (const auto& p : oracle_instances()) {
    const double h = solve_heuristic(p).objective, e = solve_exact(p).objective;
    const double ratio = e == 0.0 ? 1.0 : h / e;
    worst = std::max(worst, ratio);
    o.require(ratio >= 1.0 - 1e-12 && ratio <= 2.0, fmt::format("ratio {}", ratio));
  }
  if (o.pass) o.detail = fmt::format("worst ratio {:.6f}", worst);
  return o;
}

Outcome power_flow_oracle() {
  Outcome o;
  std::mt19937_64 rng(5005);
  double worst = 0.0;
  for (int k = 0; k < 100 && o.pass; ++k) {
    const auto net = ts::random_radial_network(rng, std::uniform_int_distribution<int>(2, 50)(rng), 0.2);
    const auto r = run_power_flow(net);
    o.require(r.converged, fmt::format("feeder {} did not converge", k));
    const auto ref = ts::zbus_fixed_point(net);
    for (const auto& [id, v] : r.v_pu) worst = std::max(worst, std::abs(v - std::abs(ref.at(id))));
  }
  o.require(worst <= 1e-8, fmt::format("fixed-point gap {:.3e}", worst));
  double worst2 = 0.0;
  std::uniform_real_distribution<double> z(0.001, 0.005), s(0.0, 0.2);
  for (int k = 0; k < 100; ++k) {
    ts::NetworkBuilder b(2);
    const double r = z(rng), x = z(rng), p = s(rng), q = s(rng) / 2;
    b.line(1, 2, r, x).load(2, p, q);
    const auto res = run_power_flow(b.net);
    const double bq = 2.0 * (r * p + x * q) - 1.0, c = (r * r + x * x) * (p * p + q * q);
    worst2 = std::max(worst2, std::abs(res.v_pu.at(2) - std::sqrt((-bq + std::sqrt(bq * bq - 4.0 * c)) / 2.0)));
  }
  // The fixed published example as well.
  {
    ts::NetworkBuilder b(2);
    b.line(1, 2, 0.01, 0.01).load(2, 0.1, 0.0);
    const double bq = 2.0 * 0.01 * 0.1 - 1.0, c = 0.0002 * 0.01;
    worst2 = std::max(worst2, std::abs(run_power_flow(b.net).v_pu.at(2) - std::sqrt((-bq + std::sqrt(bq * bq - 4.0 * c)) / 2.0)));
  }
  o.require(worst2 <= 1e-10, fmt::format("two-bus gap {:.3e}", worst2));
  if (o.pass) o.detail = fmt::format("max gap {:.2e} pu (100 feeders), {:.2e} pu (two-bus)", worst, worst2);
  return o;
}

Outcome load_allocation() {
  Outcome o;
  std::mt19937_64 rng(6006);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    std::map<NodeId, double> w;
    const int n = std::uniform_int_distribution<int>(1, 200)(rng);
    std::lognormal_distribution<double> d(0.0, 3.0);
    for (int i = 1; i <= n; ++i) w[i] = d(rng);
    LoadAllocationConfig c;
    c.total_p_mw = std::uniform_real_distribution<double>(1e-3, 100.0)(rng);
    c.power_factor = 0.8;
    const auto loads = allocate_loads(w, c, k % 2 == 0 ? 0 : 360);
    double sum = 0.0;
    for (const auto& l : loads) {
      sum += l.p_mw;
      o.require(l.q_mvar == 0.75 * l.p_mw, fmt::format("Q/P not exactly 0.75 at bus {}", l.bus));
    }
    worst = std::max(worst, std::abs(sum - c.total_p_mw) / c.total_p_mw);
  }
  o.require(worst <= 1e-12, fmt::format("sum error {:.3e}", worst));
  LoadAllocationConfig c;
  c.total_p_mw = 1.0;
  const auto uniform = allocate_loads({{1, 2.0}, {2, 2.0}, {3, 2.0}, {4, 2.0}}, c, 0);
  for (const auto& l : uniform) o.require(l.p_mw == 0.25, "uniform shares differ");
  if (o.pass) o.detail = fmt::format("max relative sum error {:.1e}; Q = 0.75 P exact; uniform 0.25 MW", worst);
  return o;
}

Outcome scenario_monotonicity(const DeskRun& desk) {
  Outcome o;
  o.require(desk.code == ExitCode::ok, fmt::format("desk run exited {}", static_cast<int>(desk.code)));
  if (!o.pass) return o;
  const auto cfg = load_config(kData / "desk" / "config.yaml");
  const auto outcomes = scenario_outcomes_from_json(json::parse(slurp(desk.dir / "powerflow.json")));
  std::map<std::string, const ScenarioOutcome*> by;
  for (const auto& s : outcomes) by[s.scenario.name] = &s;
  o.require(by.count("sanity") && by.count("representative") && by.count("stressed"), "scenario missing");
  if (!o.pass) return o;
  o.require(by["sanity"]->scenario.factor == 0.25 && by["representative"]->scenario.factor == 1.0 &&
                by["stressed"]->scenario.factor == 1.5,
            "factors differ from 0.25/1.0/1.5");
  const double slack = 10 * cfg.powerflow.tol;
  for (const auto& [id, v] : by["sanity"]->result.v_pu) {
    o.require(v >= by["representative"]->result.v_pu.at(id) - slack, fmt::format("bus {} sanity < representative", id));
    o.require(by["representative"]->result.v_pu.at(id) >= by["stressed"]->result.v_pu.at(id) - slack,
              fmt::format("bus {} representative < stressed", id));
  }
  const double vmin = by["stressed"]->report.v_min;
  o.require(vmin > cfg.v_min, fmt::format("stressed min {:.4f} below {:.2f}", vmin, cfg.v_min));
  if (o.pass)
    o.detail = fmt::format("{} buses ordered; stressed V_min {:.4f} > {:.2f}", by["sanity"]->result.v_pu.size(), vmin, cfg.v_min);
  return o;
}

Outcome table_identities(const std::vector<fs::path>& runs) {
  Outcome o;
  std::size_t checked = 0;
  auto check = [&](const StructuralSummary& s, const std::string& what) {
    ++checked;
    o.require(s.n_branches == s.n_buses - 1, what + ": branches != buses - 1");
    if (s.n_branches > 0)
      o.require(std::abs(s.mean_line_km * s.n_branches - s.total_line_km) <= 1e-9, what + ": mean length identity");
    if (s.n_load_points > 0)
      o.require(std::abs(static_cast<double>(s.total_households) / s.n_load_points - s.mean_households_per_load_point) <= 1e-9,
                what + ": household identity");
  };
  for (const auto& dir : runs) {
    if (!fs::exists(dir / "summary.json")) {
      o.require(false, dir.string() + " has no summary");
      continue;
    }
    check(structural_summary_from_json(json::parse(slurp(dir / "summary.json"))["structure"]), dir.filename().string());
  }
  // Desk case: 360 households over the load points.
  if (!runs.empty() && fs::exists(runs.front() / "summary.json")) {
    const auto s = structural_summary_from_json(json::parse(slurp(runs.front() / "summary.json"))["structure"]);
    o.require(s.total_households == 360, "desk households != 360");
    o.require(std::abs(s.mean_households_per_load_point - 360.0 / s.n_load_points) <= 1e-9, "desk mean != 360 / load points");
  }
  std::mt19937_64 rng(8008);
  for (int k = 0; k < 200; ++k) {
    const int n = std::uniform_int_distribution<int>(2, 60)(rng);
    const auto p = random_problem(rng, n, 2 * n, std::uniform_int_distribution<int>(2, n)(rng), false);
    const auto f = to_feeder_graph(p, solve_heuristic(p));
    LoadAllocationConfig lc;
    lc.centroids = {default_centroid(f, std::nullopt)};
    const auto net = build_network(f, assign_line_params(f, default_line_templates()),
                                   allocate_loads(compute_weights(f, lc, std::nullopt), lc, 360));
    check(structural_summary(f, net), fmt::format("random feeder {}", k));
  }
  if (o.pass) o.detail = fmt::format("{} feeders checked", checked);
  return o;
}

Outcome desk_end_to_end(const DeskRun& first, const DeskRun& second) {
  Outcome o;
  o.require(first.code == ExitCode::ok, fmt::format("exit code {}", static_cast<int>(first.code)));
  o.require(first.seconds < 60.0, fmt::format("took {:.2f} s", first.seconds));
  for (const auto& name : artifact_names()) o.require(fs::exists(first.dir / name), name + " missing");
  const auto cfg = load_config(kData / "desk" / "config.yaml");
  o.require(cfg.solver == SolverKind::exact, "desk config does not use the exact solver");
  o.require(cfg.loads.total_p_mw == 1.44 && cfg.households_total.value_or(0) == 360, "desk parameters differ");
  if (fs::exists(first.dir / "solution.json"))
    o.require(json::parse(slurp(first.dir / "solution.json"))["solution"]["proven_optimal"].get<bool>(), "not proven optimal");
  o.require(second.code == ExitCode::ok && artifacts(first.dir) == artifacts(second.dir), "repeat run differs");
  if (o.pass) o.detail = fmt::format("{:.2f} s, six artifacts, repeat byte-identical", first.seconds);
  return o;
}

Outcome export_round_trip(const DeskRun& desk) {
  Outcome o;
  o.require(desk.code == ExitCode::ok, "desk run failed");
  if (!o.pass) return o;
  const std::string doc = slurp(desk.dir / "network.json");
  const auto net = from_network_json(doc);
  o.require(to_network_json(net, {}) == to_network_json(from_network_json(to_network_json(net, {})), {}), "JSON not stable");
  o.require(from_network_json(to_network_json(net, {})) == net, "network JSON round trip differs");

  const auto feeder = feeder_graph_from_json(json::parse(slurp(desk.dir / "feeder.json")));
  const auto back = parse_geojson(to_geojson(feeder, net)).graph;
  std::map<std::pair<double, double>, NodeId> by_coord;
  for (const auto& n : feeder.nodes) by_coord[{n.point.lon, n.point.lat}] = n.id;
  o.require(back.nodes.size() == feeder.nodes.size(), "GeoJSON node count differs");
  std::map<NodeId, NodeId> map;
  for (const auto& [id, p] : back.nodes) {
    auto it = by_coord.find({p.lon, p.lat});
    o.require(it != by_coord.end(), fmt::format("GeoJSON node {} has no feeder match", id));
    if (it != by_coord.end()) map[id] = it->second;
  }
  std::set<std::pair<NodeId, NodeId>> want, got;
  for (const auto& e : feeder.edges) want.insert(std::minmax(e.parent, e.child));
  for (const auto& e : back.edges) got.insert(std::minmax(map[e.u], map[e.v]));
  o.require(want == got, "GeoJSON edges differ");
  if (o.pass) o.detail = fmt::format("network bit-exact; {} nodes / {} edges isomorphic", feeder.nodes.size(), feeder.edges.size());
  return o;
}

}  // namespace

int main() {
  const DeskRun desk = run_config(kData / "desk" / "config.yaml", scratch("desk_a"));
  const DeskRun desk_again = run_config(kData / "desk" / "config.yaml", scratch("desk_b"));
  const DeskRun small = run_config(kData / "small" / "config.yaml", scratch("small"));

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exact solver equals exhaustive enumeration", exact_vs_brute_force},
      {"exact solver equals the Steiner DP oracle", exact_vs_oracle},
      {"heuristic output always radial and feasible", radiality_fuzz},
      {"heuristic within twice the optimum", heuristic_quality},
      {"load-flow sweep matches independent solvers", power_flow_oracle},
      {"load allocation is exact", load_allocation},
      {"desk scenarios ordered and above V_min", [&] { return scenario_monotonicity(desk); }},
      {"summary identities on every feeder", [&] { return table_identities({desk.dir, small.dir}); }},
      {"desk case end to end, deterministic", [&] { return desk_end_to_end(desk, desk_again); }},
      {"export round trips", [&] { return export_round_trip(desk); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << (i + 1) << ": " << criteria[i].first << " -- " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
