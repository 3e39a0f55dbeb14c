#include <algorithm>
#include <cmath>
#include <deque>

#include "feedforge/error.hpp"
#include "feedforge/synth.hpp"
#include "steiner_graph.hpp"

namespace feedforge {

using json = nlohmann::json;

SynthesisProblem SynthesisProblem::make(CandidateGraph graph, NodeId source, std::set<NodeId> required,
                                        AlphaWeights alpha) {
  SynthesisProblem p;
  p.big_m = graph.nodes.empty() ? 0.0 : static_cast<double>(graph.nodes.size() - 1);
  p.graph = std::move(graph);
  p.source = source;
  p.required = std::move(required);
  p.alpha = alpha;
  return p;
}

void SynthesisProblem::validate() const {
  if (graph.nodes.empty()) throw EmptyGraphError("synthesis problem has an empty candidate graph");
  if (!graph.find(source)) throw ConfigError("source node " + std::to_string(source) + " is not a candidate node");
  for (NodeId r : required)
    if (!graph.find(r)) throw ConfigError("required node " + std::to_string(r) + " is not a candidate node");
  if (!(alpha.geo >= 0.0) || !(alpha.top >= 0.0) || !(alpha.elec >= 0.0))
    throw ConfigError("alpha weights must be non-negative");
  if (alpha.geo == 0.0 && alpha.top == 0.0 && alpha.elec == 0.0)
    throw ConfigError("alpha weights must not all be zero");
  if (big_m < static_cast<double>(graph.nodes.size() - 1))
    throw ConfigError("big_m must be at least |N| - 1 for the flow to certify connectivity");
}

std::vector<std::size_t> SynthesisProblem::terminal_indices() const {
  std::vector<std::size_t> t{graph.index_of(source)};
  for (NodeId r : required) t.push_back(graph.index_of(r));
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

double edge_cost(const SynthesisProblem& problem, const CandidateEdge& edge) {
  const auto& a = problem.alpha;
  return a.geo * edge.weight + a.top + a.elec * edge.length_m;
}

std::vector<double> edge_costs(const SynthesisProblem& problem) {
  std::vector<double> c;
  c.reserve(problem.graph.edges.size());
  for (const auto& e : problem.graph.edges) c.push_back(edge_cost(problem, e));
  return c;
}

std::vector<std::size_t> SynthesisSolution::selected_edges() const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < z.size(); ++e)
    if (z[e] != 0) out.push_back(e);
  return out;
}

double objective_of(const SynthesisProblem& problem, const std::vector<std::size_t>& edges) {
  std::vector<std::size_t> sorted = edges;
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (std::size_t e : sorted) total += edge_cost(problem, problem.graph.edges.at(e));
  return total;
}

SynthesisSolution solution_from_tree(const SynthesisProblem& problem, std::vector<std::size_t> edges) {
  const auto& g = problem.graph;
  const std::size_t n = g.nodes.size(), m = g.edges.size();
  std::sort(edges.begin(), edges.end());
  SynthesisSolution s;
  s.y.assign(n, 0);
  s.z.assign(m, 0);
  s.flow.assign(2 * m, 0.0);
  const std::size_t root = g.index_of(problem.source);
  s.y[root] = 1;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
  for (std::size_t e : edges) {
    const std::size_t u = g.index_of(g.edges[e].u), v = g.index_of(g.edges[e].v);
    s.z[e] = 1;
    s.y[u] = s.y[v] = 1;
    adj[u].emplace_back(v, e);
    adj[v].emplace_back(u, e);
  }
  // Flow on the arc into a node carries one unit per node of its subtree.
  std::vector<std::size_t> order{root}, parent_edge(n, SIZE_MAX), parent(n, SIZE_MAX);
  std::vector<char> seen(n, 0);
  seen[root] = 1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t v = order[i];
    for (auto [w, e] : adj[v]) {
      if (seen[w]) continue;
      seen[w] = 1;
      parent[w] = v;
      parent_edge[w] = e;
      order.push_back(w);
    }
  }
  std::vector<double> subtree(n, 1.0);
  for (std::size_t i = order.size(); i-- > 1;) {
    const std::size_t v = order[i];
    const std::size_t e = parent_edge[v];
    const bool forward = g.index_of(g.edges[e].u) == parent[v];
    s.flow[2 * e + (forward ? 0 : 1)] = subtree[v];
    subtree[parent[v]] += subtree[v];
  }
  s.objective = objective_of(problem, edges);
  return s;
}

SynthesisSolution solve_heuristic(const SynthesisProblem& problem) {
  problem.validate();
  const auto g = detail::WeightedGraph::from_problem(problem);
  const auto terminals = problem.terminal_indices();
  const std::size_t root = problem.graph.index_of(problem.source);
  std::vector<char> is_terminal(g.n, 0);
  for (std::size_t t : terminals) is_terminal[t] = 1;

  auto tree = detail::path_join(g, root, terminals);
  if (!tree) throw DataError("required nodes cannot be connected to the source");
  auto edges = detail::polish(g, std::move(*tree), is_terminal, root);
  edges = detail::key_path_exchange(g, std::move(edges), is_terminal, root);

  SynthesisSolution s = solution_from_tree(problem, edges);
  s.proven_optimal = false;
  const auto bound = detail::dual_ascent(g, root, terminals);
  s.gap = s.objective > 0.0 ? std::max(0.0, (s.objective - bound.lower_bound) / s.objective) : 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// verify_solution

VerificationReport verify_solution(const SynthesisProblem& problem, const SynthesisSolution& sol) {
  VerificationReport report;
  auto add = [&](std::string c, std::string d) { report.violations.push_back({std::move(c), std::move(d)}); };
  const auto& g = problem.graph;
  const std::size_t n = g.nodes.size(), m = g.edges.size();
  if (sol.y.size() != n || sol.z.size() != m || sol.flow.size() != 2 * m) {
    add("shape", "y/z/flow sizes do not match the candidate graph");
    return report;
  }
  auto name = [&](std::size_t i) { return std::to_string(g.nodes[i].id); };
  auto edge_name = [&](std::size_t e) {
    return "(" + std::to_string(g.edges[e].u) + "," + std::to_string(g.edges[e].v) + ")#" + std::to_string(e);
  };
  constexpr double kTol = 1e-9;

  for (std::size_t i = 0; i < n; ++i)
    if (sol.y[i] > 1) add("binary", "y at node " + name(i) + " is not 0/1");
  for (std::size_t e = 0; e < m; ++e)
    if (sol.z[e] > 1) add("binary", "z at edge " + edge_name(e) + " is not 0/1");

  std::vector<std::size_t> eu(m), ev(m);
  for (std::size_t e = 0; e < m; ++e) {
    eu[e] = g.index_of(g.edges[e].u);
    ev[e] = g.index_of(g.edges[e].v);
    if (sol.z[e] > sol.y[eu[e]] || sol.z[e] > sol.y[ev[e]]) add("coupling", "edge " + edge_name(e) + " selected without both endpoints");
  }

  const std::size_t s = g.index_of(problem.source);
  if (sol.y[s] != 1) add("required", "source " + name(s) + " not retained");
  for (NodeId r : problem.required) {
    const std::size_t i = g.index_of(r);
    if (sol.y[i] != 1) add("required", "required node " + name(i) + " not retained");
  }

  long sum_y = 0, sum_z = 0;
  for (auto v : sol.y) sum_y += v;
  for (auto v : sol.z) sum_z += v;
  if (sum_z != sum_y - 1)
    add("cardinality", "sum z = " + std::to_string(sum_z) + " but sum y - 1 = " + std::to_string(sum_y - 1));

  std::vector<double> inflow(n, 0.0), outflow(n, 0.0);
  for (std::size_t e = 0; e < m; ++e) {
    const double fwd = sol.flow[2 * e], bwd = sol.flow[2 * e + 1];
    outflow[eu[e]] += fwd;
    inflow[ev[e]] += fwd;
    outflow[ev[e]] += bwd;
    inflow[eu[e]] += bwd;
    const double cap = problem.big_m * sol.z[e];
    for (double f : {fwd, bwd})
      if (f < -kTol || f > cap + kTol) add("capacity", "flow " + std::to_string(f) + " outside [0, M z] on " + edge_name(e));
  }
  double others = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == s) continue;
    others += sol.y[i];
    const double net = inflow[i] - outflow[i];
    if (std::abs(net - sol.y[i]) > kTol)
      add("flow_balance", "node " + name(i) + " absorbs " + std::to_string(net) + " but y = " + std::to_string(sol.y[i]));
  }
  if (std::abs((outflow[s] - inflow[s]) - others) > kTol)
    add("flow_balance", "source emits " + std::to_string(outflow[s] - inflow[s]) + " but " + std::to_string(others) + " nodes are retained");

  report.recomputed_objective = objective_of(problem, sol.selected_edges());
  if (std::abs(report.recomputed_objective - sol.objective) > 1e-9 * std::max(1.0, std::abs(report.recomputed_objective)))
    add("objective", "reported " + std::to_string(sol.objective) + " but edges sum to " + std::to_string(report.recomputed_objective));
  return report;
}

// ---------------------------------------------------------------------------
// FeederGraph

std::optional<std::size_t> FeederGraph::find(NodeId id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id, [](const FeederNode& n, NodeId k) { return n.id < k; });
  if (it == nodes.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - nodes.begin());
}

const FeederNode& FeederGraph::node(NodeId id) const {
  if (auto i = find(id)) return nodes[*i];
  throw DataError("node " + std::to_string(id) + " is not in the feeder");
}

std::size_t FeederGraph::degree(NodeId id) const {
  return static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(),
                                                 [&](const FeederEdge& e) { return e.parent == id || e.child == id; }));
}

FeederGraph to_feeder_graph(const SynthesisProblem& problem, const SynthesisSolution& sol) {
  const auto report = verify_solution(problem, sol);
  if (!report.ok()) {
    std::vector<std::string> msgs;
    for (const auto& v : report.violations) msgs.push_back("rejected solution: " + v.constraint + ": " + v.detail);
    throw ValidationError(std::move(msgs));
  }
  const auto& g = problem.graph;
  const std::size_t n = g.nodes.size();
  const std::size_t root = g.index_of(problem.source);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
  for (std::size_t e : sol.selected_edges()) {
    const std::size_t u = g.index_of(g.edges[e].u), v = g.index_of(g.edges[e].v);
    adj[u].emplace_back(v, e);
    adj[v].emplace_back(u, e);
  }
  std::vector<int> depth(n, -1);
  std::vector<std::size_t> parent(n, SIZE_MAX);
  std::deque<std::size_t> queue{root};
  depth[root] = 0;
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    for (auto [w, e] : adj[v]) {
      if (depth[w] >= 0) continue;
      depth[w] = depth[v] + 1;
      parent[w] = v;
      queue.push_back(w);
    }
  }
  FeederGraph f;
  f.root = problem.source;
  f.frame = g.frame;
  for (std::size_t i = 0; i < n; ++i) {
    if (sol.y[i] == 0) continue;
    if (depth[i] < 0) throw ValidationError({"rejected solution: node " + std::to_string(g.nodes[i].id) + " is not reachable from the source"});
    FeederNode node{g.nodes[i].id, g.nodes[i].point, std::nullopt, depth[i]};
    if (parent[i] != SIZE_MAX) node.parent = g.nodes[parent[i]].id;
    f.nodes.push_back(std::move(node));
  }
  for (std::size_t e : sol.selected_edges()) {
    const auto& ce = g.edges[e];
    const std::size_t u = g.index_of(ce.u), v = g.index_of(ce.v);
    const bool u_parent = parent[v] == u;
    FeederEdge fe;
    fe.parent = u_parent ? ce.u : ce.v;
    fe.child = u_parent ? ce.v : ce.u;
    fe.candidate_edge = e;
    fe.length_m = ce.length_m;
    fe.road_class = ce.road_class;
    fe.geometry = ce.geometry;
    if (!u_parent) std::reverse(fe.geometry.begin(), fe.geometry.end());
    f.edges.push_back(std::move(fe));
  }
  return f;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json point_json(const GeoPoint& p) {
  json a = json::array({p.lon, p.lat});
  if (p.xy) {
    a.push_back(p.xy->x);
    a.push_back(p.xy->y);
  }
  return a;
}

GeoPoint point_from(const json& a) {
  GeoPoint p{a.at(0).get<double>(), a.at(1).get<double>(), std::nullopt};
  if (a.size() >= 4) p.xy = Vec2{a.at(2).get<double>(), a.at(3).get<double>()};
  return p;
}

}  // namespace

json to_json(const SynthesisProblem& problem) {
  return {{"source", problem.source},
          {"required", problem.required},
          {"alpha", {{"geo", problem.alpha.geo}, {"top", problem.alpha.top}, {"elec", problem.alpha.elec}}},
          {"big_m", problem.big_m},
          {"graph", to_json(problem.graph)}};
}

SynthesisProblem synthesis_problem_from_json(const json& j) {
  try {
    SynthesisProblem p;
    p.graph = candidate_graph_from_json(j.at("graph"));
    p.source = j.at("source").get<NodeId>();
    p.required = j.at("required").get<std::set<NodeId>>();
    const auto& a = j.at("alpha");
    p.alpha = {a.at("geo").get<double>(), a.at("top").get<double>(), a.at("elec").get<double>()};
    p.big_m = j.at("big_m").get<double>();
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed synthesis problem: ") + e.what());
  }
}

json to_json(const SynthesisProblem& problem, const SynthesisSolution& sol) {
  const auto& g = problem.graph;
  json y = json::array(), z = json::array(), f = json::array();
  for (std::size_t i = 0; i < sol.y.size(); ++i) y.push_back({g.nodes[i].id, sol.y[i]});
  for (std::size_t e = 0; e < sol.z.size(); ++e) {
    if (sol.z[e] == 0) continue;
    z.push_back({{"edge", e}, {"u", g.edges[e].u}, {"v", g.edges[e].v}});
  }
  for (std::size_t a = 0; a < sol.flow.size(); ++a) {
    if (sol.flow[a] == 0.0) continue;
    const auto& e = g.edges[a / 2];
    const bool fwd = a % 2 == 0;
    f.push_back({{"from", fwd ? e.u : e.v}, {"to", fwd ? e.v : e.u}, {"edge", a / 2}, {"flow", sol.flow[a]}});
  }
  return {{"y", std::move(y)},           {"z", std::move(z)},
          {"f", std::move(f)},           {"objective", sol.objective},
          {"proven_optimal", sol.proven_optimal}, {"gap", sol.gap}};
}

SynthesisSolution synthesis_solution_from_json(const SynthesisProblem& problem, const json& j) {
  try {
    const auto& g = problem.graph;
    SynthesisSolution s;
    s.y.assign(g.nodes.size(), 0);
    s.z.assign(g.edges.size(), 0);
    s.flow.assign(2 * g.edges.size(), 0.0);
    for (const auto& entry : j.at("y")) s.y.at(g.index_of(entry.at(0).get<NodeId>())) = entry.at(1).get<std::uint8_t>();
    for (const auto& entry : j.at("z")) s.z.at(entry.at("edge").get<std::size_t>()) = 1;
    for (const auto& entry : j.at("f")) {
      const std::size_t e = entry.at("edge").get<std::size_t>();
      const bool fwd = entry.at("from").get<NodeId>() == g.edges.at(e).u;
      s.flow.at(2 * e + (fwd ? 0 : 1)) = entry.at("flow").get<double>();
    }
    s.objective = j.at("objective").get<double>();
    s.proven_optimal = j.at("proven_optimal").get<bool>();
    s.gap = j.at("gap").get<double>();
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed synthesis solution: ") + e.what());
  }
}

json to_json(const FeederGraph& feeder) {
  json nodes = json::array(), edges = json::array();
  for (const auto& n : feeder.nodes) {
    json node{{"id", n.id}, {"lon", n.point.lon}, {"lat", n.point.lat}, {"depth", n.depth}};
    if (n.point.xy) {
      node["x"] = n.point.xy->x;
      node["y"] = n.point.xy->y;
    }
    node["parent"] = n.parent ? json(*n.parent) : json(nullptr);
    nodes.push_back(std::move(node));
  }
  for (const auto& e : feeder.edges) {
    json geom = json::array();
    for (const auto& p : e.geometry) geom.push_back(point_json(p));
    edges.push_back({{"parent", e.parent},
                     {"child", e.child},
                     {"candidate_edge", e.candidate_edge},
                     {"length_m", e.length_m},
                     {"class", e.road_class},
                     {"geometry", std::move(geom)}});
  }
  json frame = feeder.frame ? json{{"lon0", feeder.frame->lon0()}, {"lat0", feeder.frame->lat0()}} : json(nullptr);
  return {{"root", feeder.root}, {"frame", frame}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

FeederGraph feeder_graph_from_json(const json& j) {
  try {
    FeederGraph f;
    f.root = j.at("root").get<NodeId>();
    if (j.contains("frame") && !j["frame"].is_null())
      f.frame = LocalFrame(j["frame"].at("lon0").get<double>(), j["frame"].at("lat0").get<double>());
    for (const auto& n : j.at("nodes")) {
      FeederNode node;
      node.id = n.at("id").get<NodeId>();
      node.point = {n.at("lon").get<double>(), n.at("lat").get<double>(), std::nullopt};
      if (n.contains("x")) node.point.xy = Vec2{n.at("x").get<double>(), n.at("y").get<double>()};
      node.depth = n.at("depth").get<int>();
      if (!n.at("parent").is_null()) node.parent = n.at("parent").get<NodeId>();
      f.nodes.push_back(std::move(node));
    }
    std::sort(f.nodes.begin(), f.nodes.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& e : j.at("edges")) {
      FeederEdge fe;
      fe.parent = e.at("parent").get<NodeId>();
      fe.child = e.at("child").get<NodeId>();
      fe.candidate_edge = e.at("candidate_edge").get<std::size_t>();
      fe.length_m = e.at("length_m").get<double>();
      fe.road_class = e.at("class").get<std::string>();
      for (const auto& p : e.at("geometry")) fe.geometry.push_back(point_from(p));
      f.edges.push_back(std::move(fe));
    }
    return f;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed feeder document: ") + e.what());
  }
}

}  // namespace feedforge
