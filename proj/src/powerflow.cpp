#include "feedforge/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>

#include "feedforge/error.hpp"

namespace feedforge {

using json = nlohmann::json;
using cplx = std::complex<double>;

std::vector<NodeId> PowerFlowResult::profile_order() const {
  std::vector<NodeId> ids;
  for (const auto& [id, v] : v_pu) ids.push_back(id);
  std::stable_sort(ids.begin(), ids.end(), [&](NodeId a, NodeId b) { return depth.at(a) < depth.at(b); });
  return ids;
}

bool check_radiality(const ElectricalNetwork& net) {
  if (net.buses.empty() || net.lines.size() + 1 != net.buses.size()) return false;
  std::vector<std::vector<std::size_t>> adj(net.buses.size());
  for (const auto& l : net.lines) {
    auto a = net.bus_index(l.from), b = net.bus_index(l.to);
    if (!a || !b || *a == *b) return false;
    adj[*a].push_back(*b);
    adj[*b].push_back(*a);
  }
  std::vector<char> seen(net.buses.size(), 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (auto w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        stack.push_back(w);
      }
  }
  return reached == net.buses.size();
}

namespace {

struct Tree {
  std::vector<std::size_t> order;   // breadth-first from the slack
  std::vector<std::size_t> parent;  // bus index, SIZE_MAX at the slack
  std::vector<std::size_t> line;    // line index into the bus
  std::vector<int> depth;
};

Tree rooted_tree(const ElectricalNetwork& net) {
  if (!check_radiality(net)) throw ValidationError({"power flow needs a radial network"});
  const auto root = net.bus_index(net.slack_bus);
  if (!root) throw ValidationError({"slack bus " + std::to_string(net.slack_bus) + " is not a bus"});
  const std::size_t n = net.buses.size();
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
  for (std::size_t k = 0; k < net.lines.size(); ++k) {
    const auto a = *net.bus_index(net.lines[k].from), b = *net.bus_index(net.lines[k].to);
    adj[a].emplace_back(b, k);
    adj[b].emplace_back(a, k);
  }
  Tree t;
  t.parent.assign(n, SIZE_MAX);
  t.line.assign(n, SIZE_MAX);
  t.depth.assign(n, -1);
  t.order.push_back(*root);
  t.depth[*root] = 0;
  for (std::size_t i = 0; i < t.order.size(); ++i) {
    const auto v = t.order[i];
    for (auto [w, k] : adj[v]) {
      if (t.depth[w] >= 0) continue;
      t.depth[w] = t.depth[v] + 1;
      t.parent[w] = v;
      t.line[w] = k;
      t.order.push_back(w);
    }
  }
  return t;
}

}  // namespace

PowerFlowResult run_power_flow(const ElectricalNetwork& net, const PowerFlowOptions& options) {
  if (!(options.tol > 0.0) || options.max_iter < 1) throw ConfigError("power flow needs tol > 0 and max_iter >= 1");
  const Tree tree = rooted_tree(net);
  const std::size_t n = net.buses.size();
  const double z_base = net.base_kv * net.base_kv / net.base_mva;

  std::vector<cplx> s_load(n, 0.0), z(n, 0.0);
  for (const auto& l : net.loads) s_load[*net.bus_index(l.bus)] = cplx(l.p_mw, l.q_mvar) / net.base_mva;
  for (std::size_t i = 0; i < n; ++i)
    if (tree.line[i] != SIZE_MAX) z[i] = cplx(net.lines[tree.line[i]].r_ohm, net.lines[tree.line[i]].x_ohm) / z_base;

  const std::size_t root = tree.order.front();
  const cplx v_slack(net.slack_v_pu, 0.0);
  std::vector<cplx> v(n, v_slack), i_load(n), i_branch(n);

  auto backward = [&] {
    for (std::size_t i = 0; i < n; ++i) i_load[i] = std::conj(s_load[i] / v[i]);
    for (std::size_t i = 0; i < n; ++i) i_branch[i] = i_load[i];
    for (std::size_t k = n; k-- > 1;) {
      const auto b = tree.order[k];
      i_branch[tree.parent[b]] += i_branch[b];
    }
  };

  PowerFlowResult r;
  for (r.iterations = 1; r.iterations <= options.max_iter; ++r.iterations) {
    backward();
    for (std::size_t k = 1; k < n; ++k) {
      const auto b = tree.order[k];
      v[b] = v[tree.parent[b]] - z[b] * i_branch[b];
    }
    // Power each bus would draw at the new voltages with the currents just injected.
    r.max_mismatch = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == root) continue;
      r.max_mismatch = std::max(r.max_mismatch, std::abs(v[i] * std::conj(i_load[i]) - s_load[i]));
    }
    if (r.max_mismatch <= options.tol) {
      r.converged = true;
      break;
    }
  }
  if (!r.converged) r.iterations = options.max_iter;

  backward();
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId id = net.buses[i].id;
    r.v_pu[id] = std::abs(v[i]);
    r.v_angle[id] = std::arg(v[i]);
    r.depth[id] = tree.depth[i];
  }
  r.branches.resize(net.lines.size());
  double losses = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tree.line[i] == SIZE_MAX) continue;
    const auto& l = net.lines[tree.line[i]];
    const cplx s_send = v[tree.parent[i]] * std::conj(i_branch[i]);
    r.branches[tree.line[i]] = {l.from, l.to, std::abs(s_send) * net.base_mva};
    losses += (z[i] * std::norm(i_branch[i])).real();
  }
  const cplx s_slack = v[root] * std::conj(i_branch[root]) * net.base_mva;
  r.slack_p_mw = s_slack.real();
  r.slack_q_mvar = s_slack.imag();
  r.losses_mw = losses * net.base_mva;
  return r;
}

double max_voltage_deviation(const PowerFlowResult& result) {
  if (!result.converged) throw DataError("voltage deviation of an unconverged power flow");
  double m = 0.0;
  for (const auto& [id, v] : result.v_pu) m = std::max(m, std::abs(v - 1.0));
  return m;
}

double max_branch_loading(const PowerFlowResult& result, const ElectricalNetwork& net) {
  if (!result.converged) throw DataError("branch loading of an unconverged power flow");
  if (result.branches.size() != net.lines.size()) throw DataError("power flow result does not match the network lines");
  double m = 0.0;
  for (std::size_t k = 0; k < net.lines.size(); ++k) {
    const double rating = net.lines[k].rating_mva;
    if (!(rating > 0.0))
      throw DataError("line " + std::to_string(net.lines[k].from) + "-" + std::to_string(net.lines[k].to) + " has no rating");
    m = std::max(m, result.branches[k].s_mva / rating);
  }
  return m;
}

ValidationReport make_report(const ElectricalNetwork& net, const PowerFlowResult& result, double v_min_bound) {
  ValidationReport rep;
  rep.radial = check_radiality(net);
  rep.delta_v_max = max_voltage_deviation(result);
  rep.rho_max = max_branch_loading(result, net);
  rep.v_min = std::numeric_limits<double>::infinity();
  for (const auto& [id, v] : result.v_pu) rep.v_min = std::min(rep.v_min, v);
  rep.v_min_bound = v_min_bound;
  rep.v_bound_satisfied = rep.v_min >= v_min_bound;
  return rep;
}

std::vector<Scenario> default_scenarios() { return {{"sanity", 0.25}, {"representative", 1.0}, {"stressed", 1.5}}; }

ElectricalNetwork scale_loads(const ElectricalNetwork& net, double factor) {
  if (!(factor >= 0.0) || !std::isfinite(factor)) throw ConfigError("scenario factor must be a non-negative number");
  ElectricalNetwork out = net;
  out.total_p_mw = 0.0;
  for (auto& l : out.loads) {
    l.p_mw *= factor;
    l.q_mvar *= factor;
    out.total_p_mw += l.p_mw;
  }
  return out;
}

std::vector<ScenarioOutcome> run_scenarios(const ElectricalNetwork& net, const std::vector<Scenario>& scenarios,
                                           const PowerFlowOptions& options, double v_min_bound) {
  std::vector<ScenarioOutcome> out;
  for (const auto& sc : scenarios) {
    const auto scaled = scale_loads(net, sc.factor);
    ScenarioOutcome o{sc, run_power_flow(scaled, options), {}};
    if (o.result.converged) o.report = make_report(scaled, o.result, v_min_bound);
    out.push_back(std::move(o));
  }
  return out;
}

// ---------------------------------------------------------------------------

json to_json(const PowerFlowResult& r) {
  json buses = json::array(), branches = json::array();
  for (NodeId id : r.profile_order())
    buses.push_back({{"id", id}, {"depth", r.depth.at(id)}, {"v_pu", r.v_pu.at(id)}, {"v_angle", r.v_angle.at(id)}});
  for (const auto& b : r.branches) branches.push_back({{"from", b.from}, {"to", b.to}, {"s_mva", b.s_mva}});
  return {{"converged", r.converged},   {"iterations", r.iterations},     {"max_mismatch", r.max_mismatch},
          {"slack_p_mw", r.slack_p_mw}, {"slack_q_mvar", r.slack_q_mvar}, {"losses_mw", r.losses_mw},
          {"buses", std::move(buses)},  {"branches", std::move(branches)}};
}

PowerFlowResult power_flow_result_from_json(const json& j) {
  try {
    PowerFlowResult r;
    r.converged = j.at("converged").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    r.max_mismatch = j.at("max_mismatch").get<double>();
    r.slack_p_mw = j.at("slack_p_mw").get<double>();
    r.slack_q_mvar = j.at("slack_q_mvar").get<double>();
    r.losses_mw = j.at("losses_mw").get<double>();
    for (const auto& b : j.at("buses")) {
      const NodeId id = b.at("id").get<NodeId>();
      r.depth[id] = b.at("depth").get<int>();
      r.v_pu[id] = b.at("v_pu").get<double>();
      r.v_angle[id] = b.at("v_angle").get<double>();
    }
    for (const auto& b : j.at("branches"))
      r.branches.push_back({b.at("from").get<NodeId>(), b.at("to").get<NodeId>(), b.at("s_mva").get<double>()});
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed power flow document: ") + e.what());
  }
}

json to_json(const ValidationReport& r) {
  return {{"radial", r.radial}, {"delta_v_max", r.delta_v_max}, {"rho_max", r.rho_max},
          {"v_min", r.v_min},   {"v_min_bound", r.v_min_bound}, {"v_bound_satisfied", r.v_bound_satisfied}};
}

ValidationReport validation_report_from_json(const json& j) {
  try {
    return {j.at("radial").get<bool>(),      j.at("delta_v_max").get<double>(), j.at("rho_max").get<double>(),
            j.at("v_min").get<double>(),     j.at("v_min_bound").get<double>(), j.at("v_bound_satisfied").get<bool>()};
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed validation report: ") + e.what());
  }
}

json to_json(const std::vector<ScenarioOutcome>& outcomes) {
  json a = json::array();
  for (const auto& o : outcomes)
    a.push_back({{"name", o.scenario.name},
                 {"factor", o.scenario.factor},
                 {"result", to_json(o.result)},
                 {"report", o.result.converged ? to_json(o.report) : json(nullptr)}});
  return a;
}

std::vector<ScenarioOutcome> scenario_outcomes_from_json(const json& j) {
  std::vector<ScenarioOutcome> out;
  try {
    for (const auto& o : j) {
      ScenarioOutcome s;
      s.scenario = {o.at("name").get<std::string>(), o.at("factor").get<double>()};
      s.result = power_flow_result_from_json(o.at("result"));
      if (!o.at("report").is_null()) s.report = validation_report_from_json(o.at("report"));
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed scenario document: ") + e.what());
  }
  return out;
}

}  // namespace feedforge
