#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "feedforge/electrify.hpp"

namespace feedforge {

struct PowerFlowOptions {
  double tol = 1e-8;  // per-unit power mismatch
  int max_iter = 100;
};

struct BranchFlow {
  NodeId from = 0;
  NodeId to = 0;
  double s_mva = 0.0;  // apparent power at the sending end

  friend bool operator==(const BranchFlow&, const BranchFlow&) = default;
};

struct PowerFlowResult {
  std::map<NodeId, double> v_pu;
  std::map<NodeId, double> v_angle;  // radians
  std::map<NodeId, int> depth;       // hops from the slack
  std::vector<BranchFlow> branches;  // aligned with the network's lines
  int iterations = 0;
  bool converged = false;
  double max_mismatch = 0.0;  // per unit
  double slack_p_mw = 0.0;
  double slack_q_mvar = 0.0;
  double losses_mw = 0.0;

  /// Bus ids ordered by (depth, id).
  std::vector<NodeId> profile_order() const;

  friend bool operator==(const PowerFlowResult&, const PowerFlowResult&) = default;
};

struct ValidationReport {
  bool radial = false;
  double delta_v_max = 0.0;
  double rho_max = 0.0;
  double v_min = 0.0;        // lowest bus voltage observed
  double v_min_bound = 0.95;  // configured lower limit
  bool v_bound_satisfied = false;

  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

/// Backward/forward sweep from a flat start; throws ValidationError on a non-radial network.
PowerFlowResult run_power_flow(const ElectricalNetwork& net, const PowerFlowOptions& options = {});

/// max |V - 1| over all buses; throws on an unconverged result.
double max_voltage_deviation(const PowerFlowResult& result);

/// max |S| / rating over all lines; throws on an unconverged result or a missing rating.
double max_branch_loading(const PowerFlowResult& result, const ElectricalNetwork& net);

/// Connected and |lines| = |buses| - 1.
bool check_radiality(const ElectricalNetwork& net);

ValidationReport make_report(const ElectricalNetwork& net, const PowerFlowResult& result, double v_min_bound);

struct Scenario {
  std::string name;
  double factor = 1.0;
};

/// sanity 0.25, representative 1.0, stressed 1.5.
std::vector<Scenario> default_scenarios();

struct ScenarioOutcome {
  Scenario scenario;
  PowerFlowResult result;
  ValidationReport report;
};

/// Copy of `net` with every load's P and Q multiplied by `factor`.
ElectricalNetwork scale_loads(const ElectricalNetwork& net, double factor);

/// Solves every scenario in the given order.
std::vector<ScenarioOutcome> run_scenarios(const ElectricalNetwork& net, const std::vector<Scenario>& scenarios,
                                           const PowerFlowOptions& options = {}, double v_min_bound = 0.95);

nlohmann::json to_json(const PowerFlowResult& result);
PowerFlowResult power_flow_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ValidationReport& report);
ValidationReport validation_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const std::vector<ScenarioOutcome>& outcomes);
std::vector<ScenarioOutcome> scenario_outcomes_from_json(const nlohmann::json& j);

}  // namespace feedforge
