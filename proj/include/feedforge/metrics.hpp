#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "feedforge/electrify.hpp"
#include "feedforge/synth.hpp"

namespace feedforge {

/// Structural description of a generated feeder.
struct StructuralSummary {
  std::int64_t n_buses = 0;
  std::int64_t n_branches = 0;
  double total_line_km = 0.0;
  double mean_line_km = 0.0;
  double max_line_km = 0.0;
  std::int64_t n_load_points = 0;
  std::int64_t total_households = 0;
  double mean_households_per_load_point = 0.0;
  std::int64_t feeder_depth_hops = 0;
  double mean_depth_hops = 0.0;  // over non-root buses
  std::int64_t root_branches = 0;
  std::int64_t n_leaves = 0;            // non-root, tree degree 1
  std::int64_t n_branching_nodes = 0;   // non-root, tree degree >= 3
  double peak_load_mw = 0.0;

  friend bool operator==(const StructuralSummary&, const StructuralSummary&) = default;
};

StructuralSummary structural_summary(const FeederGraph& feeder, const ElectricalNetwork& net);

nlohmann::json to_json(const StructuralSummary& s);
StructuralSummary structural_summary_from_json(const nlohmann::json& j);

/// Two-column plain-text table, one row per field.
std::string to_text_table(const StructuralSummary& s);

}  // namespace feedforge
