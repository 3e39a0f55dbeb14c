#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "feedforge/geograph.hpp"
#include "feedforge/synth.hpp"

namespace feedforge {

/// Per-kilometre impedance and thermal rating for one road class.
struct LineTemplate {
  std::string road_class;
  double r_per_km = 0.0;  // ohm/km
  double x_per_km = 0.0;  // ohm/km
  double rating_mva = 0.0;

  void validate() const;

  friend bool operator==(const LineTemplate&, const LineTemplate&) = default;
};

using LineTemplateTable = std::map<std::string, LineTemplate>;

/// Low-voltage cable for local streets, heavier conductor along arterials.
LineTemplateTable default_line_templates();

struct LoadAllocationConfig {
  double eta = 1.0;
  double beta = 1.0;
  double epsilon = 1e-6;
  double total_p_mw = 1.44;
  double power_factor = 0.95;
  std::map<NodeId, double> node_power_factor;  // overrides power_factor per bus
  std::vector<GeoPoint> centroids;
  double activity_radius_m = 60.0;

  void validate() const;
  double power_factor_at(NodeId bus) const;
};

/// Q/P ratio tan(acos pf), evaluated on the shortest decimal spelling of `pf` when it is short.
double reactive_ratio(double pf);

struct Bus {
  NodeId id = 0;
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Bus&, const Bus&) = default;
};

struct Line {
  NodeId from = 0;
  NodeId to = 0;
  std::string road_class;
  double r_per_km = 0.0;
  double x_per_km = 0.0;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
  double rating_mva = 0.0;
  double length_km = 0.0;

  friend bool operator==(const Line&, const Line&) = default;
};

struct Load {
  NodeId bus = 0;
  double p_mw = 0.0;
  double q_mvar = 0.0;
  std::int64_t households = 0;

  friend bool operator==(const Load&, const Load&) = default;
};

/// Balanced single-phase-equivalent radial network. Buses and loads sorted by id.
struct ElectricalNetwork {
  std::vector<Bus> buses;
  NodeId slack_bus = 0;
  double slack_v_pu = 1.0;
  double base_mva = 1.0;
  double base_kv = 11.0;
  double total_p_mw = 0.0;
  std::vector<Line> lines;
  std::vector<Load> loads;

  /// Throws ValidationError listing every offending element.
  void validate() const;
  std::optional<std::size_t> bus_index(NodeId id) const;
  const Load* load_at(NodeId bus) const;
  std::int64_t total_households() const;

  friend bool operator==(const ElectricalNetwork&, const ElectricalNetwork&) = default;
};

/// One line per feeder edge, oriented parent -> child, in feeder edge order.
std::vector<Line> assign_line_params(const FeederGraph& feeder, const LineTemplateTable& templates);

/// Spatial weights (A + eps)^eta / (delta + eps)^beta per feeder node.
/// Without an activity layer every node counts one unit of activity.
std::map<NodeId, double> compute_weights(const FeederGraph& feeder, const LoadAllocationConfig& cfg,
                                         const std::optional<std::vector<GeoPoint>>& activity_points);

/// Mean of the activity points when there are any, else the mean of the feeder nodes.
GeoPoint default_centroid(const FeederGraph& feeder, const std::optional<std::vector<GeoPoint>>& activity_points);

/// Shares total_p_mw in proportion to the weights and apportions households the same way.
/// Buses apportioned no household get no load record when households_total > 0.
std::vector<Load> allocate_loads(const std::map<NodeId, double>& weights, const LoadAllocationConfig& cfg,
                                 std::int64_t households_total);

ElectricalNetwork build_network(const FeederGraph& feeder, std::vector<Line> lines, std::vector<Load> loads,
                                double slack_v_pu = 1.0, double base_mva = 1.0, double base_kv = 11.0);

nlohmann::json to_json(const ElectricalNetwork& net);
ElectricalNetwork electrical_network_from_json(const nlohmann::json& j);

}  // namespace feedforge
