#include "feedforge/metrics.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "feedforge/error.hpp"

namespace feedforge {

using json = nlohmann::json;

StructuralSummary structural_summary(const FeederGraph& feeder, const ElectricalNetwork& net) {
  StructuralSummary s;
  s.n_buses = static_cast<std::int64_t>(net.buses.size());
  s.n_branches = static_cast<std::int64_t>(net.lines.size());
  for (const auto& l : net.lines) {
    s.total_line_km += l.length_km;
    s.max_line_km = std::max(s.max_line_km, l.length_km);
  }
  if (s.n_branches > 0) s.mean_line_km = s.total_line_km / static_cast<double>(s.n_branches);

  s.n_load_points = static_cast<std::int64_t>(net.loads.size());
  s.total_households = net.total_households();
  if (s.n_load_points > 0)
    s.mean_households_per_load_point = static_cast<double>(s.total_households) / static_cast<double>(s.n_load_points);

  std::map<NodeId, std::int64_t> degree;
  for (const auto& n : feeder.nodes) degree[n.id] = 0;
  for (const auto& e : feeder.edges) {
    ++degree[e.parent];
    ++degree[e.child];
  }
  std::int64_t depth_sum = 0, non_root = 0;
  for (const auto& n : feeder.nodes) {
    s.feeder_depth_hops = std::max<std::int64_t>(s.feeder_depth_hops, n.depth);
    if (n.id == feeder.root) continue;
    ++non_root;
    depth_sum += n.depth;
    if (degree[n.id] == 1) ++s.n_leaves;
    if (degree[n.id] >= 3) ++s.n_branching_nodes;
  }
  if (non_root > 0) s.mean_depth_hops = static_cast<double>(depth_sum) / static_cast<double>(non_root);
  s.root_branches = degree[feeder.root];
  s.peak_load_mw = net.total_p_mw;
  return s;
}

json to_json(const StructuralSummary& s) {
  return {{"n_buses", s.n_buses},
          {"n_branches", s.n_branches},
          {"total_line_km", s.total_line_km},
          {"mean_line_km", s.mean_line_km},
          {"max_line_km", s.max_line_km},
          {"n_load_points", s.n_load_points},
          {"total_households", s.total_households},
          {"mean_households_per_load_point", s.mean_households_per_load_point},
          {"feeder_depth_hops", s.feeder_depth_hops},
          {"mean_depth_hops", s.mean_depth_hops},
          {"root_branches", s.root_branches},
          {"n_leaves", s.n_leaves},
          {"n_branching_nodes", s.n_branching_nodes},
          {"peak_load_mw", s.peak_load_mw}};
}

StructuralSummary structural_summary_from_json(const json& j) {
  try {
    StructuralSummary s;
    s.n_buses = j.at("n_buses").get<std::int64_t>();
    s.n_branches = j.at("n_branches").get<std::int64_t>();
    s.total_line_km = j.at("total_line_km").get<double>();
    s.mean_line_km = j.at("mean_line_km").get<double>();
    s.max_line_km = j.at("max_line_km").get<double>();
    s.n_load_points = j.at("n_load_points").get<std::int64_t>();
    s.total_households = j.at("total_households").get<std::int64_t>();
    s.mean_households_per_load_point = j.at("mean_households_per_load_point").get<double>();
    s.feeder_depth_hops = j.at("feeder_depth_hops").get<std::int64_t>();
    s.mean_depth_hops = j.at("mean_depth_hops").get<double>();
    s.root_branches = j.at("root_branches").get<std::int64_t>();
    s.n_leaves = j.at("n_leaves").get<std::int64_t>();
    s.n_branching_nodes = j.at("n_branching_nodes").get<std::int64_t>();
    s.peak_load_mw = j.at("peak_load_mw").get<double>();
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed summary document: ") + e.what());
  }
}

std::string to_text_table(const StructuralSummary& s) {
  const std::vector<std::pair<std::string, std::string>> rows{
      {"Number of buses", fmt::format("{}", s.n_buses)},
      {"Number of branches", fmt::format("{}", s.n_branches)},
      {"Total line length (km)", fmt::format("{:.2f}", s.total_line_km)},
      {"Mean line length (km)", fmt::format("{:.3f}", s.mean_line_km)},
      {"Max line length (km)", fmt::format("{:.3f}", s.max_line_km)},
      {"Number of load points", fmt::format("{}", s.n_load_points)},
      {"Total households", fmt::format("{}", s.total_households)},
      {"Mean households per load point", fmt::format("{:.2f}", s.mean_households_per_load_point)},
      {"Feeder depth (hops)", fmt::format("{}", s.feeder_depth_hops)},
      {"Mean depth (hops)", fmt::format("{:.2f}", s.mean_depth_hops)},
      {"Root branches", fmt::format("{}", s.root_branches)},
      {"Number of leaves", fmt::format("{}", s.n_leaves)},
      {"Number of branching nodes", fmt::format("{}", s.n_branching_nodes)},
      {"Peak load (MW)", fmt::format("{:.3f}", s.peak_load_mw)},
  };
  std::size_t w0 = 0, w1 = 0;
  for (const auto& [k, v] : rows) {
    w0 = std::max(w0, k.size());
    w1 = std::max(w1, v.size());
  }
  std::string out;
  for (const auto& [k, v] : rows) out += fmt::format("{:<{}}  {:>{}}\n", k, w0, v, w1);
  return out;
}

}  // namespace feedforge
