#include "feedforge/electrify.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

#include "feedforge/error.hpp"

namespace feedforge {

using json = nlohmann::json;

void LineTemplate::validate() const {
  if (!(r_per_km > 0.0) || !(x_per_km > 0.0) || !(rating_mva > 0.0) || !std::isfinite(r_per_km) ||
      !std::isfinite(x_per_km) || !std::isfinite(rating_mva))
    throw ConfigError("line template '" + road_class + "' needs positive finite r, x and rating");
}

LineTemplateTable default_line_templates() {
  LineTemplateTable t;
  for (const char* c : {"residential", "living_street", "service", "unclassified", "tertiary"})
    t[c] = {c, 0.642, 0.083, 0.4};
  for (const char* c : {"secondary", "primary", "trunk"}) t[c] = {c, 0.193, 0.086, 4.0};
  return t;
}

void LoadAllocationConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("load allocation epsilon must be positive");
  if (!(total_p_mw >= 0.0) || !std::isfinite(total_p_mw)) throw ConfigError("total_p_mw must be non-negative");
  if (!std::isfinite(eta) || !std::isfinite(beta)) throw ConfigError("load allocation exponents must be finite");
  if (!(activity_radius_m >= 0.0)) throw ConfigError("activity_radius_m must be non-negative");
  auto check_pf = [](double pf) {
    if (!(pf > 0.0 && pf <= 1.0)) throw ConfigError("power factor " + std::to_string(pf) + " outside (0, 1]");
  };
  check_pf(power_factor);
  for (const auto& [bus, pf] : node_power_factor) check_pf(pf);
}

double LoadAllocationConfig::power_factor_at(NodeId bus) const {
  auto it = node_power_factor.find(bus);
  return it == node_power_factor.end() ? power_factor : it->second;
}

double reactive_ratio(double pf) {
  if (!(pf > 0.0 && pf <= 1.0)) throw ConfigError("power factor outside (0, 1]");
  // A decimal pf = p/q gives tan(acos pf) = sqrt(q^2 - p^2)/p, which keeps 3-4-5 style values exact.
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, pf);
  const std::string_view text(buf, static_cast<std::size_t>(res.ptr - buf));
  const auto dot = text.find('.');
  if (text.find('e') == std::string_view::npos) {
    const std::string_view whole = text.substr(0, dot);
    const std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
    if (frac.size() <= 7) {
      std::int64_t q = 1, p = 0;
      for (std::size_t i = 0; i < frac.size(); ++i) q *= 10;
      std::int64_t w = 0, f = 0;
      std::from_chars(whole.data(), whole.data() + whole.size(), w);
      if (!frac.empty()) std::from_chars(frac.data(), frac.data() + frac.size(), f);
      p = w * q + f;
      return std::sqrt(static_cast<double>(q * q - p * p)) / static_cast<double>(p);
    }
  }
  return std::sqrt((1.0 - pf) * (1.0 + pf)) / pf;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> ElectricalNetwork::bus_index(NodeId id) const {
  auto it = std::lower_bound(buses.begin(), buses.end(), id, [](const Bus& b, NodeId k) { return b.id < k; });
  if (it == buses.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - buses.begin());
}

const Load* ElectricalNetwork::load_at(NodeId bus) const {
  auto it = std::lower_bound(loads.begin(), loads.end(), bus, [](const Load& l, NodeId k) { return l.bus < k; });
  return it == loads.end() || it->bus != bus ? nullptr : &*it;
}

std::int64_t ElectricalNetwork::total_households() const {
  std::int64_t h = 0;
  for (const auto& l : loads) h += l.households;
  return h;
}

void ElectricalNetwork::validate() const {
  std::vector<std::string> bad;
  auto id = [](NodeId v) { return std::to_string(v); };
  for (std::size_t i = 1; i < buses.size(); ++i)
    if (!(buses[i - 1].id < buses[i].id)) bad.push_back("bus " + id(buses[i].id) + " duplicated or out of order");
  if (buses.empty()) bad.push_back("network has no buses");
  if (!bus_index(slack_bus)) bad.push_back("slack bus " + id(slack_bus) + " is not a bus");
  if (!(slack_v_pu > 0.0)) bad.push_back("slack voltage must be positive");
  if (!(base_mva > 0.0) || !(base_kv > 0.0)) bad.push_back("base power and voltage must be positive");

  for (const auto& l : lines) {
    const std::string name = "line " + id(l.from) + "-" + id(l.to);
    if (!bus_index(l.from) || !bus_index(l.to)) bad.push_back(name + " references a missing bus");
    if (l.from == l.to) bad.push_back(name + " is a self-loop");
    if (!(l.r_per_km > 0.0) || !(l.x_per_km > 0.0)) bad.push_back(name + " has non-positive per-km impedance");
    if (!(l.length_km >= 0.0)) bad.push_back(name + " has negative length");
    if (!(l.rating_mva > 0.0)) bad.push_back(name + " has no positive rating");
    if (l.r_ohm != l.r_per_km * l.length_km || l.x_ohm != l.x_per_km * l.length_km)
      bad.push_back(name + " impedance does not equal per-km value times length");
  }

  // Radial and rooted at the slack.
  if (!buses.empty() && lines.size() + 1 != buses.size())
    bad.push_back("network is not radial: " + std::to_string(lines.size()) + " lines for " +
                  std::to_string(buses.size()) + " buses");
  if (auto root = bus_index(slack_bus)) {
    std::vector<std::vector<std::size_t>> adj(buses.size());
    for (const auto& l : lines) {
      auto a = bus_index(l.from), b = bus_index(l.to);
      if (!a || !b) continue;
      adj[*a].push_back(*b);
      adj[*b].push_back(*a);
    }
    std::vector<char> seen(buses.size(), 0);
    std::vector<std::size_t> stack{*root};
    seen[*root] = 1;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto w : adj[v])
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (!seen[i]) bad.push_back("bus " + id(buses[i].id) + " is not connected to the slack");
  }

  double sum = 0.0;
  for (std::size_t i = 0; i < loads.size(); ++i) {
    const auto& l = loads[i];
    if (i > 0 && !(loads[i - 1].bus < l.bus)) bad.push_back("load at bus " + id(l.bus) + " duplicated or out of order");
    if (!bus_index(l.bus)) bad.push_back("load at bus " + id(l.bus) + " which is not in the network");
    if (!std::isfinite(l.p_mw) || !std::isfinite(l.q_mvar)) bad.push_back("load at bus " + id(l.bus) + " is not finite");
    if (l.households < 0) bad.push_back("load at bus " + id(l.bus) + " has negative households");
    sum += l.p_mw;
  }
  if (std::abs(sum - total_p_mw) > 1e-12 * std::abs(total_p_mw))
    bad.push_back("loads sum to " + std::to_string(sum) + " MW instead of " + std::to_string(total_p_mw));
  if (!bad.empty()) throw ValidationError(std::move(bad));
}

// ---------------------------------------------------------------------------

std::vector<Line> assign_line_params(const FeederGraph& feeder, const LineTemplateTable& templates) {
  std::vector<Line> lines;
  lines.reserve(feeder.edges.size());
  for (const auto& e : feeder.edges) {
    auto it = templates.find(e.road_class);
    if (it == templates.end()) throw ConfigError("no line template for road class '" + e.road_class + "'");
    const auto& t = it->second;
    t.validate();
    Line l;
    l.from = e.parent;
    l.to = e.child;
    l.road_class = e.road_class;
    l.r_per_km = t.r_per_km;
    l.x_per_km = t.x_per_km;
    l.length_km = e.length_m / 1000.0;
    l.r_ohm = t.r_per_km * l.length_km;
    l.x_ohm = t.x_per_km * l.length_km;
    l.rating_mva = t.rating_mva;
    lines.push_back(std::move(l));
  }
  return lines;
}

namespace {

Vec2 planar_in(const GeoPoint& p, const std::optional<LocalFrame>& frame) {
  if (p.xy) return *p.xy;
  if (!frame) throw DataError("point without planar coordinates and no frame to project it");
  return frame->forward(p.lon, p.lat);
}

double dist(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

GeoPoint default_centroid(const FeederGraph& feeder, const std::optional<std::vector<GeoPoint>>& activity_points) {
  double lon = 0.0, lat = 0.0, x = 0.0, y = 0.0;
  std::size_t n = 0;
  auto add = [&](const GeoPoint& p) {
    const Vec2 q = planar_in(p, feeder.frame);
    lon += p.lon;
    lat += p.lat;
    x += q.x;
    y += q.y;
    ++n;
  };
  if (activity_points && !activity_points->empty()) {
    for (const auto& p : *activity_points) add(p);
  } else {
    for (const auto& node : feeder.nodes) add(node.point);
  }
  if (n == 0) throw DataError("cannot place a demand centroid on an empty feeder");
  const double k = static_cast<double>(n);
  return {lon / k, lat / k, Vec2{x / k, y / k}};
}

std::map<NodeId, double> compute_weights(const FeederGraph& feeder, const LoadAllocationConfig& cfg,
                                         const std::optional<std::vector<GeoPoint>>& activity_points) {
  cfg.validate();
  if (cfg.centroids.empty() && cfg.beta != 0.0)
    throw ConfigError("demand centroids are required when beta is non-zero");
  std::vector<Vec2> activity, centroids;
  if (activity_points)
    for (const auto& p : *activity_points) activity.push_back(planar_in(p, feeder.frame));
  for (const auto& c : cfg.centroids) centroids.push_back(planar_in(c, feeder.frame));

  std::map<NodeId, double> weights;
  for (const auto& node : feeder.nodes) {
    const Vec2 at = planar_in(node.point, feeder.frame);
    double a = 1.0;
    if (activity_points) {
      a = static_cast<double>(std::count_if(activity.begin(), activity.end(),
                                            [&](const Vec2& p) { return dist(p, at) <= cfg.activity_radius_m; }));
    }
    double delta = 0.0;
    if (!centroids.empty()) {
      delta = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) delta = std::min(delta, dist(c, at));
    }
    weights[node.id] = std::pow(a + cfg.epsilon, cfg.eta) / std::pow(delta + cfg.epsilon, cfg.beta);
  }
  return weights;
}

std::vector<Load> allocate_loads(const std::map<NodeId, double>& weights, const LoadAllocationConfig& cfg,
                                 std::int64_t households_total) {
  cfg.validate();
  if (households_total < 0) throw ConfigError("household total must be non-negative");
  double sum = 0.0;
  for (const auto& [bus, w] : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("weight at bus " + std::to_string(bus) + " is not a finite non-negative number");
    sum += w;
  }
  if (!(sum > 0.0)) throw ConfigError("load weights sum to zero");

  std::vector<NodeId> ids;
  std::vector<double> w;
  for (const auto& [bus, value] : weights) {
    ids.push_back(bus);
    w.push_back(value);
  }
  const std::size_t n = ids.size();

  // Largest-remainder apportionment of households.
  std::vector<std::int64_t> households(n, 0);
  if (households_total > 0) {
    std::vector<double> remainder(n);
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double quota = static_cast<double>(households_total) * w[i] / sum;
      households[i] = static_cast<std::int64_t>(std::floor(quota));
      remainder[i] = quota - static_cast<double>(households[i]);
      assigned += households[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    // Floating quotas can over- or under-shoot by a unit; settle on the exact total.
    for (std::size_t k = 0; assigned < households_total; k = (k + 1) % n, ++assigned) ++households[order[k]];
    for (std::size_t k = n; assigned > households_total; --assigned) {
      k = k == 0 ? n - 1 : k - 1;
      while (households[order[k]] == 0) k = k == 0 ? n - 1 : k - 1;
      --households[order[k]];
    }
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i)
    if (households_total == 0 || households[i] > 0) kept.push_back(i);
  double kept_sum = 0.0;
  for (std::size_t i : kept) kept_sum += w[i];

  std::vector<Load> loads;
  std::size_t largest = 0;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const std::size_t i = kept[k];
    loads.push_back({ids[i], cfg.total_p_mw * w[i] / kept_sum, 0.0, households[i]});
    if (w[i] > w[kept[largest]]) largest = k;
  }
  // Push the rounding residue onto the heaviest bus until the sum is exact.
  for (int pass = 0; pass < 8; ++pass) {
    double total = 0.0;
    for (const auto& l : loads) total += l.p_mw;
    const double residue = cfg.total_p_mw - total;
    if (residue == 0.0) break;
    loads[largest].p_mw += residue;
  }
  for (auto& l : loads) l.q_mvar = l.p_mw * reactive_ratio(cfg.power_factor_at(l.bus));
  return loads;
}

ElectricalNetwork build_network(const FeederGraph& feeder, std::vector<Line> lines, std::vector<Load> loads,
                                double slack_v_pu, double base_mva, double base_kv) {
  ElectricalNetwork net;
  for (const auto& node : feeder.nodes) {
    const Vec2 p = planar_in(node.point, feeder.frame);
    net.buses.push_back({node.id, p.x, p.y});
  }
  net.slack_bus = feeder.root;
  net.slack_v_pu = slack_v_pu;
  net.base_mva = base_mva;
  net.base_kv = base_kv;
  net.lines = std::move(lines);
  std::sort(loads.begin(), loads.end(), [](const Load& a, const Load& b) { return a.bus < b.bus; });
  net.loads = std::move(loads);
  for (const auto& l : net.loads) net.total_p_mw += l.p_mw;
  net.validate();
  return net;
}

// ---------------------------------------------------------------------------

json to_json(const ElectricalNetwork& net) {
  json buses = json::array(), lines = json::array(), loads = json::array();
  for (const auto& b : net.buses) buses.push_back({{"id", b.id}, {"x", b.x}, {"y", b.y}});
  for (const auto& l : net.lines)
    lines.push_back({{"from", l.from},
                     {"to", l.to},
                     {"class", l.road_class},
                     {"r_per_km", l.r_per_km},
                     {"x_per_km", l.x_per_km},
                     {"r_ohm", l.r_ohm},
                     {"x_ohm", l.x_ohm},
                     {"rating_mva", l.rating_mva},
                     {"length_km", l.length_km}});
  for (const auto& l : net.loads)
    loads.push_back({{"bus", l.bus}, {"p_mw", l.p_mw}, {"q_mvar", l.q_mvar}, {"households", l.households}});
  return {{"buses", std::move(buses)}, {"slack_bus", net.slack_bus}, {"slack_v_pu", net.slack_v_pu},
          {"base_mva", net.base_mva},  {"base_kv", net.base_kv},     {"total_p_mw", net.total_p_mw},
          {"lines", std::move(lines)}, {"loads", std::move(loads)}};
}

ElectricalNetwork electrical_network_from_json(const json& j) {
  ElectricalNetwork net;
  try {
    for (const auto& b : j.at("buses")) net.buses.push_back({b.at("id").get<NodeId>(), b.at("x").get<double>(), b.at("y").get<double>()});
    net.slack_bus = j.at("slack_bus").get<NodeId>();
    net.slack_v_pu = j.at("slack_v_pu").get<double>();
    net.base_mva = j.at("base_mva").get<double>();
    net.base_kv = j.at("base_kv").get<double>();
    net.total_p_mw = j.at("total_p_mw").get<double>();
    for (const auto& l : j.at("lines")) {
      net.lines.push_back({l.at("from").get<NodeId>(), l.at("to").get<NodeId>(), l.at("class").get<std::string>(),
                           l.at("r_per_km").get<double>(), l.at("x_per_km").get<double>(), l.at("r_ohm").get<double>(),
                           l.at("x_ohm").get<double>(), l.at("rating_mva").get<double>(), l.at("length_km").get<double>()});
    }
    for (const auto& l : j.at("loads"))
      net.loads.push_back({l.at("bus").get<NodeId>(), l.at("p_mw").get<double>(), l.at("q_mvar").get<double>(),
                           l.at("households").get<std::int64_t>()});
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed network document: ") + e.what());
  }
  net.validate();
  return net;
}

}  // namespace feedforge
