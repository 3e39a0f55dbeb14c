#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "feedforge/error.hpp"
#include "feedforge/geograph.hpp"

namespace feedforge {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Road classes

RoadClassTable RoadClassTable::defaults() {
  RoadClassTable t;
  t.penalties = {{"residential", 1.0}, {"living_street", 1.0}, {"unclassified", 1.2},
                 {"service", 1.3},     {"tertiary", 1.5},      {"secondary", 2.5},
                 {"primary", 4.0},     {"trunk", 6.0}};
  t.excluded = {"footway", "path", "cycleway", "steps", "pedestrian", "bridleway", "track",
                "motorway", "construction", "proposed", "corridor", "platform"};
  return t;
}

bool RoadClassTable::accepts(const std::string& road_class) const {
  return penalties.contains(road_class) && !excluded.contains(road_class);
}

std::string normalize_road_class(std::string_view highway) {
  constexpr std::string_view suffix = "_link";
  if (highway.size() > suffix.size() && highway.ends_with(suffix)) highway.remove_suffix(suffix.size());
  return std::string(highway);
}

void ScoringWeights::validate() const {
  if (!(distance >= 0.0) || !(road_class >= 0.0) || !(bend >= 0.0))
    throw ConfigError("scoring weights must be non-negative");
  if (distance == 0.0 && road_class == 0.0 && bend == 0.0)
    throw ConfigError("scoring weights must not all be zero");
}

// ---------------------------------------------------------------------------
// CandidateGraph helpers

std::optional<std::size_t> CandidateGraph::find(NodeId id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                             [](const CandidateNode& n, NodeId key) { return n.id < key; });
  if (it == nodes.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - nodes.begin());
}

std::size_t CandidateGraph::index_of(NodeId id) const {
  if (auto i = find(id)) return *i;
  throw DataError("node " + std::to_string(id) + " is not in the candidate graph");
}

double CandidateGraph::total_length() const {
  double total = 0.0;
  for (const auto& e : edges) total += e.length_m;
  return total;
}

// ---------------------------------------------------------------------------
// project

GeoGraph project(const GeoGraph& graph) {
  if (graph.nodes.empty()) throw EmptyGraphError("cannot project an empty graph");
  double lon_min = 180.0, lon_max = -180.0, lat_min = 90.0, lat_max = -90.0;
  auto extend = [&](const GeoPoint& p) {
    lon_min = std::min(lon_min, p.lon);
    lon_max = std::max(lon_max, p.lon);
    lat_min = std::min(lat_min, p.lat);
    lat_max = std::max(lat_max, p.lat);
  };
  double slon = 0.0, slat = 0.0;
  for (const auto& [id, p] : graph.nodes) {
    extend(p);
    slon += p.lon;
    slat += p.lat;
  }
  for (const auto& e : graph.edges)
    for (const auto& p : e.geometry) extend(p);
  if (lon_max - lon_min > 2.0 || lat_max - lat_min > 2.0)
    throw DataError("graph spans more than 2 degrees; local projection would distort distances");

  const double n = static_cast<double>(graph.nodes.size());
  const LocalFrame frame(slon / n, slat / n);
  GeoGraph out;
  out.frame = frame;
  for (const auto& [id, p] : graph.nodes) out.nodes.emplace(id, frame.project(p));
  out.edges.reserve(graph.edges.size());
  for (const auto& e : graph.edges) {
    GeoEdge pe = e;
    for (auto& p : pe.geometry) p = frame.project(p);
    out.edges.push_back(std::move(pe));
  }
  return out;
}

// ---------------------------------------------------------------------------
// clean

GeoGraph clean(const GeoGraph& graph) {
  if (graph.nodes.empty()) throw EmptyGraphError("cannot clean an empty graph");
  if (!graph.projected()) throw DataError("clean requires a projected graph");

  // Shortest representative per unordered endpoint pair, first-seen wins ties.
  std::map<std::pair<NodeId, NodeId>, std::size_t> best;
  std::vector<double> lengths(graph.edges.size());
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const auto& e = graph.edges[i];
    if (e.u == e.v) continue;
    if (!graph.nodes.contains(e.u) || !graph.nodes.contains(e.v))
      throw DataError("edge references a missing node");
    lengths[i] = arc_length(e.geometry);
    const auto key = std::minmax(e.u, e.v);
    auto [it, inserted] = best.emplace(key, i);
    if (!inserted && lengths[i] < lengths[it->second]) it->second = i;
  }
  std::vector<bool> keep_edge(graph.edges.size(), false);
  for (const auto& [key, i] : best) keep_edge[i] = true;

  // Components by union-find over surviving edges.
  std::vector<NodeId> ids;
  std::map<NodeId, std::size_t> pos;
  for (const auto& [id, p] : graph.nodes) {
    pos.emplace(id, ids.size());
    ids.push_back(id);
  }
  std::vector<std::size_t> parent(ids.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    if (!keep_edge[i]) continue;
    std::size_t a = root(pos.at(graph.edges[i].u)), b = root(pos.at(graph.edges[i].v));
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<std::size_t> size(ids.size(), 0);
  for (std::size_t i = 0; i < ids.size(); ++i) ++size[root(i)];
  std::size_t largest = root(0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t r = root(i);
    if (size[r] > size[largest]) largest = r;
  }

  GeoGraph out;
  out.frame = graph.frame;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (root(i) == largest) out.nodes.emplace(ids[i], graph.nodes.at(ids[i]));
  for (std::size_t i = 0; i < graph.edges.size(); ++i)
    if (keep_edge[i] && root(pos.at(graph.edges[i].u)) == largest) out.edges.push_back(graph.edges[i]);
  return out;
}

// ---------------------------------------------------------------------------
// simplify

namespace {

struct Step {
  std::size_t edge;
  bool forward;  // traversed u -> v
};

double planar_distance(const GeoPoint& a, const GeoPoint& b) {
  const Vec2& p = a.planar();
  const Vec2& q = b.planar();
  return std::hypot(p.x - q.x, p.y - q.y);
}

CandidateEdge merge_chain(const GeoGraph& g, NodeId start, const std::vector<Step>& chain) {
  CandidateEdge out;
  out.u = start;
  std::map<std::string, double> class_length;
  for (const auto& s : chain) {
    const GeoEdge& e = g.edges[s.edge];
    Polyline piece = e.geometry;
    if (!s.forward) std::reverse(piece.begin(), piece.end());
    class_length[e.road_class] += arc_length(piece);
    out.geometry.insert(out.geometry.end(), piece.begin() + (out.geometry.empty() ? 0 : 1), piece.end());
    out.v = s.forward ? e.v : e.u;
  }
  // Class covering the largest share of the merged length; ties go to the smaller name.
  double best = -1.0;
  for (const auto& [cls, len] : class_length) {
    if (len > best) {
      best = len;
      out.road_class = cls;
    }
  }
  return out;
}

}  // namespace

CandidateGraph simplify(const GeoGraph& graph, const std::set<NodeId>& keep) {
  if (!graph.projected()) throw DataError("simplify requires a projected graph");

  std::map<NodeId, std::vector<std::size_t>> incident;
  for (const auto& [id, p] : graph.nodes) incident[id];
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const auto& e = graph.edges[i];
    if (e.u == e.v) continue;
    incident.at(e.u).push_back(i);
    incident.at(e.v).push_back(i);
  }
  std::set<NodeId> anchors;
  for (const auto& [id, inc] : incident)
    if (inc.size() != 2 || keep.contains(id)) anchors.insert(id);

  std::vector<bool> used(graph.edges.size(), false);
  std::vector<CandidateEdge> merged;

  auto other = [&](std::size_t ei, NodeId from) {
    const auto& e = graph.edges[ei];
    return e.u == from ? e.v : e.u;
  };
  // Walks from `from` along edge `ei` until an anchor is reached.
  auto walk = [&](NodeId from, std::size_t ei, std::vector<NodeId>& interior) {
    std::vector<Step> chain;
    NodeId at = from;
    while (true) {
      used[ei] = true;
      chain.push_back({ei, graph.edges[ei].u == at});
      at = other(ei, at);
      if (anchors.contains(at)) break;
      interior.push_back(at);
      const auto& inc = incident.at(at);
      ei = inc[0] == ei ? inc[1] : inc[0];
    }
    return std::make_pair(chain, at);
  };
  // Cuts a chain at the position where `split` is reached.
  auto split_chain = [&](NodeId start, const std::vector<Step>& chain, NodeId split) {
    NodeId at = start;
    for (std::size_t k = 0; k < chain.size(); ++k) {
      at = other(chain[k].edge, at);
      if (at == split) {
        std::vector<Step> first(chain.begin(), chain.begin() + static_cast<long>(k) + 1);
        std::vector<Step> second(chain.begin() + static_cast<long>(k) + 1, chain.end());
        merged.push_back(merge_chain(graph, start, first));
        merged.push_back(merge_chain(graph, split, second));
        return;
      }
    }
  };

  std::set<NodeId> promoted;
  for (NodeId a : anchors) {
    for (std::size_t ei : incident.at(a)) {
      if (used[ei]) continue;
      std::vector<NodeId> interior;
      auto [chain, end] = walk(a, ei, interior);
      if (end != a) {
        merged.push_back(merge_chain(graph, a, chain));
        continue;
      }
      // A loop back to its own anchor: keep the interior node farthest from the anchor.
      NodeId far = interior.front();
      double far_d = -1.0;
      for (NodeId n : interior) {
        const double d = planar_distance(graph.nodes.at(a), graph.nodes.at(n));
        if (d > far_d || (d == far_d && n < far)) {
          far = n;
          far_d = d;
        }
      }
      promoted.insert(far);
      split_chain(a, chain, far);
    }
  }

  // Remaining edges form pure cycles of degree-2 nodes; anchor each at its farthest pair.
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    if (used[i] || graph.edges[i].u == graph.edges[i].v) continue;
    std::vector<NodeId> cycle;
    NodeId at = graph.edges[i].u;
    std::size_t ei = i;
    do {
      cycle.push_back(at);
      at = other(ei, at);
      const auto& inc = incident.at(at);
      ei = inc[0] == ei ? inc[1] : inc[0];
    } while (at != graph.edges[i].u);
    std::sort(cycle.begin(), cycle.end());
    NodeId best_a = cycle[0], best_b = cycle.size() > 1 ? cycle[1] : cycle[0];
    double best_d = -1.0;
    for (std::size_t p = 0; p < cycle.size(); ++p) {
      for (std::size_t q = p + 1; q < cycle.size(); ++q) {
        const double d = planar_distance(graph.nodes.at(cycle[p]), graph.nodes.at(cycle[q]));
        if (d > best_d) {
          best_d = d;
          best_a = cycle[p];
          best_b = cycle[q];
        }
      }
    }
    promoted.insert(best_a);
    promoted.insert(best_b);
    anchors.insert(best_b);  // walks from best_a stop at best_b
    for (std::size_t ej : incident.at(best_a)) {
      if (used[ej]) continue;
      std::vector<NodeId> interior;
      auto [chain, end] = walk(best_a, ej, interior);
      merged.push_back(merge_chain(graph, best_a, chain));
    }
  }

  CandidateGraph out;
  out.frame = graph.frame;
  for (const auto& [id, p] : graph.nodes)
    if (anchors.contains(id) || promoted.contains(id)) out.nodes.push_back({id, p});
  for (auto& e : merged) {
    if (e.u > e.v) {
      std::swap(e.u, e.v);
      std::reverse(e.geometry.begin(), e.geometry.end());
    }
    e.length_m = arc_length(e.geometry);
  }
  auto geometry_key = [](const CandidateEdge& e) {
    std::vector<std::pair<double, double>> k;
    k.reserve(e.geometry.size());
    for (const auto& p : e.geometry) k.emplace_back(p.lon, p.lat);
    return k;
  };
  std::sort(merged.begin(), merged.end(), [&](const CandidateEdge& a, const CandidateEdge& b) {
    if (std::tie(a.u, a.v, a.length_m) != std::tie(b.u, b.v, b.length_m))
      return std::tie(a.u, a.v, a.length_m) < std::tie(b.u, b.v, b.length_m);
    return geometry_key(a) < geometry_key(b);
  });
  out.edges = std::move(merged);
  return out;
}

// ---------------------------------------------------------------------------
// score_edges

double composite_weight(const CandidateEdge& edge, const ScoringWeights& w) {
  return w.distance * edge.length_m + w.road_class * edge.class_penalty + w.bend * edge.bend_rad;
}

CandidateGraph score_edges(const CandidateGraph& graph, const ScoringWeights& weights,
                           const std::map<std::string, double>& class_penalties) {
  weights.validate();
  for (const auto& [cls, penalty] : class_penalties)
    if (!(penalty >= 0.0)) throw ConfigError("road class penalty for '" + cls + "' must be non-negative");
  CandidateGraph out = graph;
  out.scoring = weights;
  for (auto& e : out.edges) {
    auto it = class_penalties.find(e.road_class);
    if (it == class_penalties.end()) throw ConfigError("no penalty configured for road class '" + e.road_class + "'");
    e.class_penalty = it->second;
    e.bend_rad = total_bend(e.geometry);
    e.weight = composite_weight(e, weights);
  }
  return out;
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

json frame_json(const std::optional<LocalFrame>& f) {
  if (!f) return nullptr;
  return json{{"lon0", f->lon0()}, {"lat0", f->lat0()}};
}

std::optional<LocalFrame> frame_from(const json& j) {
  if (!j.contains("frame") || j["frame"].is_null()) return std::nullopt;
  return LocalFrame(j["frame"].at("lon0").get<double>(), j["frame"].at("lat0").get<double>());
}

json node_json(NodeId id, const GeoPoint& p) {
  json n{{"id", id}, {"lon", p.lon}, {"lat", p.lat}};
  if (p.xy) {
    n["x"] = p.xy->x;
    n["y"] = p.xy->y;
  }
  return n;
}

GeoPoint node_point(const json& n) {
  GeoPoint p{n.at("lon").get<double>(), n.at("lat").get<double>(), std::nullopt};
  if (n.contains("x")) p.xy = Vec2{n.at("x").get<double>(), n.at("y").get<double>()};
  return p;
}

}  // namespace

json to_json(const CandidateGraph& graph) {
  json j;
  j["frame"] = frame_json(graph.frame);
  if (graph.scoring) {
    j["scoring"] = {{"lambda_d", graph.scoring->distance},
                    {"lambda_c", graph.scoring->road_class},
                    {"lambda_b", graph.scoring->bend}};
  } else {
    j["scoring"] = nullptr;
  }
  j["nodes"] = json::array();
  for (const auto& n : graph.nodes) j["nodes"].push_back(node_json(n.id, n.point));
  j["edges"] = json::array();
  for (const auto& e : graph.edges) {
    json g = json::array();
    for (const auto& p : e.geometry) g.push_back(point_json(p));
    j["edges"].push_back({{"u", e.u},
                          {"v", e.v},
                          {"d", e.length_m},
                          {"c_cls", e.class_penalty},
                          {"c_bend", e.bend_rad},
                          {"w", e.weight},
                          {"class", e.road_class},
                          {"geometry", std::move(g)}});
  }
  return j;
}

CandidateGraph candidate_graph_from_json(const json& j) {
  try {
    CandidateGraph g;
    g.frame = frame_from(j);
    if (j.contains("scoring") && !j["scoring"].is_null()) {
      const auto& s = j["scoring"];
      g.scoring = ScoringWeights{s.at("lambda_d").get<double>(), s.at("lambda_c").get<double>(),
                                 s.at("lambda_b").get<double>()};
    }
    for (const auto& n : j.at("nodes")) g.nodes.push_back({n.at("id").get<NodeId>(), node_point(n)});
    std::sort(g.nodes.begin(), g.nodes.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& e : j.at("edges")) {
      CandidateEdge ce;
      ce.u = e.at("u").get<NodeId>();
      ce.v = e.at("v").get<NodeId>();
      ce.length_m = e.at("d").get<double>();
      ce.class_penalty = e.value("c_cls", 0.0);
      ce.bend_rad = e.value("c_bend", 0.0);
      ce.weight = e.value("w", 0.0);
      ce.road_class = e.value("class", std::string("residential"));
      if (e.contains("geometry"))
        for (const auto& p : e["geometry"]) ce.geometry.push_back(point_from(p));
      if (!g.find(ce.u) || !g.find(ce.v)) throw DataError("candidate edge references a missing node");
      g.edges.push_back(std::move(ce));
    }
    return g;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed candidate graph document: ") + e.what());
  }
}

json to_json(const GeoGraph& graph) {
  json j;
  j["frame"] = frame_json(graph.frame);
  j["nodes"] = json::array();
  for (const auto& [id, p] : graph.nodes) j["nodes"].push_back(node_json(id, p));
  j["edges"] = json::array();
  for (const auto& e : graph.edges) {
    json g = json::array();
    for (const auto& p : e.geometry) g.push_back(point_json(p));
    j["edges"].push_back({{"u", e.u}, {"v", e.v}, {"class", e.road_class}, {"geometry", std::move(g)}});
  }
  return j;
}

GeoGraph geo_graph_from_json(const json& j) {
  try {
    GeoGraph g;
    g.frame = frame_from(j);
    for (const auto& n : j.at("nodes")) g.nodes.emplace(n.at("id").get<NodeId>(), node_point(n));
    for (const auto& e : j.at("edges")) {
      GeoEdge ge;
      ge.u = e.at("u").get<NodeId>();
      ge.v = e.at("v").get<NodeId>();
      ge.road_class = e.value("class", std::string("residential"));
      for (const auto& p : e.at("geometry")) ge.geometry.push_back(point_from(p));
      g.edges.push_back(std::move(ge));
    }
    return g;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed street graph document: ") + e.what());
  }
}

}  // namespace feedforge
