#include <cmath>
#include <map>
#include <utility>

#include "feedforge/error.hpp"
#include "feedforge/geograph.hpp"

namespace feedforge {

namespace {

using json = nlohmann::json;

struct RawLine {
  std::vector<GeoPoint> coords;
  std::string road_class;
};

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

GeoPoint read_position(const json& pos) {
  if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
    throw DataError("GeoJSON position must be an array of at least two numbers");
  GeoPoint p{pos[0].get<double>(), pos[1].get<double>(), std::nullopt};
  if (p.lon < -180.0 || p.lon > 180.0 || p.lat < -90.0 || p.lat > 90.0)
    throw DataError("GeoJSON position out of WGS84 range");
  return p;
}

std::vector<GeoPoint> read_line(const json& coords) {
  if (!coords.is_array()) throw DataError("LineString coordinates must be an array");
  std::vector<GeoPoint> out;
  for (const auto& c : coords) {
    GeoPoint p = read_position(c);
    if (!out.empty() && out.back().lon == p.lon && out.back().lat == p.lat) continue;
    out.push_back(p);
  }
  return out;
}

/// Snapping index over node positions in a temporary planar frame.
class SnapIndex {
 public:
  SnapIndex(const LocalFrame& frame, double tolerance)
      : frame_(frame), tol_(tolerance), cell_(tolerance > 0.0 ? tolerance : 1.0) {}

  std::optional<NodeId> find(const GeoPoint& p) const {
    const Vec2 q = frame_.forward(p.lon, p.lat);
    const auto [cx, cy] = cell_of(q);
    std::optional<NodeId> best;
    double best_d = 0.0;
    for (long dx = -1; dx <= 1; ++dx) {
      for (long dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find({cx + dx, cy + dy});
        if (it == cells_.end()) continue;
        for (const auto& [id, pos] : it->second) {
          const double d = std::hypot(pos.x - q.x, pos.y - q.y);
          if (d > tol_) continue;
          if (!best || d < best_d || (d == best_d && id < *best)) {
            best = id;
            best_d = d;
          }
        }
      }
    }
    return best;
  }

  void insert(NodeId id, const GeoPoint& p) {
    const Vec2 q = frame_.forward(p.lon, p.lat);
    cells_[cell_of(q)].emplace_back(id, q);
  }

 private:
  std::pair<long, long> cell_of(const Vec2& q) const {
    return {static_cast<long>(std::floor(q.x / cell_)), static_cast<long>(std::floor(q.y / cell_))};
  }

  LocalFrame frame_;
  double tol_;
  double cell_;
  std::map<std::pair<long, long>, std::vector<std::pair<NodeId, Vec2>>> cells_;
};

}  // namespace

GeoJsonParse parse_geojson(std::string_view text, const GeoJsonOptions& options) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(std::string("invalid JSON: ") + e.what(), line, col);
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array())
    throw DataError("GeoJSON input must be a FeatureCollection");

  GeoJsonParse result;
  std::vector<RawLine> lines;
  for (const auto& feature : doc["features"]) {
    const json* geometry = feature.contains("geometry") ? &feature["geometry"] : nullptr;
    if (geometry == nullptr || !geometry->is_object()) {
      ++result.skipped_features;
      continue;
    }
    std::string cls = options.default_road_class;
    if (feature.contains("properties") && feature["properties"].is_object()) {
      const auto& props = feature["properties"];
      if (props.contains("road_class") && props["road_class"].is_string())
        cls = props["road_class"].get<std::string>();
      else if (props.contains("highway") && props["highway"].is_string())
        cls = normalize_road_class(props["highway"].get<std::string>());
    }
    const std::string type = geometry->value("type", "");
    std::vector<std::vector<GeoPoint>> parts;
    if (type == "LineString") {
      parts.push_back(read_line(geometry->at("coordinates")));
    } else if (type == "MultiLineString") {
      for (const auto& part : geometry->at("coordinates")) parts.push_back(read_line(part));
    } else {
      ++result.skipped_features;
      continue;
    }
    for (auto& part : parts) {
      if (part.size() < 2) {
        ++result.skipped_features;
        continue;
      }
      lines.push_back({std::move(part), cls});
    }
  }
  if (lines.empty()) throw EmptyGraphError("GeoJSON input contains no usable LineString");

  double slon = 0.0, slat = 0.0;
  std::size_t count = 0;
  for (const auto& l : lines) {
    for (const auto& p : l.coords) {
      slon += p.lon;
      slat += p.lat;
      ++count;
    }
  }
  const LocalFrame frame(slon / static_cast<double>(count), slat / static_cast<double>(count));
  SnapIndex index(frame, options.snap_tolerance_m);

  GeoGraph& g = result.graph;
  NodeId next_id = 1;
  auto node_for = [&](const GeoPoint& p) {
    if (auto hit = index.find(p)) return *hit;
    const NodeId id = next_id++;
    g.nodes.emplace(id, p);
    index.insert(id, p);
    return id;
  };

  // Endpoints first, so interior vertices can split onto them afterwards.
  std::vector<std::pair<NodeId, NodeId>> ends;
  ends.reserve(lines.size());
  for (const auto& l : lines) {
    const NodeId a = node_for(l.coords.front());
    const NodeId b = node_for(l.coords.back());
    ends.emplace_back(a, b);
  }

  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto& l = lines[li];
    GeoEdge current;
    current.u = ends[li].first;
    current.road_class = l.road_class;
    current.geometry.push_back(g.nodes.at(current.u));
    for (std::size_t k = 1; k < l.coords.size(); ++k) {
      const bool last = k + 1 == l.coords.size();
      std::optional<NodeId> split = last ? std::optional<NodeId>(ends[li].second) : index.find(l.coords[k]);
      if (!split) {
        current.geometry.push_back(l.coords[k]);
        continue;
      }
      current.v = *split;
      current.geometry.push_back(g.nodes.at(*split));
      g.edges.push_back(current);
      current.u = *split;
      current.geometry.assign(1, g.nodes.at(*split));
    }
  }
  return result;
}

}  // namespace feedforge
