#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace feedforge {

using NodeId = std::int64_t;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// WGS84 position, optionally carrying planar coordinates in a graph-local frame (meters).
struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;
  std::optional<Vec2> xy;

  /// Planar coordinates; throws DataError if the point has not been projected.
  const Vec2& planar() const;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

using Polyline = std::vector<GeoPoint>;

/// Local tangent-plane frame (east/north meters) anchored at a WGS84 origin.
///
/// Points are mapped through earth-centred coordinates on the WGS84 ellipsoid and
/// dropped onto the tangent plane at the origin. Within a couple of degrees of the
/// origin, planar distances stay within a few 1e-4 relative of geodesic distances.
class LocalFrame {
 public:
  LocalFrame() = default;
  LocalFrame(double lon0, double lat0);

  double lon0() const noexcept { return lon0_; }
  double lat0() const noexcept { return lat0_; }

  Vec2 forward(double lon, double lat) const;
  GeoPoint project(const GeoPoint& p) const;

  friend bool operator==(const LocalFrame& a, const LocalFrame& b) {
    return a.lon0_ == b.lon0_ && a.lat0_ == b.lat0_;
  }

 private:
  double lon0_ = 0.0;
  double lat0_ = 0.0;
  double origin_[3] = {0.0, 0.0, 0.0};
  double east_[3] = {0.0, 0.0, 0.0};
  double north_[3] = {0.0, 0.0, 0.0};
};

/// Sum of planar segment lengths; all points must be projected.
double arc_length(std::span<const GeoPoint> line);

/// Sum of absolute heading changes (radians) at interior vertices of a projected polyline.
double total_bend(std::span<const GeoPoint> line);

struct GeoEdge {
  NodeId u = 0;
  NodeId v = 0;
  Polyline geometry;
  std::string road_class;

  friend bool operator==(const GeoEdge&, const GeoEdge&) = default;
};

/// Raw map-derived street graph.
struct GeoGraph {
  std::map<NodeId, GeoPoint> nodes;
  std::vector<GeoEdge> edges;
  std::optional<LocalFrame> frame;

  bool projected() const noexcept { return frame.has_value(); }
  double total_length() const;

  friend bool operator==(const GeoGraph&, const GeoGraph&) = default;
};

struct CandidateNode {
  NodeId id = 0;
  GeoPoint point;

  friend bool operator==(const CandidateNode&, const CandidateNode&) = default;
};

struct CandidateEdge {
  NodeId u = 0;
  NodeId v = 0;
  double length_m = 0.0;       // d_ij
  double class_penalty = 0.0;  // c_cls
  double bend_rad = 0.0;       // c_bend
  double weight = 0.0;         // w_ij, filled by score_edges
  std::string road_class;
  Polyline geometry;

  friend bool operator==(const CandidateEdge&, const CandidateEdge&) = default;
};

/// Weights of the composite edge score w = distance*d + road_class*c_cls + bend*c_bend.
struct ScoringWeights {
  double distance = 0.0;  // 1/m
  double road_class = 1.0;
  double bend = 0.25;  // 1/rad

  void validate() const;

  friend bool operator==(const ScoringWeights&, const ScoringWeights&) = default;
};

/// Simplified, planar, connected graph from which feeder edges are selected.
/// Nodes are sorted by id; edges are in canonical order (u < v, then by u, v, length).
struct CandidateGraph {
  std::vector<CandidateNode> nodes;
  std::vector<CandidateEdge> edges;
  std::optional<LocalFrame> frame;
  std::optional<ScoringWeights> scoring;

  /// Position of `id` in `nodes`, or nullopt.
  std::optional<std::size_t> find(NodeId id) const;
  std::size_t index_of(NodeId id) const;  // throws DataError if absent
  double total_length() const;

  friend bool operator==(const CandidateGraph&, const CandidateGraph&) = default;
};

/// Road class penalty table plus the classes dropped at ingestion.
struct RoadClassTable {
  std::map<std::string, double> penalties;
  std::set<std::string> excluded;

  static RoadClassTable defaults();
  bool accepts(const std::string& road_class) const;
};

/// Maps an OSM `highway` value onto a road class (drops the `_link` suffix).
std::string normalize_road_class(std::string_view highway);

// ---------------------------------------------------------------------------
// Ingestion

GeoGraph parse_osm_xml(std::string_view xml, const RoadClassTable& classes = RoadClassTable::defaults());

struct GeoJsonOptions {
  double snap_tolerance_m = 0.5;
  std::string default_road_class = "residential";
};

struct GeoJsonParse {
  GeoGraph graph;
  std::size_t skipped_features = 0;
};

GeoJsonParse parse_geojson(std::string_view text, const GeoJsonOptions& options = {});

// ---------------------------------------------------------------------------
// Processing

/// Projects every node and geometry vertex into a frame centred on the node centroid.
GeoGraph project(const GeoGraph& graph);

/// Drops self-loops, collapses parallel edges to the shortest, keeps the largest component.
GeoGraph clean(const GeoGraph& graph);

/// Merges chains of degree-2 nodes. Nodes in `keep` are never merged away.
CandidateGraph simplify(const GeoGraph& graph, const std::set<NodeId>& keep = {});

/// Fills class penalty, bend and composite weight on every edge.
CandidateGraph score_edges(const CandidateGraph& graph, const ScoringWeights& weights,
                           const std::map<std::string, double>& class_penalties);

/// Weight of a single edge under `weights`.
double composite_weight(const CandidateEdge& edge, const ScoringWeights& weights);

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const CandidateGraph& graph);
CandidateGraph candidate_graph_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GeoGraph& graph);
GeoGraph geo_graph_from_json(const nlohmann::json& j);

}  // namespace feedforge
