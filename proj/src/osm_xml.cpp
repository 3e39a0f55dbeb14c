#include <charconv>
#include <cstring>
#include <optional>
#include <string>
#include <unordered_map>

#include <expat.h>

#include "feedforge/error.hpp"
#include "feedforge/geograph.hpp"

namespace feedforge {

namespace {

struct RawWay {
  std::vector<NodeId> refs;
  std::string highway;
};

struct OsmReader {
  XML_Parser parser = nullptr;
  std::unordered_map<NodeId, GeoPoint> coords;
  std::vector<RawWay> ways;
  std::optional<RawWay> open_way;
  std::optional<ParseError> error;

  void fail(const std::string& msg) {
    if (error) return;
    error.emplace(msg, XML_GetCurrentLineNumber(parser), XML_GetCurrentColumnNumber(parser) + 1);
    XML_StopParser(parser, XML_FALSE);
  }
};

const char* find_attr(const XML_Char** attrs, const char* name) {
  for (int i = 0; attrs[i] != nullptr; i += 2) {
    if (std::strcmp(attrs[i], name) == 0) return attrs[i + 1];
  }
  return nullptr;
}

template <typename T>
bool parse_number(const char* s, T& out) {
  if (s == nullptr) return false;
  const char* end = s + std::strlen(s);
  auto [ptr, ec] = std::from_chars(s, end, out);
  return ec == std::errc{} && ptr == end;
}

void on_start(void* data, const XML_Char* name, const XML_Char** attrs) {
  auto& r = *static_cast<OsmReader*>(data);
  if (r.error) return;
  if (std::strcmp(name, "node") == 0) {
    NodeId id = 0;
    double lat = 0.0, lon = 0.0;
    if (!parse_number(find_attr(attrs, "id"), id) || !parse_number(find_attr(attrs, "lat"), lat) ||
        !parse_number(find_attr(attrs, "lon"), lon)) {
      r.fail("node element needs numeric id, lat and lon");
      return;
    }
    if (lon < -180.0 || lon > 180.0 || lat < -90.0 || lat > 90.0) {
      r.fail("node " + std::to_string(id) + " has out-of-range coordinates");
      return;
    }
    r.coords[id] = GeoPoint{lon, lat, std::nullopt};
  } else if (std::strcmp(name, "way") == 0) {
    r.open_way.emplace();
  } else if (r.open_way && std::strcmp(name, "nd") == 0) {
    NodeId ref = 0;
    if (!parse_number(find_attr(attrs, "ref"), ref)) {
      r.fail("nd element needs a numeric ref");
      return;
    }
    r.open_way->refs.push_back(ref);
  } else if (r.open_way && std::strcmp(name, "tag") == 0) {
    const char* k = find_attr(attrs, "k");
    const char* v = find_attr(attrs, "v");
    if (k != nullptr && v != nullptr && std::strcmp(k, "highway") == 0) r.open_way->highway = v;
  }
}

void on_end(void* data, const XML_Char* name) {
  auto& r = *static_cast<OsmReader*>(data);
  if (r.error) return;
  if (std::strcmp(name, "way") == 0 && r.open_way) {
    if (!r.open_way->highway.empty()) r.ways.push_back(std::move(*r.open_way));
    r.open_way.reset();
  }
}

}  // namespace

GeoGraph parse_osm_xml(std::string_view xml, const RoadClassTable& classes) {
  OsmReader reader;
  reader.parser = XML_ParserCreate(nullptr);
  if (reader.parser == nullptr) throw Error("cannot allocate XML parser");
  XML_SetUserData(reader.parser, &reader);
  XML_SetElementHandler(reader.parser, on_start, on_end);
  const auto status = XML_Parse(reader.parser, xml.data(), static_cast<int>(xml.size()), XML_TRUE);
  if (status == XML_STATUS_ERROR && !reader.error) {
    reader.error.emplace(std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(reader.parser)),
                         XML_GetCurrentLineNumber(reader.parser),
                         XML_GetCurrentColumnNumber(reader.parser) + 1);
  }
  XML_ParserFree(reader.parser);
  if (reader.error) throw *reader.error;

  // Split every usable way into runs of nodes that exist in the document.
  struct Run {
    std::vector<NodeId> refs;
    std::string road_class;
  };
  std::vector<Run> runs;
  for (const auto& way : reader.ways) {
    const std::string cls = normalize_road_class(way.highway);
    if (!classes.accepts(cls)) continue;
    Run current{{}, cls};
    auto flush = [&] {
      if (current.refs.size() >= 2) runs.push_back(current);
      current.refs.clear();
    };
    for (NodeId ref : way.refs) {
      if (!reader.coords.contains(ref)) {
        flush();
        continue;
      }
      if (!current.refs.empty() && current.refs.back() == ref) continue;
      current.refs.push_back(ref);
    }
    flush();
  }
  if (runs.empty()) throw EmptyGraphError("OSM document contains no usable highway ways");

  // Graph nodes: run endpoints and any node referenced more than once.
  std::unordered_map<NodeId, int> uses;
  for (const auto& run : runs)
    for (NodeId ref : run.refs) ++uses[ref];
  auto is_graph_node = [&](const Run& run, std::size_t i) {
    return i == 0 || i + 1 == run.refs.size() || uses[run.refs[i]] >= 2;
  };

  GeoGraph g;
  for (const auto& run : runs) {
    std::size_t start = 0;
    for (std::size_t i = 1; i < run.refs.size(); ++i) {
      if (!is_graph_node(run, i)) continue;
      GeoEdge e;
      e.u = run.refs[start];
      e.v = run.refs[i];
      e.road_class = run.road_class;
      for (std::size_t k = start; k <= i; ++k) e.geometry.push_back(reader.coords.at(run.refs[k]));
      g.nodes.emplace(e.u, reader.coords.at(e.u));
      g.nodes.emplace(e.v, reader.coords.at(e.v));
      g.edges.push_back(std::move(e));
      start = i;
    }
  }
  return g;
}

}  // namespace feedforge
