#include "feedforge/export.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "feedforge/error.hpp"

namespace feedforge {

using json = nlohmann::json;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string to_network_json(const ElectricalNetwork& net, const Provenance& provenance) {
  const json network = to_json(net);
  json doc{{"schema_version", kNetworkSchemaVersion},
           {"network", network},
           {"provenance",
            {{"source_digest", provenance.source_digest},
             {"config_digest", provenance.config_digest},
             {"tool_version", provenance.tool_version},
             {"content_digest", sha256_hex(network.dump())}}}};
  return doc.dump(2) + "\n";
}

ElectricalNetwork from_network_json(std::string_view raw) {
  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("network document is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version") || !doc["schema_version"].is_string())
    throw DataError("network document has no schema_version");
  if (doc["schema_version"].get<std::string>() != kNetworkSchemaVersion)
    throw DataError("unsupported network schema version " + doc["schema_version"].get<std::string>());
  if (!doc.contains("network")) throw DataError("network document has no network");
  const auto& network = doc["network"];
  if (doc.contains("provenance") && doc["provenance"].contains("content_digest")) {
    const auto expected = doc["provenance"]["content_digest"].get<std::string>();
    if (sha256_hex(network.dump()) != expected) throw DataError("network content digest mismatch");
  }
  return electrical_network_from_json(network);
}

// ---------------------------------------------------------------------------

std::string to_opendss(const ElectricalNetwork& net) {
  net.validate();
  const double kv = net.base_kv;
  std::string out;
  out += "Clear\n";
  out += fmt::format("New Circuit.feedforge basekv={} pu={} phases=3 bus1=b{} MVAsc3=1000000 MVAsc1=1000000\n", kv,
                     net.slack_v_pu, net.slack_bus);
  for (const auto& l : net.lines) {
    const double amps = l.rating_mva * 1000.0 / (std::sqrt(3.0) * kv);
    out += fmt::format(
        "New Line.l{}_{} bus1=b{} bus2=b{} phases=3 R1={} X1={} R0={} X0={} C1=0 C0=0 length={} units=km normamps={}\n",
        l.from, l.to, l.from, l.to, l.r_per_km, l.x_per_km, l.r_per_km, l.x_per_km, l.length_km, amps);
  }
  for (const auto& l : net.loads) {
    if (l.p_mw == 0.0 && l.q_mvar == 0.0) continue;
    out += fmt::format("New Load.ld{} bus1=b{} phases=3 kV={} kW={} kvar={} model=1\n", l.bus, l.bus, kv,
                       l.p_mw * 1000.0, l.q_mvar * 1000.0);
  }
  out += fmt::format("Set VoltageBases=[{}]\n", kv);
  out += "CalcVoltageBases\n";
  out += "Solve\n";
  return out;
}

std::string to_geojson(const FeederGraph& feeder, const ElectricalNetwork& net) {
  json features = json::array();
  for (const auto& bus : net.buses) {
    const auto i = feeder.find(bus.id);
    if (!i) throw DataError("bus " + std::to_string(bus.id) + " has no feeder node with lon/lat");
    const auto& node = feeder.nodes[*i];
    if (!std::isfinite(node.point.lon) || !std::isfinite(node.point.lat))
      throw DataError("bus " + std::to_string(bus.id) + " has no lon/lat");
    const Load* load = net.load_at(bus.id);
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Point"}, {"coordinates", {node.point.lon, node.point.lat}}}},
                        {"properties",
                         {{"id", bus.id},
                          {"load_mw", load ? load->p_mw : 0.0},
                          {"load_mvar", load ? load->q_mvar : 0.0},
                          {"households", load ? load->households : 0},
                          {"depth", node.depth},
                          {"is_source", bus.id == net.slack_bus}}}});
  }
  std::map<std::pair<NodeId, NodeId>, const FeederEdge*> by_ends;
  for (const auto& e : feeder.edges) by_ends[{e.parent, e.child}] = &e;
  for (const auto& l : net.lines) {
    auto it = by_ends.find({l.from, l.to});
    if (it == by_ends.end()) throw DataError("line " + std::to_string(l.from) + "-" + std::to_string(l.to) + " has no feeder edge");
    json coords = json::array();
    for (const auto& p : it->second->geometry) coords.push_back({p.lon, p.lat});
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "LineString"}, {"coordinates", std::move(coords)}}},
                        {"properties",
                         {{"from", l.from},
                          {"to", l.to},
                          {"highway", l.road_class},
                          {"length_km", l.length_km},
                          {"r_ohm", l.r_ohm},
                          {"x_ohm", l.x_ohm},
                          {"rating_mva", l.rating_mva}}}});
  }
  json doc{{"type", "FeatureCollection"}, {"features", std::move(features)}};
  return doc.dump(1) + "\n";
}

// ---------------------------------------------------------------------------

namespace {

struct Box {
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = std::numeric_limits<double>::infinity();
  double x1 = -std::numeric_limits<double>::infinity();
  double y1 = -std::numeric_limits<double>::infinity();

  void add(const Vec2& p) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
};

std::string path_data(const Polyline& line) {
  std::string d;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const Vec2& p = line[i].planar();
    d += fmt::format("{}{:.2f} {:.2f}", i == 0 ? "M" : " L", p.x, -p.y);
  }
  return d;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_overlay_svg(const GeoGraph& street, const FeederGraph& feeder) {
  if (feeder.nodes.empty()) throw DataError("cannot draw an empty feeder");
  if (street.frame && feeder.frame && !(*street.frame == *feeder.frame))
    throw DataError("street layer and feeder use different projection frames");
  Box box;
  for (const auto& e : street.edges)
    for (const auto& p : e.geometry) box.add(p.planar());
  for (const auto& n : feeder.nodes) box.add(n.point.planar());
  for (const auto& e : feeder.edges)
    for (const auto& p : e.geometry) box.add(p.planar());
  const double span = std::max({box.x1 - box.x0, box.y1 - box.y0, 1.0});
  const double margin = 0.05 * span;
  const double stroke = span / 400.0;

  std::string out;
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{:.2f} {:.2f} {:.2f} {:.2f}\" width=\"800\" height=\"{:.0f}\">\n",
      box.x0 - margin, -box.y1 - margin, box.x1 - box.x0 + 2 * margin, box.y1 - box.y0 + 2 * margin,
      800.0 * (box.y1 - box.y0 + 2 * margin) / (box.x1 - box.x0 + 2 * margin));
  out += "<rect x=\"-1e9\" y=\"-1e9\" width=\"2e9\" height=\"2e9\" fill=\"#ffffff\"/>\n";
  out += fmt::format("<g fill=\"none\" stroke=\"#c8c8c8\" stroke-width=\"{:.2f}\" stroke-linecap=\"round\">\n", stroke);
  for (const auto& e : street.edges) out += fmt::format("<path class=\"street\" d=\"{}\"/>\n", path_data(e.geometry));
  out += "</g>\n";
  out += fmt::format("<g fill=\"none\" stroke=\"#d62728\" stroke-width=\"{:.2f}\" stroke-linecap=\"round\">\n", 3 * stroke);
  for (const auto& e : feeder.edges) out += fmt::format("<path class=\"feeder\" d=\"{}\"/>\n", path_data(e.geometry));
  out += "</g>\n";
  const Vec2& s = feeder.node(feeder.root).point.planar();
  out += fmt::format(
      "<rect class=\"source\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#1f3b73\"/>\n",
      s.x - 6 * stroke, -s.y - 6 * stroke, 12 * stroke, 12 * stroke);
  out += "</svg>\n";
  return out;
}

std::string render_voltage_profile_svg(const std::vector<std::pair<std::string, PowerFlowResult>>& results,
                                       double v_min_bound) {
  std::vector<const std::pair<std::string, PowerFlowResult>*> shown;
  for (const auto& r : results)
    if (r.second.converged) shown.push_back(&r);
  if (shown.empty()) throw DataError("no converged power flow to plot");

  const auto order = shown.front()->second.profile_order();
  double lo = std::min(v_min_bound, 1.0), hi = 1.0;
  for (const auto* r : shown)
    for (const auto& [id, v] : r->second.v_pu) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double pad = std::max(0.005, 0.05 * (hi - lo));
  lo -= pad;
  hi += pad;

  constexpr double W = 800, H = 420, left = 70, right = 170, top = 20, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  auto xpos = [&](std::size_t k) {
    return order.size() <= 1 ? left + pw / 2 : left + pw * static_cast<double>(k) / static_cast<double>(order.size() - 1);
  };
  auto ypos = [&](double v) { return top + ph * (hi - v) / (hi - lo); };

  static constexpr const char* palette[] = {"#2ca02c", "#1f77b4", "#d62728", "#9467bd", "#ff7f0e", "#8c564b"};
  std::string out;
  out += fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {:.0f} {:.0f}\" width=\"{:.0f}\" height=\"{:.0f}\">\n", W, H, W, H);
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"#ffffff\"/>\n", W, H);
  out += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"#000000\"/>\n", left, top, pw, ph);
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{:.3f}</text>\n", left - 6, ypos(v) + 4, v);
  }
  out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"middle\">bus (sorted by depth, id)</text>\n", left + pw / 2, H - 15);
  out += fmt::format("<text x=\"18\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2f})\">voltage (pu)</text>\n", top + ph / 2, top + ph / 2);
  out += fmt::format("<line class=\"reference\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#555555\" stroke-dasharray=\"6 3\"/>\n",
                     left, ypos(1.0), left + pw, ypos(1.0));
  out += fmt::format("<line class=\"vmin\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#aa0000\" stroke-dasharray=\"2 3\"/>\n",
                     left, ypos(v_min_bound), left + pw, ypos(v_min_bound));

  for (std::size_t s = 0; s < shown.size(); ++s) {
    const auto& [name, r] = *shown[s];
    const char* colour = palette[s % std::size(palette)];
    std::string pts;
    for (std::size_t k = 0; k < order.size(); ++k) {
      auto it = r.v_pu.find(order[k]);
      if (it == r.v_pu.end()) continue;
      pts += fmt::format("{}{:.2f},{:.2f}", pts.empty() ? "" : " ", xpos(k), ypos(it->second));
    }
    out += fmt::format("<polyline class=\"scenario\" data-name=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                       escape(name), colour, pts);
    if (order.size() == 1)
      out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", xpos(0), ypos(r.v_pu.begin()->second), colour);
    const double ly = top + 18.0 * static_cast<double>(s) + 10;
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       W - right + 15, ly, W - right + 40, ly, colour);
    out += fmt::format("<text class=\"legend\" x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"12\">{}</text>\n", W - right + 46, ly + 4, escape(name));
  }
  out += "</svg>\n";
  return out;
}

}  // namespace feedforge
