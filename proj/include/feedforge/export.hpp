#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "feedforge/electrify.hpp"
#include "feedforge/geograph.hpp"
#include "feedforge/powerflow.hpp"
#include "feedforge/synth.hpp"

namespace feedforge {

inline constexpr std::string_view kNetworkSchemaVersion = "1.0";

struct Provenance {
  std::string source_digest;  // SHA-256 of the input data
  std::string config_digest;  // SHA-256 of the configuration text
  std::string tool_version;
};

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Network document with schema version, provenance and a content digest. Keys sorted.
std::string to_network_json(const ElectricalNetwork& net, const Provenance& provenance = {});

/// Parses and validates a network document; a digest mismatch is a data error.
ElectricalNetwork from_network_json(std::string_view raw);

/// Self-contained OpenDSS script ending in a solve.
std::string to_opendss(const ElectricalNetwork& net);

/// One Point per bus and one LineString per line.
std::string to_geojson(const FeederGraph& feeder, const ElectricalNetwork& net);

/// Street layer muted, feeder highlighted, source marked.
std::string render_overlay_svg(const GeoGraph& street, const FeederGraph& feeder);

/// One polyline per scenario over buses ordered by (depth, id), with 1.0 pu and V_min references.
std::string render_voltage_profile_svg(const std::vector<std::pair<std::string, PowerFlowResult>>& results,
                                       double v_min_bound = 0.95);

}  // namespace feedforge
