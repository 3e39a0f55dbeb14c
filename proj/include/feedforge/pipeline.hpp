#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "feedforge/electrify.hpp"
#include "feedforge/error.hpp"
#include "feedforge/geograph.hpp"
#include "feedforge/powerflow.hpp"
#include "feedforge/synth.hpp"

namespace feedforge {

struct Coordinate {
  double lon = 0.0;
  double lat = 0.0;
};

struct SourceSelection {
  std::optional<NodeId> node;
  std::optional<Coordinate> near;  // default: centre of the projection frame
};

struct RequiredSelection {
  std::vector<NodeId> ids;
  std::vector<Coordinate> near;
  std::size_t top_k_activity = 0;
};

enum class SolverKind { exact, heuristic };

struct OutputToggles {
  bool network_json = true;
  bool opendss = true;
  bool geojson = true;
  bool overlay_svg = true;
  bool voltage_profile_svg = true;
  bool summary = true;
};

/// Every knob of the pipeline, with the library defaults.
struct PipelineConfig {
  std::filesystem::path input_path;
  std::string input_format = "osm-xml";  // or "geojson"
  std::optional<std::filesystem::path> activity_path;
  std::optional<std::int64_t> households_total;  // default: number of activity points
  double snap_tolerance_m = 0.5;

  ScoringWeights scoring;
  RoadClassTable classes = RoadClassTable::defaults();

  SourceSelection source;
  RequiredSelection required;
  AlphaWeights alpha;
  SolverKind solver = SolverKind::exact;
  double timeout_s = 120.0;

  LineTemplateTable templates = default_line_templates();
  LoadAllocationConfig loads;
  double base_kv = 11.0;
  double base_mva = 1.0;
  double slack_v_pu = 1.0;

  PowerFlowOptions powerflow;
  double v_min = 0.95;
  std::vector<Scenario> scenarios = default_scenarios();

  OutputToggles output;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Reads a YAML config; relative paths resolve against the config file's directory.
PipelineConfig load_config(const std::filesystem::path& file);
PipelineConfig config_from_yaml(std::string_view text, const std::filesystem::path& base_dir);

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

enum class ExitCode : int { ok = 0, internal = 1, config = 2, data = 3, timeout = 4, nonconvergence = 5 };

/// Raised by the power-flow stage when a scenario does not converge.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Outcome of one stage: the files it wrote and whether the solver hit its time limit.
struct StageResult {
  std::vector<std::filesystem::path> written;
  bool timed_out = false;
};

// Stage functions. Each reads the intermediates of its predecessors from `in` and writes its own to `out`.
StageResult stage_ingest(const PipelineConfig& cfg, const std::filesystem::path& out);
StageResult stage_synth(const std::filesystem::path& in, const std::filesystem::path& out);
StageResult stage_electrify(const std::filesystem::path& in, const std::filesystem::path& out);
StageResult stage_pf(const std::filesystem::path& in, const std::filesystem::path& out);
StageResult stage_report(const std::filesystem::path& in, const std::filesystem::path& out, std::ostream& table);

/// Runs every stage into `out`, writes run_manifest.json, prints the summary table to `table`.
/// Returns the exit code; on failure the files written by this run are removed.
ExitCode run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out, std::ostream& table,
                      std::ostream& log, bool verbose = false);

/// Maps an exception from a stage to its exit code.
ExitCode exit_code_for(const std::exception& e);

/// Names of the six exported artifacts.
const std::vector<std::string>& artifact_names();

}  // namespace feedforge
