#include "feedforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "feedforge/export.hpp"
#include "feedforge/metrics.hpp"

namespace feedforge {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = FEEDFORGE_VERSION;

std::string read_file(const fs::path& p, const char* what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError(std::string("cannot read ") + what + " " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& dir, const std::string& name, const char* producer) {
  const fs::path p = dir / name;
  if (!fs::exists(p)) throw DataError("missing " + name + " in " + dir.string() + " (run '" + producer + "' first)");
  try {
    return json::parse(read_file(p, "intermediate"));
  } catch (const json::parse_error& e) {
    throw DataError("corrupt intermediate " + p.string() + ": " + e.what());
  }
}

void write_file(StageResult& r, const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out << content;
  if (!out) throw DataError("failed writing " + p.string());
  r.written.push_back(p);
}

void write_json(StageResult& r, const fs::path& p, const json& j) { write_file(r, p, j.dump(2) + "\n"); }

/// Copies intermediates forward when a stage reads and writes different directories.
void carry(StageResult& r, const fs::path& in, const fs::path& out, std::initializer_list<const char*> names) {
  if (fs::equivalent(in, out)) return;
  for (const char* name : names) {
    if (!fs::exists(in / name)) continue;
    fs::copy_file(in / name, out / name, fs::copy_options::overwrite_existing);
    r.written.push_back(out / name);
  }
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create output directory " + p.string() + ": " + ec.message());
}

json points_json(const std::vector<GeoPoint>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.lon, p.lat, p.xy->x, p.xy->y});
  return a;
}

std::vector<GeoPoint> points_from(const json& a) {
  std::vector<GeoPoint> pts;
  for (const auto& p : a)
    pts.push_back({p.at(0).get<double>(), p.at(1).get<double>(), Vec2{p.at(2).get<double>(), p.at(3).get<double>()}});
  return pts;
}

/// Point and MultiPoint features of a GeoJSON document.
std::vector<GeoPoint> read_activity(const fs::path& p) {
  json doc;
  try {
    doc = json::parse(read_file(p, "activity layer"));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("activity layer is not JSON: ") + e.what());
  }
  std::vector<GeoPoint> out;
  auto add_geometry = [&](const json& g) {
    if (!g.is_object() || !g.contains("type")) return;
    const auto type = g["type"].get<std::string>();
    const auto& c = g.at("coordinates");
    if (type == "Point") out.push_back({c.at(0).get<double>(), c.at(1).get<double>(), std::nullopt});
    if (type == "MultiPoint")
      for (const auto& q : c) out.push_back({q.at(0).get<double>(), q.at(1).get<double>(), std::nullopt});
  };
  try {
    if (doc.value("type", "") == "FeatureCollection") {
      for (const auto& f : doc.at("features"))
        if (f.contains("geometry") && !f["geometry"].is_null()) add_geometry(f["geometry"]);
    } else if (doc.value("type", "") == "Feature") {
      add_geometry(doc.at("geometry"));
    } else {
      add_geometry(doc);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed activity layer: ") + e.what());
  }
  return out;
}

NodeId nearest_node(const GeoGraph& g, const Vec2& at) {
  NodeId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [id, p] : g.nodes) {
    const double d = std::hypot(p.planar().x - at.x, p.planar().y - at.y);
    if (d < best_d) {
      best_d = d;
      best = id;
    }
  }
  return best;
}

PipelineConfig read_config(const fs::path& in) {
  return pipeline_config_from_json(read_json(in, "config.json", "ingest"));
}

}  // namespace

const std::vector<std::string>& artifact_names() {
  static const std::vector<std::string> names{"network.json", "feeder.dss", "feeder.geojson",
                                              "overlay.svg", "voltage_profile.svg", "summary.json"};
  return names;
}

// ---------------------------------------------------------------------------

StageResult stage_ingest(const PipelineConfig& cfg, const fs::path& out) {
  cfg.validate();
  ensure_dir(out);
  StageResult r;
  const std::string raw = read_file(cfg.input_path, "input");
  GeoGraph street;
  if (cfg.input_format == "osm-xml") {
    street = parse_osm_xml(raw, cfg.classes);
  } else {
    GeoJsonOptions opt;
    opt.snap_tolerance_m = cfg.snap_tolerance_m;
    street = parse_geojson(raw, opt).graph;
    std::erase_if(street.edges, [&](const GeoEdge& e) { return !cfg.classes.accepts(e.road_class); });
    if (street.edges.empty()) throw EmptyGraphError("no usable street segments in " + cfg.input_path.string());
  }
  street = clean(project(street));
  const LocalFrame& frame = *street.frame;

  // Nodes referenced by the config survive simplification.
  std::set<NodeId> keep;
  NodeId source = 0;
  if (cfg.source.node) {
    if (!street.nodes.count(*cfg.source.node))
      throw ConfigError("source node " + std::to_string(*cfg.source.node) + " is not in the street graph");
    source = *cfg.source.node;
  } else {
    const Vec2 at = cfg.source.near ? frame.forward(cfg.source.near->lon, cfg.source.near->lat) : Vec2{0.0, 0.0};
    source = nearest_node(street, at);
  }
  keep.insert(source);
  for (NodeId id : cfg.required.ids) {
    if (!street.nodes.count(id)) throw ConfigError("required node " + std::to_string(id) + " is not in the street graph");
    keep.insert(id);
  }
  std::vector<NodeId> required_near;
  for (const auto& c : cfg.required.near) {
    required_near.push_back(nearest_node(street, frame.forward(c.lon, c.lat)));
    keep.insert(required_near.back());
  }

  CandidateGraph cand = score_edges(simplify(street, keep), cfg.scoring, cfg.classes.penalties);

  json selection{{"source", source},
                 {"required_near", required_near},
                 {"source_digest", sha256_hex(raw + (cfg.activity_path ? read_file(*cfg.activity_path, "activity layer") : ""))}};
  const json config = to_json(cfg);
  write_json(r, out / "config.json", config);
  write_json(r, out / "street.json", to_json(street));
  write_json(r, out / "candidate.json", to_json(cand));
  write_json(r, out / "selection.json", selection);
  if (cfg.activity_path) {
    auto pts = read_activity(*cfg.activity_path);
    for (auto& p : pts) p = frame.project(p);
    write_json(r, out / "activity.json", points_json(pts));
  }
  return r;
}

StageResult stage_synth(const fs::path& in, const fs::path& out) {
  ensure_dir(out);
  StageResult r;
  const PipelineConfig cfg = read_config(in);
  CandidateGraph cand = candidate_graph_from_json(read_json(in, "candidate.json", "ingest"));
  const json selection = read_json(in, "selection.json", "ingest");

  std::set<NodeId> required(cfg.required.ids.begin(), cfg.required.ids.end());
  for (const auto& id : selection.at("required_near")) required.insert(id.get<NodeId>());
  if (cfg.required.top_k_activity > 0) {
    const auto activity = points_from(read_json(in, "activity.json", "ingest"));
    std::vector<std::pair<std::int64_t, NodeId>> counts;  // (-count, id) sorts by count desc, id asc
    for (const auto& node : cand.nodes) {
      const Vec2& at = node.point.planar();
      std::int64_t c = 0;
      for (const auto& p : activity)
        if (std::hypot(p.xy->x - at.x, p.xy->y - at.y) <= cfg.loads.activity_radius_m) ++c;
      if (c > 0) counts.emplace_back(-c, node.id);
    }
    std::sort(counts.begin(), counts.end());
    for (std::size_t k = 0; k < counts.size() && k < cfg.required.top_k_activity; ++k) required.insert(counts[k].second);
  }
  const NodeId source = selection.at("source").get<NodeId>();
  required.erase(source);

  auto problem = SynthesisProblem::make(std::move(cand), source, required, cfg.alpha);
  const SynthesisSolution sol =
      cfg.solver == SolverKind::exact ? solve_exact(problem, {cfg.timeout_s}) : solve_heuristic(problem);
  const FeederGraph feeder = to_feeder_graph(problem, sol);
  r.timed_out = cfg.solver == SolverKind::exact && !sol.proven_optimal;

  carry(r, in, out, {"config.json", "selection.json", "street.json", "activity.json", "candidate.json"});
  write_json(r, out / "solution.json",
             {{"source", problem.source}, {"required", problem.required}, {"solution", to_json(problem, sol)}});
  write_json(r, out / "feeder.json", to_json(feeder));
  return r;
}

StageResult stage_electrify(const fs::path& in, const fs::path& out) {
  ensure_dir(out);
  StageResult r;
  const PipelineConfig cfg = read_config(in);
  const FeederGraph feeder = feeder_graph_from_json(read_json(in, "feeder.json", "synth"));
  const json selection = read_json(in, "selection.json", "ingest");
  std::optional<std::vector<GeoPoint>> activity;
  if (cfg.activity_path) activity = points_from(read_json(in, "activity.json", "ingest"));

  LoadAllocationConfig lc = cfg.loads;
  if (lc.centroids.empty()) lc.centroids.push_back(default_centroid(feeder, activity));
  const std::int64_t households = cfg.households_total ? *cfg.households_total
                                  : activity           ? static_cast<std::int64_t>(activity->size())
                                                       : 0;
  const auto weights = compute_weights(feeder, lc, activity);
  auto loads = allocate_loads(weights, lc, households);
  auto lines = assign_line_params(feeder, cfg.templates);
  const auto net = build_network(feeder, std::move(lines), std::move(loads), cfg.slack_v_pu, cfg.base_mva, cfg.base_kv);

  const Provenance prov{selection.at("source_digest").get<std::string>(), sha256_hex(to_json(cfg).dump()), kToolVersion};
  carry(r, in, out, {"config.json", "selection.json", "street.json", "activity.json", "candidate.json", "solution.json",
                     "feeder.json"});
  write_file(r, out / "network.json", to_network_json(net, prov));
  return r;
}

StageResult stage_pf(const fs::path& in, const fs::path& out) {
  ensure_dir(out);
  StageResult r;
  const PipelineConfig cfg = read_config(in);
  const auto net = from_network_json(read_file(in / "network.json", "network document"));
  const auto outcomes = run_scenarios(net, cfg.scenarios, cfg.powerflow, cfg.v_min);
  for (const auto& o : outcomes)
    if (!o.result.converged)
      throw NonConvergenceError("power flow for scenario '" + o.scenario.name + "' did not converge in " +
                                std::to_string(o.result.iterations) + " iterations");
  carry(r, in, out, {"config.json", "selection.json", "street.json", "activity.json", "candidate.json", "solution.json",
                     "feeder.json", "network.json"});
  write_json(r, out / "powerflow.json", to_json(outcomes));
  return r;
}

StageResult stage_report(const fs::path& in, const fs::path& out, std::ostream& table) {
  ensure_dir(out);
  StageResult r;
  const PipelineConfig cfg = read_config(in);
  const GeoGraph street = geo_graph_from_json(read_json(in, "street.json", "ingest"));
  const FeederGraph feeder = feeder_graph_from_json(read_json(in, "feeder.json", "synth"));
  const std::string net_doc = read_file(in / "network.json", "network document");
  const auto net = from_network_json(net_doc);
  const auto outcomes = scenario_outcomes_from_json(read_json(in, "powerflow.json", "pf"));
  const auto summary = structural_summary(feeder, net);

  carry(r, in, out, {"config.json", "selection.json", "street.json", "activity.json", "candidate.json", "solution.json",
                     "feeder.json", "network.json", "powerflow.json"});
  if (cfg.output.opendss) write_file(r, out / "feeder.dss", to_opendss(net));
  if (cfg.output.geojson) write_file(r, out / "feeder.geojson", to_geojson(feeder, net));
  if (cfg.output.overlay_svg) write_file(r, out / "overlay.svg", render_overlay_svg(street, feeder));
  if (cfg.output.voltage_profile_svg) {
    std::vector<std::pair<std::string, PowerFlowResult>> results;
    for (const auto& o : outcomes) results.emplace_back(o.scenario.name, o.result);
    write_file(r, out / "voltage_profile.svg", render_voltage_profile_svg(results, cfg.v_min));
  }
  if (cfg.output.summary) {
    json scenarios = json::object();
    for (const auto& o : outcomes) scenarios[o.scenario.name] = {{"factor", o.scenario.factor}, {"report", to_json(o.report)}};
    write_json(r, out / "summary.json", {{"structure", to_json(summary)}, {"scenarios", scenarios}});
    write_file(r, out / "summary.txt", to_text_table(summary));
  }
  table << to_text_table(summary);
  return r;
}

// ---------------------------------------------------------------------------

ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NonConvergenceError*>(&e)) return ExitCode::nonconvergence;
  if (dynamic_cast<const ConfigError*>(&e)) return ExitCode::config;
  if (dynamic_cast<const DataError*>(&e)) return ExitCode::data;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return ExitCode::data;
  return ExitCode::internal;
}

ExitCode run_pipeline(const PipelineConfig& cfg, const fs::path& out, std::ostream& table, std::ostream& log,
                      bool verbose) {
  std::vector<fs::path> written;
  json stages = json::array();
  bool timed_out = false;
  std::string current = "ingest";
  auto timed = [&](const char* name, auto&& fn) {
    current = name;
    const auto t0 = std::chrono::steady_clock::now();
    StageResult r = fn();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    written.insert(written.end(), r.written.begin(), r.written.end());
    timed_out = timed_out || r.timed_out;
    stages.push_back({{"stage", name}, {"seconds", secs}});
    if (verbose) log << "[" << name << "] " << secs << " s\n";
  };
  try {
    timed("ingest", [&] { return stage_ingest(cfg, out); });
    timed("synth", [&] { return stage_synth(out, out); });
    timed("electrify", [&] { return stage_electrify(out, out); });
    timed("pf", [&] { return stage_pf(out, out); });
    timed("report", [&] { return stage_report(out, out, table); });
  } catch (const std::exception& e) {
    log << "error in stage " << current << ": " << e.what() << "\n";
    for (const auto& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    return exit_code_for(e);
  }
  const ExitCode code = timed_out ? ExitCode::timeout : ExitCode::ok;
  if (timed_out) log << "warning: exact solver hit its time limit; artifacts hold the best incumbent\n";
  const json manifest{{"tool_version", kToolVersion},
                      {"config_digest", sha256_hex(to_json(cfg).dump())},
                      {"stages", stages},
                      {"exit_code", static_cast<int>(code)}};
  std::ofstream(out / "run_manifest.json", std::ios::binary | std::ios::trunc) << manifest.dump(2) << "\n";
  return code;
}

}  // namespace feedforge
