#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "feedforge/pipeline.hpp"

namespace feedforge {

using json = nlohmann::json;
namespace fs = std::filesystem;

void PipelineConfig::validate() const {
  if (input_path.empty()) throw ConfigError("input.path is required");
  if (input_format != "osm-xml" && input_format != "geojson")
    throw ConfigError("input.format must be osm-xml or geojson, not '" + input_format + "'");
  if (!(snap_tolerance_m >= 0.0)) throw ConfigError("input.snap_tolerance_m must be non-negative");
  if (households_total && *households_total < 0) throw ConfigError("input.households_total must be non-negative");
  scoring.validate();
  if (source.node && source.near) throw ConfigError("synthesis.source takes either node or near, not both");
  if (required.top_k_activity > 0 && !activity_path)
    throw ConfigError("synthesis.required.top_k_activity needs an input.activity layer");
  if (!(alpha.geo >= 0.0) || !(alpha.top >= 0.0) || !(alpha.elec >= 0.0))
    throw ConfigError("synthesis.alpha weights must be non-negative");
  if (alpha.geo == 0.0 && alpha.top == 0.0 && alpha.elec == 0.0)
    throw ConfigError("synthesis.alpha weights must not all be zero");
  if (!(timeout_s >= 0.0)) throw ConfigError("synthesis.timeout_s must be non-negative");
  for (const auto& [name, t] : templates) t.validate();
  loads.validate();
  if (!(base_kv > 0.0) || !(base_mva > 0.0) || !(slack_v_pu > 0.0))
    throw ConfigError("electrify bases and slack voltage must be positive");
  if (!(powerflow.tol > 0.0) || powerflow.max_iter < 1) throw ConfigError("powerflow.tol must be > 0 and max_iter >= 1");
  if (!(v_min > 0.0)) throw ConfigError("powerflow.v_min must be positive");
  for (const auto& s : scenarios)
    if (!(s.factor >= 0.0) || !std::isfinite(s.factor)) throw ConfigError("scenario factor for " + s.name + " must be >= 0");
}

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& what) {
  const auto mark = node.Mark();
  if (mark.line >= 0) throw ConfigError(what + " (line " + std::to_string(mark.line + 1) + ")");
  throw ConfigError(what);
}

void only_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node) return;
  if (!node.IsMap()) fail(node, where + " must be a mapping");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const YAML::Node& parent, const char* key, T& out, const std::string& where) {
  const auto node = parent[key];
  if (!node) return;
  try {
    out = node.as<T>();
  } catch (const YAML::BadConversion&) {
    fail(node, where + "." + key + " has the wrong type");
  }
}

Coordinate coordinate(const YAML::Node& node, const std::string& where) {
  if (!node.IsSequence() || node.size() != 2) fail(node, where + " must be [lon, lat]");
  try {
    return {node[0].as<double>(), node[1].as<double>()};
  } catch (const YAML::BadConversion&) {
    fail(node, where + " must hold two numbers");
  }
}

}  // namespace

PipelineConfig config_from_yaml(std::string_view text, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config must be a mapping");
  only_keys(root, "config", {"seed", "input", "scoring", "synthesis", "electrify", "powerflow", "output"});

  PipelineConfig cfg;
  read(root, "seed", cfg.seed, "config");

  const auto input = root["input"];
  if (!input) throw ConfigError("config needs an input section");
  only_keys(input, "input", {"path", "format", "activity", "households_total", "snap_tolerance_m"});
  std::string path;
  read(input, "path", path, "input");
  if (path.empty()) throw ConfigError("input.path is required");
  cfg.input_path = fs::weakly_canonical(base_dir / path);
  read(input, "format", cfg.input_format, "input");
  if (input["activity"]) {
    std::string activity;
    read(input, "activity", activity, "input");
    cfg.activity_path = fs::weakly_canonical(base_dir / activity);
  }
  if (input["households_total"]) {
    std::int64_t h = 0;
    read(input, "households_total", h, "input");
    cfg.households_total = h;
  }
  read(input, "snap_tolerance_m", cfg.snap_tolerance_m, "input");

  if (const auto scoring = root["scoring"]) {
    only_keys(scoring, "scoring", {"lambda_d", "lambda_c", "lambda_b", "penalties", "excluded"});
    read(scoring, "lambda_d", cfg.scoring.distance, "scoring");
    read(scoring, "lambda_c", cfg.scoring.road_class, "scoring");
    read(scoring, "lambda_b", cfg.scoring.bend, "scoring");
    if (const auto pen = scoring["penalties"]) {
      if (!pen.IsMap()) fail(pen, "scoring.penalties must be a mapping");
      for (const auto& kv : pen) {
        try {
          cfg.classes.penalties[kv.first.as<std::string>()] = kv.second.as<double>();
        } catch (const YAML::BadConversion&) {
          fail(kv.second, "scoring.penalties values must be numbers");
        }
      }
    }
    if (const auto ex = scoring["excluded"]) {
      std::vector<std::string> list;
      read(scoring, "excluded", list, "scoring");
      cfg.classes.excluded = {list.begin(), list.end()};
    }
  }

  if (const auto syn = root["synthesis"]) {
    only_keys(syn, "synthesis", {"source", "required", "alpha", "solver", "timeout_s"});
    if (const auto src = syn["source"]) {
      only_keys(src, "synthesis.source", {"node", "near"});
      if (src["node"]) {
        NodeId id = 0;
        read(src, "node", id, "synthesis.source");
        cfg.source.node = id;
      }
      if (src["near"]) cfg.source.near = coordinate(src["near"], "synthesis.source.near");
    }
    if (const auto req = syn["required"]) {
      only_keys(req, "synthesis.required", {"ids", "near", "top_k_activity"});
      read(req, "ids", cfg.required.ids, "synthesis.required");
      if (const auto near = req["near"]) {
        if (!near.IsSequence()) fail(near, "synthesis.required.near must be a list of [lon, lat]");
        for (const auto& c : near) cfg.required.near.push_back(coordinate(c, "synthesis.required.near"));
      }
      read(req, "top_k_activity", cfg.required.top_k_activity, "synthesis.required");
    }
    if (const auto alpha = syn["alpha"]) {
      only_keys(alpha, "synthesis.alpha", {"geo", "top", "elec"});
      read(alpha, "geo", cfg.alpha.geo, "synthesis.alpha");
      read(alpha, "top", cfg.alpha.top, "synthesis.alpha");
      read(alpha, "elec", cfg.alpha.elec, "synthesis.alpha");
    }
    std::string solver = "exact";
    read(syn, "solver", solver, "synthesis");
    if (solver == "exact") cfg.solver = SolverKind::exact;
    else if (solver == "heuristic") cfg.solver = SolverKind::heuristic;
    else fail(syn["solver"], "synthesis.solver must be exact or heuristic");
    read(syn, "timeout_s", cfg.timeout_s, "synthesis");
  }

  if (const auto el = root["electrify"]) {
    only_keys(el, "electrify", {"templates", "eta", "beta", "epsilon", "total_p_mw", "power_factor", "node_power_factor",
                                "centroids", "activity_radius_m", "base_kv", "base_mva", "slack_v_pu"});
    if (const auto tpl = el["templates"]) {
      if (!tpl.IsMap()) fail(tpl, "electrify.templates must be a mapping");
      for (const auto& kv : tpl) {
        const auto name = kv.first.as<std::string>();
        only_keys(kv.second, "electrify.templates." + name, {"r_per_km", "x_per_km", "rating_mva"});
        LineTemplate t = cfg.templates.count(name) ? cfg.templates[name] : LineTemplate{name, 0.0, 0.0, 0.0};
        read(kv.second, "r_per_km", t.r_per_km, "electrify.templates." + name);
        read(kv.second, "x_per_km", t.x_per_km, "electrify.templates." + name);
        read(kv.second, "rating_mva", t.rating_mva, "electrify.templates." + name);
        cfg.templates[name] = t;
      }
    }
    read(el, "eta", cfg.loads.eta, "electrify");
    read(el, "beta", cfg.loads.beta, "electrify");
    read(el, "epsilon", cfg.loads.epsilon, "electrify");
    read(el, "total_p_mw", cfg.loads.total_p_mw, "electrify");
    read(el, "power_factor", cfg.loads.power_factor, "electrify");
    read(el, "node_power_factor", cfg.loads.node_power_factor, "electrify");
    if (const auto cs = el["centroids"]) {
      if (!cs.IsSequence()) fail(cs, "electrify.centroids must be a list of [lon, lat]");
      for (const auto& c : cs) {
        const auto xy = coordinate(c, "electrify.centroids");
        cfg.loads.centroids.push_back({xy.lon, xy.lat, std::nullopt});
      }
    }
    read(el, "activity_radius_m", cfg.loads.activity_radius_m, "electrify");
    read(el, "base_kv", cfg.base_kv, "electrify");
    read(el, "base_mva", cfg.base_mva, "electrify");
    read(el, "slack_v_pu", cfg.slack_v_pu, "electrify");
  }

  if (const auto pf = root["powerflow"]) {
    only_keys(pf, "powerflow", {"tol", "max_iter", "v_min", "scenarios"});
    read(pf, "tol", cfg.powerflow.tol, "powerflow");
    read(pf, "max_iter", cfg.powerflow.max_iter, "powerflow");
    read(pf, "v_min", cfg.v_min, "powerflow");
    if (const auto sc = pf["scenarios"]) {
      only_keys(sc, "powerflow.scenarios", {"sanity", "representative", "stressed"});
      for (auto& s : cfg.scenarios) read(sc, s.name.c_str(), s.factor, "powerflow.scenarios");
    }
  }

  if (const auto out = root["output"]) {
    only_keys(out, "output", {"network_json", "opendss", "geojson", "overlay_svg", "voltage_profile_svg", "summary"});
    read(out, "network_json", cfg.output.network_json, "output");
    read(out, "opendss", cfg.output.opendss, "output");
    read(out, "geojson", cfg.output.geojson, "output");
    read(out, "overlay_svg", cfg.output.overlay_svg, "output");
    read(out, "voltage_profile_svg", cfg.output.voltage_profile_svg, "output");
    read(out, "summary", cfg.output.summary, "output");
  }

  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_yaml(ss.str(), fs::absolute(file).parent_path());
}

// ---------------------------------------------------------------------------

namespace {

json coord_json(const Coordinate& c) { return json::array({c.lon, c.lat}); }
Coordinate coord_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

json to_json(const PipelineConfig& c) {
  json templates = json::object();
  for (const auto& [name, t] : c.templates)
    templates[name] = {{"r_per_km", t.r_per_km}, {"x_per_km", t.x_per_km}, {"rating_mva", t.rating_mva}};
  json centroids = json::array();
  for (const auto& p : c.loads.centroids) centroids.push_back({p.lon, p.lat});
  json node_pf = json::object();
  for (const auto& [bus, pf] : c.loads.node_power_factor) node_pf[std::to_string(bus)] = pf;
  json scenarios = json::array();
  for (const auto& s : c.scenarios) scenarios.push_back({{"name", s.name}, {"factor", s.factor}});
  json near = json::array();
  for (const auto& p : c.required.near) near.push_back(coord_json(p));

  return {
      {"seed", c.seed},
      {"input",
       {{"path", c.input_path.string()},
        {"format", c.input_format},
        {"activity", c.activity_path ? json(c.activity_path->string()) : json(nullptr)},
        {"households_total", c.households_total ? json(*c.households_total) : json(nullptr)},
        {"snap_tolerance_m", c.snap_tolerance_m}}},
      {"scoring",
       {{"lambda_d", c.scoring.distance},
        {"lambda_c", c.scoring.road_class},
        {"lambda_b", c.scoring.bend},
        {"penalties", c.classes.penalties},
        {"excluded", c.classes.excluded}}},
      {"synthesis",
       {{"source",
         {{"node", c.source.node ? json(*c.source.node) : json(nullptr)},
          {"near", c.source.near ? coord_json(*c.source.near) : json(nullptr)}}},
        {"required", {{"ids", c.required.ids}, {"near", near}, {"top_k_activity", c.required.top_k_activity}}},
        {"alpha", {{"geo", c.alpha.geo}, {"top", c.alpha.top}, {"elec", c.alpha.elec}}},
        {"solver", c.solver == SolverKind::exact ? "exact" : "heuristic"},
        {"timeout_s", c.timeout_s}}},
      {"electrify",
       {{"templates", templates},
        {"eta", c.loads.eta},
        {"beta", c.loads.beta},
        {"epsilon", c.loads.epsilon},
        {"total_p_mw", c.loads.total_p_mw},
        {"power_factor", c.loads.power_factor},
        {"node_power_factor", node_pf},
        {"centroids", centroids},
        {"activity_radius_m", c.loads.activity_radius_m},
        {"base_kv", c.base_kv},
        {"base_mva", c.base_mva},
        {"slack_v_pu", c.slack_v_pu}}},
      {"powerflow",
       {{"tol", c.powerflow.tol}, {"max_iter", c.powerflow.max_iter}, {"v_min", c.v_min}, {"scenarios", scenarios}}},
      {"output",
       {{"network_json", c.output.network_json},
        {"opendss", c.output.opendss},
        {"geojson", c.output.geojson},
        {"overlay_svg", c.output.overlay_svg},
        {"voltage_profile_svg", c.output.voltage_profile_svg},
        {"summary", c.output.summary}}},
  };
}

PipelineConfig pipeline_config_from_json(const json& j) {
  try {
    PipelineConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& in = j.at("input");
    c.input_path = in.at("path").get<std::string>();
    c.input_format = in.at("format").get<std::string>();
    if (!in.at("activity").is_null()) c.activity_path = in.at("activity").get<std::string>();
    if (!in.at("households_total").is_null()) c.households_total = in.at("households_total").get<std::int64_t>();
    c.snap_tolerance_m = in.at("snap_tolerance_m").get<double>();

    const auto& sc = j.at("scoring");
    c.scoring = {sc.at("lambda_d").get<double>(), sc.at("lambda_c").get<double>(), sc.at("lambda_b").get<double>()};
    c.classes.penalties = sc.at("penalties").get<std::map<std::string, double>>();
    c.classes.excluded = sc.at("excluded").get<std::set<std::string>>();

    const auto& syn = j.at("synthesis");
    if (!syn.at("source").at("node").is_null()) c.source.node = syn.at("source").at("node").get<NodeId>();
    if (!syn.at("source").at("near").is_null()) c.source.near = coord_from(syn.at("source").at("near"));
    c.required.ids = syn.at("required").at("ids").get<std::vector<NodeId>>();
    for (const auto& p : syn.at("required").at("near")) c.required.near.push_back(coord_from(p));
    c.required.top_k_activity = syn.at("required").at("top_k_activity").get<std::size_t>();
    const auto& a = syn.at("alpha");
    c.alpha = {a.at("geo").get<double>(), a.at("top").get<double>(), a.at("elec").get<double>()};
    c.solver = syn.at("solver").get<std::string>() == "exact" ? SolverKind::exact : SolverKind::heuristic;
    c.timeout_s = syn.at("timeout_s").get<double>();

    const auto& el = j.at("electrify");
    c.templates.clear();
    for (const auto& [name, t] : el.at("templates").items())
      c.templates[name] = {name, t.at("r_per_km").get<double>(), t.at("x_per_km").get<double>(), t.at("rating_mva").get<double>()};
    c.loads.eta = el.at("eta").get<double>();
    c.loads.beta = el.at("beta").get<double>();
    c.loads.epsilon = el.at("epsilon").get<double>();
    c.loads.total_p_mw = el.at("total_p_mw").get<double>();
    c.loads.power_factor = el.at("power_factor").get<double>();
    for (const auto& [bus, pf] : el.at("node_power_factor").items()) c.loads.node_power_factor[std::stoll(bus)] = pf.get<double>();
    for (const auto& p : el.at("centroids")) c.loads.centroids.push_back({p.at(0).get<double>(), p.at(1).get<double>(), std::nullopt});
    c.loads.activity_radius_m = el.at("activity_radius_m").get<double>();
    c.base_kv = el.at("base_kv").get<double>();
    c.base_mva = el.at("base_mva").get<double>();
    c.slack_v_pu = el.at("slack_v_pu").get<double>();

    const auto& pf = j.at("powerflow");
    c.powerflow = {pf.at("tol").get<double>(), pf.at("max_iter").get<int>()};
    c.v_min = pf.at("v_min").get<double>();
    c.scenarios.clear();
    for (const auto& s : pf.at("scenarios")) c.scenarios.push_back({s.at("name").get<std::string>(), s.at("factor").get<double>()});

    const auto& o = j.at("output");
    c.output = {o.at("network_json").get<bool>(), o.at("opendss").get<bool>(), o.at("geojson").get<bool>(),
                o.at("overlay_svg").get<bool>(), o.at("voltage_profile_svg").get<bool>(), o.at("summary").get<bool>()};
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed resolved config: ") + e.what());
  }
}

}  // namespace feedforge
