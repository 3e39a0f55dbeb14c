#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "feedforge/geograph.hpp"

namespace feedforge {

/// Trade-off weights of the synthesis objective.
struct AlphaWeights {
  double geo = 1.0;
  double top = 0.5;
  double elec = 0.005;  // per meter
};

/// One instance of the radial feeder synthesis problem over a scored candidate graph.
struct SynthesisProblem {
  CandidateGraph graph;
  NodeId source = 0;
  std::set<NodeId> required;
  AlphaWeights alpha;
  double big_m = 0.0;  // flow capacity constant, |N| - 1 by default

  /// Builds a problem with the default flow capacity constant.
  static SynthesisProblem make(CandidateGraph graph, NodeId source, std::set<NodeId> required,
                               AlphaWeights alpha = {});

  /// Throws ConfigError/DataError on an ill-posed instance.
  void validate() const;

  /// Source plus required nodes, as node indices in ascending order.
  std::vector<std::size_t> terminal_indices() const;
};

/// Edge cost alpha_geo*c_geo + alpha_top + alpha_elec*d, with c_geo the composite edge score.
double edge_cost(const SynthesisProblem& problem, const CandidateEdge& edge);
std::vector<double> edge_costs(const SynthesisProblem& problem);

/// Assignment of the synthesis variables. Indices follow the candidate graph:
/// y per node, z per edge, flow per arc where arc 2e runs u->v and arc 2e+1 runs v->u.
struct SynthesisSolution {
  std::vector<std::uint8_t> y;
  std::vector<std::uint8_t> z;
  std::vector<double> flow;
  double objective = 0.0;
  bool proven_optimal = false;
  double gap = 0.0;

  /// Indices of edges with z = 1, ascending.
  std::vector<std::size_t> selected_edges() const;
};

/// Sum of edge costs over `edges`, accumulated in ascending edge order.
double objective_of(const SynthesisProblem& problem, const std::vector<std::size_t>& edges);

/// Completes y, z and flows for a tree given by its edge indices.
SynthesisSolution solution_from_tree(const SynthesisProblem& problem, std::vector<std::size_t> edges);

struct ExactOptions {
  double time_limit_s = 120.0;
};

/// Provably optimal solution by branch and bound; falls back to the incumbent on timeout.
SynthesisSolution solve_exact(const SynthesisProblem& problem, const ExactOptions& options = {});

/// Path-joining construction followed by local search; always feasible, not proven optimal.
SynthesisSolution solve_heuristic(const SynthesisProblem& problem);

/// Dreyfus-Wagner dynamic program over terminal subsets (at most 12 terminals).
SynthesisSolution steiner_oracle(const SynthesisProblem& problem);

constexpr std::size_t kOracleMaxTerminals = 12;

struct Violation {
  std::string constraint;  // "coupling", "required", "cardinality", "flow_balance", "capacity", ...
  std::string detail;
};

struct VerificationReport {
  std::vector<Violation> violations;
  double recomputed_objective = 0.0;

  bool ok() const noexcept { return violations.empty(); }
};

/// Checks every constraint of the formulation independently and recomputes the objective.
VerificationReport verify_solution(const SynthesisProblem& problem, const SynthesisSolution& solution);

struct FeederNode {
  NodeId id = 0;
  GeoPoint point;
  std::optional<NodeId> parent;
  int depth = 0;

  friend bool operator==(const FeederNode&, const FeederNode&) = default;
};

struct FeederEdge {
  NodeId parent = 0;
  NodeId child = 0;
  std::size_t candidate_edge = 0;
  double length_m = 0.0;
  std::string road_class;
  Polyline geometry;  // oriented parent -> child

  friend bool operator==(const FeederEdge&, const FeederEdge&) = default;
};

/// Selected radial tree rooted at the source. Nodes sorted by id, edges by candidate edge.
struct FeederGraph {
  std::vector<FeederNode> nodes;
  std::vector<FeederEdge> edges;
  NodeId root = 0;
  std::optional<LocalFrame> frame;

  const FeederNode& node(NodeId id) const;
  std::optional<std::size_t> find(NodeId id) const;
  /// Number of tree edges incident to `id`.
  std::size_t degree(NodeId id) const;

  friend bool operator==(const FeederGraph&, const FeederGraph&) = default;
};

/// Extracts the feeder tree; throws ValidationError if the solution fails verification.
FeederGraph to_feeder_graph(const SynthesisProblem& problem, const SynthesisSolution& solution);

nlohmann::json to_json(const SynthesisProblem& problem);
SynthesisProblem synthesis_problem_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthesisProblem& problem, const SynthesisSolution& solution);
SynthesisSolution synthesis_solution_from_json(const SynthesisProblem& problem, const nlohmann::json& j);
nlohmann::json to_json(const FeederGraph& feeder);
FeederGraph feeder_graph_from_json(const nlohmann::json& j);

}  // namespace feedforge
