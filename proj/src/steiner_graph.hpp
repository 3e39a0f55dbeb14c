#pragma once

// Internal graph machinery shared by the heuristic and the branch-and-bound solver.

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "feedforge/synth.hpp"

namespace feedforge::detail {

/// Sorted list of edge indices.
using EdgeSet = std::vector<std::size_t>;

struct WeightedGraph {
  struct Edge {
    std::size_t u;
    std::size_t v;
    double cost;
  };

  std::size_t n = 0;
  std::vector<Edge> edges;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj;  // (neighbour, edge)

  static WeightedGraph from_problem(const SynthesisProblem& problem);
  std::size_t other(std::size_t e, std::size_t from) const {
    return edges[e].u == from ? edges[e].v : edges[e].u;
  }
};

/// Optional restriction of a graph to live nodes and edges.
struct Mask {
  const std::vector<char>* node_alive = nullptr;
  const std::vector<char>* edge_alive = nullptr;

  bool node(std::size_t v) const { return node_alive == nullptr || (*node_alive)[v] != 0; }
  bool edge(std::size_t e) const { return edge_alive == nullptr || (*edge_alive)[e] != 0; }
};

double cost_of(const WeightedGraph& g, const EdgeSet& edges);

/// Strict ordering of equal-length or prefix-related sorted edge lists.
bool lex_less(const EdgeSet& a, const EdgeSet& b);

/// Grows a tree from `root`, attaching the nearest unreached terminal by a shortest path.
std::optional<EdgeSet> path_join(const WeightedGraph& g, std::size_t root,
                                 const std::vector<std::size_t>& terminals, Mask mask = {});

/// Kruskal over the subgraph induced by `nodes` with (cost, index) order.
EdgeSet induced_mst(const WeightedGraph& g, const std::vector<char>& nodes, Mask mask = {});

/// Repeatedly strips leaves that are not terminals.
EdgeSet prune_leaves(const WeightedGraph& g, EdgeSet edges, const std::vector<char>& is_terminal);

/// Alternates induced MST and leaf pruning until the cost stops decreasing.
EdgeSet polish(const WeightedGraph& g, EdgeSet edges, const std::vector<char>& is_terminal,
               std::size_t root);

/// Replaces key paths by cheaper reconnections while the tree stays radial.
EdgeSet key_path_exchange(const WeightedGraph& g, EdgeSet edges, const std::vector<char>& is_terminal,
                          std::size_t root);

struct DualAscent {
  bool feasible = true;
  double lower_bound = 0.0;
  std::vector<double> reduced;  // per arc: 2e is u->v, 2e+1 is v->u
};

/// Wong's dual ascent on the bidirected graph rooted at `root`. The bound is valid for
/// every tree that connects `terminals` to `root` inside the mask.
DualAscent dual_ascent(const WeightedGraph& g, std::size_t root, const std::vector<std::size_t>& terminals,
                       Mask mask = {});

/// Nodes touched by `edges`, plus `root`.
std::vector<char> nodes_of(const WeightedGraph& g, const EdgeSet& edges, std::size_t root);

}  // namespace feedforge::detail
