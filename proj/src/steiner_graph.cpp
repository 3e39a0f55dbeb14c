#include "steiner_graph.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>

namespace feedforge::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using QueueItem = std::pair<double, std::size_t>;
using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

}  // namespace

WeightedGraph WeightedGraph::from_problem(const SynthesisProblem& problem) {
  WeightedGraph g;
  const auto& cg = problem.graph;
  g.n = cg.nodes.size();
  g.adj.resize(g.n);
  const auto costs = edge_costs(problem);
  g.edges.reserve(cg.edges.size());
  for (std::size_t e = 0; e < cg.edges.size(); ++e) {
    const std::size_t u = cg.index_of(cg.edges[e].u);
    const std::size_t v = cg.index_of(cg.edges[e].v);
    g.edges.push_back({u, v, costs[e]});
    if (u == v) continue;
    g.adj[u].emplace_back(v, e);
    g.adj[v].emplace_back(u, e);
  }
  return g;
}

double cost_of(const WeightedGraph& g, const EdgeSet& edges) {
  double total = 0.0;
  for (std::size_t e : edges) total += g.edges[e].cost;
  return total;
}

bool lex_less(const EdgeSet& a, const EdgeSet& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::vector<char> nodes_of(const WeightedGraph& g, const EdgeSet& edges, std::size_t root) {
  std::vector<char> in(g.n, 0);
  in[root] = 1;
  for (std::size_t e : edges) {
    in[g.edges[e].u] = 1;
    in[g.edges[e].v] = 1;
  }
  return in;
}

std::optional<EdgeSet> path_join(const WeightedGraph& g, std::size_t root,
                                 const std::vector<std::size_t>& terminals, Mask mask) {
  std::vector<char> in_tree(g.n, 0);
  in_tree[root] = 1;
  EdgeSet tree;
  std::vector<std::size_t> pending;
  for (std::size_t t : terminals)
    if (!in_tree[t]) pending.push_back(t);
  std::sort(pending.begin(), pending.end());
  pending.erase(std::unique(pending.begin(), pending.end()), pending.end());

  std::vector<double> dist(g.n);
  std::vector<std::size_t> pred(g.n);
  while (!pending.empty()) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(pred.begin(), pred.end(), SIZE_MAX);
    MinQueue q;
    for (std::size_t v = 0; v < g.n; ++v) {
      if (in_tree[v]) {
        dist[v] = 0.0;
        q.emplace(0.0, v);
      }
    }
    while (!q.empty()) {
      auto [d, v] = q.top();
      q.pop();
      if (d > dist[v]) continue;
      for (auto [w, e] : g.adj[v]) {
        if (!mask.edge(e) || !mask.node(w)) continue;
        const double nd = d + g.edges[e].cost;
        if (nd < dist[w]) {
          dist[w] = nd;
          pred[w] = e;
          q.emplace(nd, w);
        }
      }
    }
    std::size_t best = pending.front();
    for (std::size_t t : pending)
      if (dist[t] < dist[best]) best = t;
    if (dist[best] == kInf) return std::nullopt;
    for (std::size_t v = best; !in_tree[v];) {
      in_tree[v] = 1;
      const std::size_t e = pred[v];
      tree.push_back(e);
      v = g.other(e, v);
    }
    std::erase_if(pending, [&](std::size_t t) { return in_tree[t] != 0; });
  }
  std::sort(tree.begin(), tree.end());
  return tree;
}

EdgeSet induced_mst(const WeightedGraph& g, const std::vector<char>& nodes, Mask mask) {
  std::vector<std::size_t> order;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& ed = g.edges[e];
    if (ed.u != ed.v && nodes[ed.u] && nodes[ed.v] && mask.edge(e)) order.push_back(e);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return g.edges[a].cost < g.edges[b].cost; });
  std::vector<std::size_t> parent(g.n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  EdgeSet out;
  for (std::size_t e : order) {
    const std::size_t a = find(g.edges[e].u), b = find(g.edges[e].v);
    if (a == b) continue;
    parent[a] = b;
    out.push_back(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

EdgeSet prune_leaves(const WeightedGraph& g, EdgeSet edges, const std::vector<char>& is_terminal) {
  std::vector<std::size_t> degree(g.n, 0);
  for (std::size_t e : edges) {
    ++degree[g.edges[e].u];
    ++degree[g.edges[e].v];
  }
  std::vector<char> alive(g.edges.size(), 0);
  for (std::size_t e : edges) alive[e] = 1;
  std::vector<std::size_t> leaves;
  for (std::size_t v = 0; v < g.n; ++v)
    if (degree[v] == 1 && !is_terminal[v]) leaves.push_back(v);
  while (!leaves.empty()) {
    const std::size_t v = leaves.back();
    leaves.pop_back();
    if (degree[v] != 1) continue;
    for (auto [w, e] : g.adj[v]) {
      if (!alive[e]) continue;
      alive[e] = 0;
      --degree[v];
      if (--degree[w] == 1 && !is_terminal[w]) leaves.push_back(w);
      break;
    }
  }
  std::erase_if(edges, [&](std::size_t e) { return !alive[e]; });
  return edges;
}

EdgeSet polish(const WeightedGraph& g, EdgeSet edges, const std::vector<char>& is_terminal, std::size_t root) {
  double cost = cost_of(g, edges);
  while (true) {
    EdgeSet next = prune_leaves(g, induced_mst(g, nodes_of(g, edges, root)), is_terminal);
    const double next_cost = cost_of(g, next);
    if (!(next_cost < cost) && !(next_cost == cost && next != edges && lex_less(next, edges))) return edges;
    edges = std::move(next);
    cost = next_cost;
  }
}

EdgeSet key_path_exchange(const WeightedGraph& g, EdgeSet edges, const std::vector<char>& is_terminal,
                          std::size_t root) {
  std::vector<double> dist(g.n);
  std::vector<std::size_t> pred(g.n);
  bool improved = true;
  while (improved) {
    improved = false;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> tadj(g.n);
    std::vector<char> in_tree = nodes_of(g, edges, root);
    for (std::size_t e : edges) {
      tadj[g.edges[e].u].emplace_back(g.edges[e].v, e);
      tadj[g.edges[e].v].emplace_back(g.edges[e].u, e);
    }
    auto is_key = [&](std::size_t v) { return is_terminal[v] || v == root || tadj[v].size() >= 3; };

    // Key paths: maximal tree paths whose interior nodes are non-key.
    std::vector<EdgeSet> paths;
    std::vector<char> seen(g.edges.size(), 0);
    for (std::size_t a = 0; a < g.n; ++a) {
      if (!in_tree[a] || !is_key(a)) continue;
      for (auto [w0, e0] : tadj[a]) {
        if (seen[e0]) continue;
        EdgeSet path{e0};
        seen[e0] = 1;
        std::size_t prev_e = e0, at = w0;
        while (!is_key(at)) {
          const auto& nb = tadj[at];
          const auto next = nb[0].second == prev_e ? nb[1] : nb[0];
          seen[next.second] = 1;
          path.push_back(next.second);
          prev_e = next.second;
          at = next.first;
        }
        std::sort(path.begin(), path.end());
        paths.push_back(std::move(path));
      }
    }

    const double current = cost_of(g, edges);
    for (const auto& path : paths) {
      const double path_cost = cost_of(g, path);
      EdgeSet rest;
      std::set_difference(edges.begin(), edges.end(), path.begin(), path.end(), std::back_inserter(rest));
      // Side containing the root.
      std::vector<char> side(g.n, 0);  // 1 = root side, 2 = other side
      std::vector<std::vector<std::size_t>> radj(g.n);
      for (std::size_t e : rest) {
        radj[g.edges[e].u].push_back(g.edges[e].v);
        radj[g.edges[e].v].push_back(g.edges[e].u);
      }
      std::vector<std::size_t> stack{root};
      side[root] = 1;
      while (!stack.empty()) {
        const std::size_t v = stack.back();
        stack.pop_back();
        for (std::size_t w : radj[v])
          if (!side[w]) {
            side[w] = 1;
            stack.push_back(w);
          }
      }
      // Anything still in the tree, reachable from a non-root key node, is the far side.
      std::vector<char> rest_nodes = nodes_of(g, rest, root);
      bool far_nonempty = false;
      for (std::size_t v = 0; v < g.n; ++v)
        if (rest_nodes[v] && !side[v]) {
          side[v] = 2;
          far_nonempty = true;
        }
      // A key path ending at an isolated key node leaves that node alone on the far side.
      for (std::size_t e : path)
        for (std::size_t v : {g.edges[e].u, g.edges[e].v})
          if (is_key(v) && !side[v]) {
            side[v] = 2;
            far_nonempty = true;
          }
      if (!far_nonempty) continue;

      std::fill(dist.begin(), dist.end(), kInf);
      std::fill(pred.begin(), pred.end(), SIZE_MAX);
      MinQueue q;
      for (std::size_t v = 0; v < g.n; ++v)
        if (side[v] == 1) {
          dist[v] = 0.0;
          q.emplace(0.0, v);
        }
      std::size_t hit = SIZE_MAX;
      while (!q.empty()) {
        auto [d, v] = q.top();
        q.pop();
        if (d > dist[v]) continue;
        if (side[v] == 2) {
          hit = v;
          break;
        }
        for (auto [w, e] : g.adj[v]) {
          if (side[w] == 1) continue;
          const double nd = d + g.edges[e].cost;
          if (nd < dist[w]) {
            dist[w] = nd;
            pred[w] = e;
            q.emplace(nd, w);
          }
        }
      }
      if (hit == SIZE_MAX) continue;
      if (!(dist[hit] < path_cost - 1e-12 * std::max(1.0, path_cost))) continue;
      EdgeSet candidate = rest;
      for (std::size_t v = hit; side[v] != 1;) {
        const std::size_t e = pred[v];
        candidate.push_back(e);
        v = g.other(e, v);
      }
      std::sort(candidate.begin(), candidate.end());
      candidate.erase(std::unique(candidate.begin(), candidate.end()), candidate.end());
      candidate = polish(g, std::move(candidate), is_terminal, root);
      if (cost_of(g, candidate) < current) {
        edges = std::move(candidate);
        improved = true;
        break;
      }
    }
  }
  return edges;
}

}  // namespace feedforge::detail
