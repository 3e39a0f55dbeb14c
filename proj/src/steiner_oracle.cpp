// Dreyfus-Wagner reference solver. Shares no code with the branch-and-bound path on purpose.

#include <algorithm>
#include <bit>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>

#include "feedforge/error.hpp"
#include "feedforge/synth.hpp"

namespace feedforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Back {
  enum Kind : std::uint8_t { kNone, kSeed, kSplit, kStep } kind = kNone;
  std::uint32_t sub = 0;   // split: one half of the subset
  std::size_t edge = 0;    // step: edge arriving at this node
  std::size_t from = 0;    // step: node it came from
};

}  // namespace

SynthesisSolution steiner_oracle(const SynthesisProblem& problem) {
  problem.validate();
  const auto& cg = problem.graph;
  const std::size_t n = cg.nodes.size();
  const std::size_t root = cg.index_of(problem.source);

  std::vector<std::size_t> others;
  for (NodeId r : problem.required) {
    const std::size_t i = cg.index_of(r);
    if (i != root) others.push_back(i);
  }
  std::sort(others.begin(), others.end());
  others.erase(std::unique(others.begin(), others.end()), others.end());
  if (others.size() + 1 > kOracleMaxTerminals)
    throw ConfigError("reference solver handles at most " + std::to_string(kOracleMaxTerminals) + " terminals");
  if (others.empty()) {
    SynthesisSolution s = solution_from_tree(problem, {});
    s.proven_optimal = true;
    return s;
  }

  std::vector<double> cost(cg.edges.size());
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
  for (std::size_t e = 0; e < cg.edges.size(); ++e) {
    cost[e] = edge_cost(problem, cg.edges[e]);
    const std::size_t u = cg.index_of(cg.edges[e].u), v = cg.index_of(cg.edges[e].v);
    if (u == v) continue;
    adj[u].emplace_back(v, e);
    adj[v].emplace_back(u, e);
  }

  const std::size_t k = others.size();
  const std::uint32_t full = (std::uint32_t{1} << k) - 1;
  std::vector<std::vector<double>> dp(full + 1, std::vector<double>(n, kInf));
  std::vector<std::vector<Back>> back(full + 1, std::vector<Back>(n));

  using Item = std::pair<double, std::size_t>;
  for (std::uint32_t set = 1; set <= full; ++set) {
    auto& d = dp[set];
    auto& b = back[set];
    if (std::popcount(set) == 1) {
      const std::size_t t = others[std::countr_zero(set)];
      d[t] = 0.0;
      b[t].kind = Back::kSeed;
    } else {
      // Each unordered split once: the half holding the lowest bit.
      const std::uint32_t low = set & (~set + 1);
      for (std::uint32_t sub = (set - 1) & set; sub > 0; sub = (sub - 1) & set) {
        if (!(sub & low)) continue;
        const auto& a = dp[sub];
        const auto& c = dp[set ^ sub];
        for (std::size_t v = 0; v < n; ++v) {
          const double val = a[v] + c[v];
          if (val < d[v]) {
            d[v] = val;
            b[v] = {Back::kSplit, sub, 0, 0};
          }
        }
      }
    }
    std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
    for (std::size_t v = 0; v < n; ++v)
      if (d[v] < kInf) q.emplace(d[v], v);
    while (!q.empty()) {
      auto [dv, v] = q.top();
      q.pop();
      if (dv > d[v]) continue;
      for (auto [w, e] : adj[v]) {
        const double nd = dv + cost[e];
        if (nd < d[w]) {
          d[w] = nd;
          b[w] = {Back::kStep, 0, e, v};
          q.emplace(nd, w);
        }
      }
    }
  }
  if (dp[full][root] == kInf) throw DataError("required nodes cannot be connected to the source");

  std::vector<char> chosen(cg.edges.size(), 0);
  std::function<void(std::uint32_t, std::size_t)> collect = [&](std::uint32_t set, std::size_t v) {
    while (true) {
      const Back& b = back[set][v];
      switch (b.kind) {
        case Back::kSeed:
        case Back::kNone:
          return;
        case Back::kStep:
          chosen[b.edge] = 1;
          v = b.from;
          break;
        case Back::kSplit:
          collect(b.sub, v);
          set ^= b.sub;
          break;
      }
    }
  };
  collect(full, root);

  // Kruskal over the recovered node set, then strip non-terminal leaves.
  std::vector<char> in(n, 0);
  in[root] = 1;
  for (std::size_t e = 0; e < chosen.size(); ++e)
    if (chosen[e]) in[cg.index_of(cg.edges[e].u)] = in[cg.index_of(cg.edges[e].v)] = 1;
  std::vector<std::size_t> order;
  for (std::size_t e = 0; e < cg.edges.size(); ++e) {
    const std::size_t u = cg.index_of(cg.edges[e].u), v = cg.index_of(cg.edges[e].v);
    if (u != v && in[u] && in[v]) order.push_back(e);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cost[a] < cost[b]; });
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  std::vector<std::size_t> tree;
  for (std::size_t e : order) {
    const std::size_t a = find(cg.index_of(cg.edges[e].u)), b = find(cg.index_of(cg.edges[e].v));
    if (a == b) continue;
    parent[a] = b;
    tree.push_back(e);
  }
  std::vector<char> keep(n, 0);
  keep[root] = 1;
  for (std::size_t t : others) keep[t] = 1;
  bool pruned = true;
  while (pruned) {
    pruned = false;
    std::vector<std::size_t> degree(n, 0);
    for (std::size_t e : tree) {
      ++degree[cg.index_of(cg.edges[e].u)];
      ++degree[cg.index_of(cg.edges[e].v)];
    }
    const auto before = tree.size();
    std::erase_if(tree, [&](std::size_t e) {
      const std::size_t u = cg.index_of(cg.edges[e].u), v = cg.index_of(cg.edges[e].v);
      return (degree[u] == 1 && !keep[u]) || (degree[v] == 1 && !keep[v]);
    });
    pruned = tree.size() != before;
  }

  SynthesisSolution s = solution_from_tree(problem, std::move(tree));
  s.proven_optimal = true;
  s.gap = 0.0;
  return s;
}

}  // namespace feedforge
