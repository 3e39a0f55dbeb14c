#pragma once

// Instance generators and independent reference computations shared by the test binaries.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "feedforge/synth.hpp"

namespace testing_support {

using feedforge::CandidateEdge;
using feedforge::CandidateGraph;
using feedforge::CandidateNode;
using feedforge::NodeId;
using feedforge::SynthesisProblem;

struct RawEdge {
  int u;
  int v;
  double cost;
};

/// Candidate graph whose edge costs equal `cost` under alpha = (1, 0, 0).
inline CandidateGraph graph_from(int n, const std::vector<RawEdge>& raw) {
  CandidateGraph g;
  for (int i = 0; i < n; ++i) {
    const double lon = 144.9 + 0.001 * (i % 7), lat = -37.8 + 0.001 * (i / 7);
    g.nodes.push_back({i + 1, {lon, lat, feedforge::Vec2{100.0 * (i % 7), 100.0 * (i / 7)}}});
  }
  for (const auto& r : raw) {
    CandidateEdge e;
    e.u = std::min(r.u, r.v) + 1;
    e.v = std::max(r.u, r.v) + 1;
    e.length_m = 100.0;
    e.class_penalty = r.cost;
    e.weight = r.cost;
    e.road_class = "residential";
    e.geometry = {g.nodes[e.u - 1].point, g.nodes[e.v - 1].point};
    g.edges.push_back(std::move(e));
  }
  return g;
}

inline SynthesisProblem problem_from(int n, const std::vector<RawEdge>& raw, NodeId source,
                                     std::set<NodeId> required) {
  return SynthesisProblem::make(graph_from(n, raw), source, std::move(required), {1.0, 0.0, 0.0});
}

/// Random connected simple graph: a random spanning tree plus extra edges.
inline std::vector<RawEdge> random_connected(std::mt19937_64& rng, int n, int m, bool integer_costs,
                                             double max_cost = 10.0) {
  std::vector<RawEdge> out;
  std::set<std::pair<int, int>> used;
  auto cost = [&] {
    if (integer_costs) return static_cast<double>(std::uniform_int_distribution<int>(1, static_cast<int>(max_cost))(rng));
    return std::uniform_real_distribution<double>(0.1, max_cost)(rng);
  };
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (int i = 1; i < n; ++i) {
    const int a = order[i], b = order[std::uniform_int_distribution<int>(0, i - 1)(rng)];
    used.insert({std::min(a, b), std::max(a, b)});
    out.push_back({a, b, cost()});
  }
  const int cap = n * (n - 1) / 2;
  m = std::min(m, cap);
  while (static_cast<int>(out.size()) < m) {
    const int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
    const int b = std::uniform_int_distribution<int>(0, n - 1)(rng);
    if (a == b || !used.insert({std::min(a, b), std::max(a, b)}).second) continue;
    out.push_back({a, b, cost()});
  }
  // Canonical order as produced by the candidate builder.
  for (auto& e : out)
    if (e.u > e.v) std::swap(e.u, e.v);
  std::sort(out.begin(), out.end(), [](const RawEdge& a, const RawEdge& b) {
    return std::tie(a.u, a.v) < std::tie(b.u, b.v);
  });
  return out;
}

/// Distinct random terminals (1-based ids); the first one is the source.
inline std::vector<NodeId> random_terminals(std::mt19937_64& rng, int n, int k) {
  std::vector<NodeId> ids(n);
  std::iota(ids.begin(), ids.end(), NodeId{1});
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(std::min(k, n));
  return ids;
}

struct BruteForce {
  double objective;
  std::vector<std::size_t> edges;  // lexicographically smallest optimum
};

/// Exhaustive search over every edge subset that forms a tree containing all terminals.
inline BruteForce brute_force(const SynthesisProblem& p) {
  const auto& g = p.graph;
  const std::size_t m = g.edges.size();
  std::vector<std::size_t> terminals{g.index_of(p.source)};
  for (NodeId r : p.required) terminals.push_back(g.index_of(r));
  BruteForce best{std::numeric_limits<double>::infinity(), {}};
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    std::vector<std::size_t> parent(g.nodes.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::vector<char> touched(g.nodes.size(), 0);
    touched[terminals[0]] = 1;
    bool acyclic = true;
    std::vector<std::size_t> edges;
    double cost = 0.0;
    for (std::size_t e = 0; e < m && acyclic; ++e) {
      if (!(mask >> e & 1)) continue;
      const std::size_t a = g.index_of(g.edges[e].u), b = g.index_of(g.edges[e].v);
      const std::size_t ra = find(a), rb = find(b);
      if (ra == rb) acyclic = false;
      parent[ra] = rb;
      touched[a] = touched[b] = 1;
      edges.push_back(e);
      cost += feedforge::edge_cost(p, g.edges[e]);
    }
    if (!acyclic) continue;
    const std::size_t root = find(terminals[0]);
    bool ok = true;
    for (std::size_t v = 0; v < g.nodes.size() && ok; ++v)
      if (touched[v] && find(v) != root) ok = false;
    for (std::size_t t : terminals)
      if (find(t) != root) ok = false;
    if (!ok) continue;
    if (cost < best.objective || (cost == best.objective && edges < best.edges)) best = {cost, edges};
  }
  return best;
}

}  // namespace testing_support
