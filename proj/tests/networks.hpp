#pragma once

// Hand-built feeders and electrical networks, plus a reference power-flow solver.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <random>
#include <vector>

#include "feedforge/electrify.hpp"
#include "feedforge/synth.hpp"

namespace testing_support {

using cplx = std::complex<double>;

/// Straight feeder 1-2-...-n along the x axis, `spacing_m` apart, rooted at 1.
inline feedforge::FeederGraph path_feeder(int n, double spacing_m, const std::string& cls = "residential") {
  using namespace feedforge;
  FeederGraph f;
  f.frame = LocalFrame{145.0, -37.8};
  f.root = 1;
  for (int i = 0; i < n; ++i) {
    const double x = spacing_m * i;
    FeederNode node{i + 1, {145.0 + x / 88000.0, -37.8, Vec2{x, 0.0}}, std::nullopt, i};
    if (i > 0) node.parent = i;
    f.nodes.push_back(node);
  }
  for (int i = 1; i < n; ++i)
    f.edges.push_back({i, i + 1, static_cast<std::size_t>(i - 1), spacing_m, cls,
                       {f.nodes[i - 1].point, f.nodes[i].point}});
  return f;
}

/// Feeder whose nodes sit at arbitrary planar positions, edges given as (parent, child) in BFS order.
inline feedforge::FeederGraph feeder_from(const std::vector<feedforge::Vec2>& xy,
                                          const std::vector<std::pair<int, int>>& edges) {
  using namespace feedforge;
  FeederGraph f;
  f.frame = LocalFrame{145.0, -37.8};
  f.root = 1;
  for (std::size_t i = 0; i < xy.size(); ++i)
    f.nodes.push_back({static_cast<NodeId>(i + 1), {145.0 + xy[i].x / 88000.0, -37.8 + xy[i].y / 111000.0, xy[i]}, std::nullopt, 0});
  std::size_t k = 0;
  for (auto [p, c] : edges) {
    auto& child = f.nodes[c - 1];
    child.parent = p;
    child.depth = f.nodes[p - 1].depth + 1;
    const double d = std::hypot(xy[c - 1].x - xy[p - 1].x, xy[c - 1].y - xy[p - 1].y);
    f.edges.push_back({p, c, k++, d, "residential", {f.nodes[p - 1].point, child.point}});
  }
  return f;
}

/// Network in ohms with base 1 kV / 1 MVA, so every ohm and MW value is also per unit.
struct NetworkBuilder {
  feedforge::ElectricalNetwork net;

  explicit NetworkBuilder(int n_buses) {
    net.base_kv = 1.0;
    net.base_mva = 1.0;
    net.slack_bus = 1;
    for (int i = 1; i <= n_buses; ++i) net.buses.push_back({i, 10.0 * i, 0.0});
  }
  NetworkBuilder& line(int from, int to, double r, double x, double rating = 1.0) {
    net.lines.push_back({from, to, "residential", r, x, r, x, rating, 1.0});
    return *this;
  }
  NetworkBuilder& load(int bus, double p, double q) {
    net.loads.push_back({bus, p, q, 1});
    std::sort(net.loads.begin(), net.loads.end(), [](const auto& a, const auto& b) { return a.bus < b.bus; });
    net.total_p_mw = 0.0;
    for (const auto& l : net.loads) net.total_p_mw += l.p_mw;
    return *this;
  }
};

/// Random radial network: bus k hangs off a uniformly chosen earlier bus.
inline feedforge::ElectricalNetwork random_radial_network(std::mt19937_64& rng, int n, double max_load_pu) {
  std::uniform_real_distribution<double> z(0.001, 0.005), p(0.0, max_load_pu), ratio(0.0, 0.5);
  NetworkBuilder b(n);
  for (int k = 2; k <= n; ++k) {
    const int parent = std::uniform_int_distribution<int>(1, k - 1)(rng);
    b.line(parent, k, z(rng), z(rng));
  }
  for (int k = 2; k <= n; ++k) {
    const double pk = p(rng);
    b.load(k, pk, pk * ratio(rng));
  }
  return b.net;
}

/// Fixed-point iteration V = V_s - Z_bus * I(V) with I_k = conj(S_k / V_k).
/// Z_bus entries are the shared root-path impedances of a tree. Network must be in per unit.
inline std::map<feedforge::NodeId, cplx> zbus_fixed_point(const feedforge::ElectricalNetwork& net, int iterations = 500) {
  using feedforge::NodeId;
  std::map<NodeId, std::pair<NodeId, cplx>> up;  // child -> (parent, z)
  const double zb = net.base_kv * net.base_kv / net.base_mva;
  for (const auto& l : net.lines) up[l.to] = {l.from, cplx(l.r_ohm, l.x_ohm) / zb};
  std::map<NodeId, std::map<NodeId, cplx>> path;  // bus -> (line child id -> z) on the root path
  for (const auto& b : net.buses) {
    for (NodeId at = b.id; at != net.slack_bus; at = up.at(at).first) path[b.id][at] = up.at(at).second;
  }
  std::map<NodeId, cplx> s;
  for (const auto& l : net.loads) s[l.bus] = cplx(l.p_mw, l.q_mvar) / net.base_mva;
  std::map<NodeId, std::map<NodeId, cplx>> zbus;
  for (const auto& b : net.buses)
    for (const auto& [j, sj] : s)
      for (const auto& [link, z] : path[b.id])
        if (path[j].count(link)) zbus[b.id][j] += z;
  std::map<NodeId, cplx> v;
  for (const auto& b : net.buses) v[b.id] = net.slack_v_pu;
  for (int it = 0; it < iterations; ++it) {
    std::map<NodeId, cplx> current;
    for (const auto& [bus, sk] : s) current[bus] = std::conj(sk / v[bus]);
    std::map<NodeId, cplx> next;
    for (const auto& b : net.buses) {
      cplx drop = 0.0;
      for (const auto& [j, ij] : current) drop += zbus[b.id][j] * ij;
      next[b.id] = net.slack_v_pu - drop;
    }
    double change = 0.0;
    for (const auto& [id, x] : next) change = std::max(change, std::abs(x - v[id]));
    v = std::move(next);
    if (change < 1e-15) break;
  }
  return v;
}

}  // namespace testing_support
