#include <doctest.h>

#include <random>

#include "feedforge/error.hpp"
#include "feedforge/synth.hpp"
#include "support.hpp"

using namespace feedforge;
using testing_support::brute_force;
using testing_support::problem_from;
using testing_support::random_connected;
using testing_support::random_terminals;
using testing_support::RawEdge;

namespace {

// Node ids are 1-based: a = 1, b = 2, c = 3.
SynthesisProblem triangle() {
  return problem_from(3, {{0, 1, 1.0}, {0, 2, 4.0}, {1, 2, 2.0}}, 1, {3});
}

std::vector<std::pair<NodeId, NodeId>> endpoints(const SynthesisProblem& p, const SynthesisSolution& s) {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (std::size_t e : s.selected_edges()) out.emplace_back(p.graph.edges[e].u, p.graph.edges[e].v);
  return out;
}

}  // namespace

TEST_CASE("triangle selects the two cheap edges") {
  const auto p = triangle();
  const std::vector<std::pair<NodeId, NodeId>> expected{{1, 2}, {2, 3}};
  for (const auto& s : {solve_exact(p), solve_heuristic(p), steiner_oracle(p)}) {
    CHECK(s.objective == 3.0);
    CHECK(endpoints(p, s) == expected);
    CHECK(verify_solution(p, s).ok());
  }
  CHECK(solve_exact(p).proven_optimal);
  CHECK_FALSE(solve_heuristic(p).proven_optimal);
  CHECK(brute_force(p).objective == 3.0);
}

TEST_CASE("single node problem has no edges") {
  const auto p = problem_from(1, {}, 1, {1});
  const auto s = solve_exact(p);
  CHECK(s.selected_edges().empty());
  CHECK(s.objective == 0.0);
  CHECK(s.y == std::vector<std::uint8_t>{1});
  const auto f = to_feeder_graph(p, s);
  REQUIRE(f.nodes.size() == 1);
  CHECK(f.nodes[0].depth == 0);
  CHECK(f.edges.empty());
}

TEST_CASE("empty required set means the source alone") {
  const auto p = problem_from(3, {{0, 1, 1.0}, {1, 2, 1.0}}, 2, {});
  const auto s = solve_exact(p);
  CHECK(s.selected_edges().empty());
  CHECK(s.y == std::vector<std::uint8_t>{0, 1, 0});
}

TEST_CASE("path forces the intermediate node") {
  const auto p = problem_from(3, {{0, 1, 1.0}, {1, 2, 1.0}}, 1, {3});
  const auto s = solve_exact(p);
  CHECK(s.selected_edges().size() == 2);
  CHECK(s.y[1] == 1);
  CHECK(s.flow[0] == 2.0);  // a->b carries b and c
  CHECK(s.flow[2] == 1.0);  // b->c carries c
}

TEST_CASE("source outside the graph is a configuration error") {
  auto p = triangle();
  p.source = 99;
  CHECK_THROWS_AS(solve_exact(p), ConfigError);
  p = triangle();
  p.required = {42};
  CHECK_THROWS_AS(solve_heuristic(p), ConfigError);
}

TEST_CASE("big-M below |N|-1 is rejected") {
  auto p = triangle();
  p.big_m = 1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("unreachable required node is a data error") {
  const auto p = problem_from(4, {{0, 1, 1.0}, {2, 3, 1.0}}, 1, {4});
  CHECK_THROWS_AS(solve_heuristic(p), DataError);
  CHECK_THROWS_AS(steiner_oracle(p), DataError);
}

TEST_CASE("verify_solution flags coupling and cardinality") {
  const auto p = triangle();
  auto s = solve_exact(p);
  SUBCASE("edge without endpoint") {
    s.y[0] = 0;
    const auto r = verify_solution(p, s);
    CHECK_FALSE(r.ok());
    CHECK(std::any_of(r.violations.begin(), r.violations.end(), [](const Violation& v) { return v.constraint == "coupling"; }));
  }
  SUBCASE("tree plus one extra edge") {
    s.z[1] = 1;
    const auto r = verify_solution(p, s);
    CHECK(std::any_of(r.violations.begin(), r.violations.end(), [](const Violation& v) { return v.constraint == "cardinality"; }));
  }
  SUBCASE("isolated retained node is rejected") {
    const auto q = problem_from(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}}, 1, {2});
    auto t = solve_exact(q);
    t.y[3] = 1;
    CHECK_FALSE(verify_solution(q, t).ok());
    CHECK_THROWS_AS(to_feeder_graph(q, t), ValidationError);
  }
}

TEST_CASE("feeder depths follow the tree") {
  const auto p = triangle();
  const auto f = to_feeder_graph(p, solve_exact(p));
  CHECK(f.node(1).depth == 0);
  CHECK(f.node(2).depth == 1);
  CHECK(f.node(3).depth == 2);
  CHECK(*f.node(3).parent == 2);
  CHECK_FALSE(f.node(1).parent.has_value());
}

TEST_CASE("star with required leaves is solved exactly by the heuristic") {
  const auto p = problem_from(5, {{0, 1, 2.0}, {0, 2, 3.0}, {0, 3, 1.5}, {0, 4, 4.0}}, 1, {2, 3, 4, 5});
  CHECK(solve_heuristic(p).objective == solve_exact(p).objective);
  CHECK(solve_exact(p).objective == 10.5);
}

TEST_CASE("4x4 grid corners: heuristic within twice the optimum") {
  std::vector<RawEdge> raw;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      if (c < 3) raw.push_back({4 * r + c, 4 * r + c + 1, 1.0});
      if (r < 3) raw.push_back({4 * r + c, 4 * (r + 1) + c, 1.0});
    }
  const auto p = problem_from(16, raw, 1, {4, 13, 16});
  const auto exact = solve_exact(p);
  const auto heur = solve_heuristic(p);
  CHECK(exact.objective == 9.0);
  CHECK(exact.proven_optimal);
  CHECK(heur.objective >= exact.objective);
  CHECK(heur.objective <= 2.0 * exact.objective);
  CHECK(steiner_oracle(p).objective == 9.0);
}

TEST_CASE("oracle: two terminals give the shortest path") {
  const auto p = problem_from(4, {{0, 1, 1.0}, {1, 3, 1.0}, {0, 2, 0.5}, {2, 3, 2.0}}, 1, {4});
  CHECK(steiner_oracle(p).objective == 2.0);
}

TEST_CASE("oracle: all nodes as terminals give the minimum spanning tree") {
  const auto p = problem_from(4, {{0, 1, 1.0}, {1, 2, 2.0}, {2, 3, 3.0}, {0, 3, 1.5}, {0, 2, 2.5}}, 1, {2, 3, 4});
  CHECK(steiner_oracle(p).objective == 4.5);
}

TEST_CASE("oracle refuses more than twelve terminals") {
  std::vector<RawEdge> raw;
  for (int i = 0; i + 1 < 14; ++i) raw.push_back({i, i + 1, 1.0});
  std::set<NodeId> req;
  for (NodeId i = 2; i <= 13; ++i) req.insert(i);
  CHECK_THROWS_AS(steiner_oracle(problem_from(14, raw, 1, req)), ConfigError);
}

TEST_CASE("exact solver matches exhaustive enumeration including the tie-break") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 7)(rng);
    const int m = std::uniform_int_distribution<int>(n - 1, std::min(14, n * (n - 1) / 2))(rng);
    const auto raw = random_connected(rng, n, m, true, 3.0);
    const auto t = random_terminals(rng, n, std::uniform_int_distribution<int>(1, std::min(n, 4))(rng));
    const auto p = problem_from(n, raw, t[0], std::set<NodeId>(t.begin() + 1, t.end()));
    const auto bf = brute_force(p);
    const auto s = solve_exact(p);
    CHECK(s.objective == bf.objective);
    CHECK(s.selected_edges() == bf.edges);
    CHECK(s.proven_optimal);
  }
}

TEST_CASE("scaling every cost keeps the exact edge set") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto raw = random_connected(rng, 12, 24, true, 4.0);
    const auto t = random_terminals(rng, 12, 4);
    const std::set<NodeId> req(t.begin() + 1, t.end());
    auto scaled = raw;
    for (auto& e : scaled) e.cost *= 8.0;  // exact in binary
    CHECK(solve_exact(problem_from(12, raw, t[0], req)).selected_edges() ==
          solve_exact(problem_from(12, scaled, t[0], req)).selected_edges());
  }
}

TEST_CASE("retained Steiner nodes always carry an edge") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto raw = random_connected(rng, 20, 40, false);
    const auto t = random_terminals(rng, 20, 5);
    const auto p = problem_from(20, raw, t[0], std::set<NodeId>(t.begin() + 1, t.end()));
    for (const auto& s : {solve_exact(p), solve_heuristic(p)}) {
      REQUIRE(verify_solution(p, s).ok());
      std::vector<int> degree(20, 0);
      for (std::size_t e : s.selected_edges()) {
        ++degree[p.graph.edges[e].u - 1];
        ++degree[p.graph.edges[e].v - 1];
      }
      for (int i = 0; i < 20; ++i) {
        const NodeId id = i + 1;
        if (s.y[i] && id != p.source && !p.required.count(id)) CHECK(degree[i] >= 2);
      }
    }
  }
}

TEST_CASE("exact agrees with the oracle on mid-size instances") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const auto raw = random_connected(rng, 25, 50, false);
    const auto t = random_terminals(rng, 25, 6);
    const auto p = problem_from(25, raw, t[0], std::set<NodeId>(t.begin() + 1, t.end()));
    const double exact = solve_exact(p).objective, oracle = steiner_oracle(p).objective;
    CHECK(std::abs(exact - oracle) <= 1e-9 * oracle);
  }
}

TEST_CASE("timeout returns a feasible incumbent with a gap") {
  std::mt19937_64 rng(5);
  const auto raw = random_connected(rng, 60, 150, false);
  const auto t = random_terminals(rng, 60, 20);
  const auto p = problem_from(60, raw, t[0], std::set<NodeId>(t.begin() + 1, t.end()));
  const auto s = solve_exact(p, {0.0});
  CHECK(verify_solution(p, s).ok());
  CHECK_FALSE(s.proven_optimal);
  CHECK(s.gap >= 0.0);
  CHECK(s.gap < 1.0);
}

TEST_CASE("solution JSON round trip") {
  const auto p = triangle();
  const auto s = solve_exact(p);
  const auto q = synthesis_problem_from_json(to_json(p));
  CHECK(q.graph == p.graph);
  CHECK(q.required == p.required);
  const auto back = synthesis_solution_from_json(q, to_json(p, s));
  CHECK(back.y == s.y);
  CHECK(back.z == s.z);
  CHECK(back.flow == s.flow);
  CHECK(back.objective == s.objective);
  const auto f = to_feeder_graph(p, s);
  CHECK(feeder_graph_from_json(to_json(f)) == f);
}
