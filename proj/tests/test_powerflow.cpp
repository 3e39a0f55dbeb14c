#include <doctest.h>

#include <cmath>
#include <random>

#include "feedforge/error.hpp"
#include "feedforge/powerflow.hpp"
#include "networks.hpp"

using namespace feedforge;
using testing_support::NetworkBuilder;
using testing_support::random_radial_network;
using testing_support::zbus_fixed_point;

namespace {

/// |V2| for a source V1 feeding S = P + jQ through z = r + jx.
double two_bus_closed_form(double v1, double r, double x, double p, double q) {
  const double b = 2.0 * (r * p + x * q) - v1 * v1;
  const double c = (r * r + x * x) * (p * p + q * q);
  return std::sqrt((-b + std::sqrt(b * b - 4.0 * c)) / 2.0);
}

}  // namespace

TEST_CASE("zero load keeps every bus at the slack voltage after one sweep") {
  NetworkBuilder b(4);
  b.line(1, 2, 0.01, 0.01).line(2, 3, 0.01, 0.01).line(2, 4, 0.02, 0.01);
  b.net.slack_v_pu = 1.03;
  const auto r = run_power_flow(b.net);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  for (const auto& [id, v] : r.v_pu) CHECK(v == 1.03);
  CHECK(max_branch_loading(r, b.net) == 0.0);
}

TEST_CASE("two-bus voltage matches the closed-form root") {
  NetworkBuilder b(2);
  b.line(1, 2, 0.01, 0.01).load(2, 0.1, 0.0);
  const auto r = run_power_flow(b.net);
  REQUIRE(r.converged);
  CHECK(std::abs(r.v_pu.at(2) - two_bus_closed_form(1.0, 0.01, 0.01, 0.1, 0.0)) <= 1e-10);
}

TEST_CASE("two-bus closed form holds across random cases") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> z(0.001, 0.05), s(0.0, 0.5), v(0.95, 1.05);
  for (int k = 0; k < 200; ++k) {
    NetworkBuilder b(2);
    const double r = z(rng), x = z(rng), p = s(rng), q = s(rng) / 2, v1 = v(rng);
    b.line(1, 2, r, x).load(2, p, q);
    b.net.slack_v_pu = v1;
    // Voltage error after stopping is about |z| * tol, and |z| reaches 0.07 here.
    const auto res = run_power_flow(b.net, {1e-12, 100});
    REQUIRE(res.converged);
    CHECK(std::abs(res.v_pu.at(2) - two_bus_closed_form(v1, r, x, p, q)) <= 1e-10);
  }
}

TEST_CASE("three-bus path with equal loads sags with depth") {
  NetworkBuilder b(3);
  b.line(1, 2, 0.02, 0.01).line(2, 3, 0.02, 0.01).load(2, 0.1, 0.03).load(3, 0.1, 0.03);
  const auto r = run_power_flow(b.net);
  REQUIRE(r.converged);
  CHECK(r.v_pu.at(1) == 1.0);
  CHECK(r.v_pu.at(2) < r.v_pu.at(1));
  CHECK(r.v_pu.at(3) < r.v_pu.at(2));
  const auto oracle = zbus_fixed_point(b.net);
  for (const auto& [id, v] : r.v_pu) CHECK(std::abs(v - std::abs(oracle.at(id))) <= 1e-8);
}

TEST_CASE("sweep agrees with the Z-bus fixed point on random feeders") {
  std::mt19937_64 rng(77);
  for (int k = 0; k < 40; ++k) {
    const auto net = random_radial_network(rng, std::uniform_int_distribution<int>(2, 50)(rng), 0.2);
    const auto r = run_power_flow(net);
    REQUIRE(r.converged);
    const auto oracle = zbus_fixed_point(net);
    for (const auto& [id, v] : r.v_pu) {
      CHECK(std::abs(v - std::abs(oracle.at(id))) <= 1e-8);
      CHECK(std::abs(r.v_angle.at(id) - std::arg(oracle.at(id))) <= 1e-8);
    }
  }
}

TEST_CASE("slack injection covers load plus losses") {
  std::mt19937_64 rng(31);
  const PowerFlowOptions opt;
  for (int k = 0; k < 30; ++k) {
    const auto net = random_radial_network(rng, 30, 0.2);
    const auto r = run_power_flow(net, opt);
    REQUIRE(r.converged);
    CHECK(r.max_mismatch <= opt.tol);
    double q = 0.0;
    for (const auto& l : net.loads) q += l.q_mvar;
    CHECK(std::abs(r.slack_p_mw - (net.total_p_mw + r.losses_mw)) <= 10 * opt.tol);
    CHECK(r.losses_mw >= 0.0);
    CHECK(r.slack_q_mvar >= q);
  }
}

TEST_CASE("voltages never rise along a root-to-leaf path") {
  std::mt19937_64 rng(32);
  for (int k = 0; k < 30; ++k) {
    const auto net = random_radial_network(rng, 40, 0.2);
    const auto r = run_power_flow(net);
    for (const auto& l : net.lines) CHECK(r.v_pu.at(l.to) <= r.v_pu.at(l.from) + 1e-12);
  }
}

TEST_CASE("heavier scaling never raises any bus voltage") {
  std::mt19937_64 rng(33);
  const PowerFlowOptions opt;
  for (int k = 0; k < 20; ++k) {
    const auto net = random_radial_network(rng, 40, 0.15);
    const auto out = run_scenarios(net, {{"a", 0.25}, {"b", 1.0}, {"c", 1.5}}, opt);
    for (const auto& b : net.buses) {
      CHECK(out[0].result.v_pu.at(b.id) >= out[1].result.v_pu.at(b.id) - 10 * opt.tol);
      CHECK(out[1].result.v_pu.at(b.id) >= out[2].result.v_pu.at(b.id) - 10 * opt.tol);
    }
  }
}

TEST_CASE("factor zero gives a flat profile") {
  std::mt19937_64 rng(1);
  const auto net = random_radial_network(rng, 12, 0.2);
  const auto out = run_scenarios(net, {{"off", 0.0}});
  CHECK(out[0].report.delta_v_max == 0.0);
  CHECK(out[0].report.rho_max == 0.0);
  CHECK_THROWS_AS(scale_loads(net, -1.0), Error);
}

TEST_CASE("power flow is deterministic") {
  std::mt19937_64 rng(2);
  const auto net = random_radial_network(rng, 50, 0.2);
  CHECK(run_power_flow(net) == run_power_flow(net));
}

TEST_CASE("non-convergence is reported, not thrown") {
  NetworkBuilder b(2);
  b.line(1, 2, 0.3, 0.3).load(2, 5.0, 2.0);  // beyond the nose of the PV curve
  const auto r = run_power_flow(b.net, {1e-8, 30});
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 30);
  CHECK_THROWS_AS(max_voltage_deviation(r), DataError);
  CHECK_THROWS_AS(max_branch_loading(r, b.net), DataError);
}

TEST_CASE("looser tolerance agrees to roughly that tolerance") {
  std::mt19937_64 rng(90);
  const auto net = random_radial_network(rng, 45, 0.2);
  const auto tight = run_power_flow(net, {1e-8, 100});
  const auto loose = run_power_flow(net, {1e-4, 100});
  CHECK(loose.iterations <= tight.iterations);
  for (const auto& [id, v] : tight.v_pu) CHECK(std::abs(v - loose.v_pu.at(id)) <= 1e-4);
}

// ---------------------------------------------------------------------------
// Indicators

TEST_CASE("deviation is the largest distance from 1 pu") {
  PowerFlowResult r;
  r.converged = true;
  r.v_pu = {{1, 1.0}, {2, 0.97}, {3, 1.02}};
  CHECK(max_voltage_deviation(r) == doctest::Approx(0.03).epsilon(1e-12));
  r.v_pu = {{1, 1.0}, {2, 1.0}};
  CHECK(max_voltage_deviation(r) == 0.0);
}

TEST_CASE("loading ratio and its homogeneity in the rating") {
  NetworkBuilder b(2);
  b.line(1, 2, 0.01, 0.01, 0.4);
  PowerFlowResult r;
  r.converged = true;
  r.v_pu = {{1, 1.0}, {2, 1.0}};
  r.branches = {{1, 2, 0.2}};
  CHECK(max_branch_loading(r, b.net) == 0.5);
  b.net.lines[0].rating_mva = 0.8;
  CHECK(max_branch_loading(r, b.net) == 0.25);
  b.net.lines[0].rating_mva = 0.0;
  CHECK_THROWS_AS(max_branch_loading(r, b.net), Error);
}

TEST_CASE("radiality check") {
  NetworkBuilder tree(4);
  tree.line(1, 2, 0.01, 0.01).line(2, 3, 0.01, 0.01).line(2, 4, 0.01, 0.01);
  CHECK(check_radiality(tree.net));

  auto loop = tree;
  loop.line(3, 4, 0.01, 0.01);
  CHECK_FALSE(check_radiality(loop.net));
  CHECK_THROWS_AS(run_power_flow(loop.net), ValidationError);

  NetworkBuilder split(4);
  split.line(1, 2, 0.01, 0.01).line(3, 4, 0.01, 0.01);
  CHECK_FALSE(check_radiality(split.net));
}

TEST_CASE("profile order sorts by depth then id") {
  NetworkBuilder b(5);
  b.line(1, 4, 0.01, 0.01).line(1, 3, 0.01, 0.01).line(4, 2, 0.01, 0.01).line(3, 5, 0.01, 0.01);
  const auto r = run_power_flow(b.net);
  CHECK(r.profile_order() == std::vector<NodeId>{1, 3, 4, 2, 5});
}

TEST_CASE("result and report JSON round trips") {
  std::mt19937_64 rng(5);
  const auto net = random_radial_network(rng, 20, 0.2);
  const auto out = run_scenarios(net, default_scenarios());
  CHECK(out.size() == 3);
  const auto back = scenario_outcomes_from_json(nlohmann::json::parse(to_json(out).dump()));
  REQUIRE(back.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(back[i].scenario.name == out[i].scenario.name);
    CHECK(back[i].result == out[i].result);
    CHECK(back[i].report == out[i].report);
  }
}
