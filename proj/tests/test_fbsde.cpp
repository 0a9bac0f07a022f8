#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "fbcontrol/errors.hpp"
#include "fbcontrol/fbsde.hpp"
#include "fbcontrol/hjb.hpp"
#include "support/scenarios.hpp"

using namespace fbcontrol;

TEST_CASE("a frozen system carries the terminal cost verbatim") {
  auto sc = testsupport::zero_scenario(50, 40);
  sc.x0 = 0.5;
  sc.montecarlo.paths = 64;
  const auto field = solve_hjb(sc).field;
  const auto b = simulate_feedback(sc, field);

  REQUIRE(b.paths == 64);
  REQUIRE(b.nodes == sc.grid.nt + 1);
  REQUIRE(b.x.size() == static_cast<std::size_t>(b.paths) * b.nodes);
  REQUIRE(b.dw.size() == static_cast<std::size_t>(b.paths) * (b.nodes - 1));
  CHECK(b.mode == SimulationMode::feedback);

  for (int path = 0; path < b.paths; ++path) {
    for (int k = 0; k < b.nodes; ++k) {
      CHECK(b.x[b.at(path, k)] == 0.5);
      CHECK(b.z[b.at(path, k)] == 0.0);
    }
    CHECK(b.path_cost[static_cast<std::size_t>(path)] == 0.25);
    CHECK(b.y_residual[static_cast<std::size_t>(path)] <= 1e-14);
  }
  const auto c = cost(b);
  CHECK(c.mean == 0.25);
  CHECK(c.std_error == 0.0);
  CHECK(c.paths == 64);
}

TEST_CASE("forward increments follow drift plus noise") {
  auto sc = testsupport::zero_scenario(30, 40);
  sc.coefficients.b.c0 = 0.1;
  sc.coefficients.sigma.c0 = 0.2;
  sc.montecarlo.paths = 16;
  const auto field = solve_hjb(sc).field;
  const auto b = simulate_feedback(sc, field);
  for (int path = 0; path < b.paths; ++path)
    for (int k = 0; k + 1 < b.nodes; ++k) {
      const double want = b.x[b.at(path, k)] + 0.1 * b.dt +
                          0.2 * b.dw[static_cast<std::size_t>(path) * (b.nodes - 1) + k];
      CHECK(b.x[b.at(path, k + 1)] == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("simulation is reproducible and thread-invariant") {
  const auto sc = testsupport::heat_sine_scenario(60, 40, 0.3);
  const auto field = solve_hjb(sc).field;
  const auto a = simulate_feedback(sc, field, 1);
  const auto b = simulate_feedback(sc, field, 4);
  const auto c = simulate_feedback(sc, field, 1);
  REQUIRE(a.x.size() == b.x.size());
  bool same_ab = true, same_ac = true;
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    same_ab = same_ab && a.x[i] == b.x[i] && a.y[i] == b.y[i] && a.z[i] == b.z[i];
    same_ac = same_ac && a.x[i] == c.x[i];
  }
  CHECK(same_ab);
  CHECK(same_ac);

  auto reseeded = sc;
  reseeded.montecarlo.seed += 1;
  const auto d = simulate_feedback(reseeded, field);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.x.size() && !any_diff; ++i) any_diff = a.x[i] != d.x[i];
  CHECK(any_diff);
}

TEST_CASE("martingale terminal value is recovered on average") {
  auto sc = testsupport::zero_scenario(50, 60);
  sc.x0 = 0.3;
  sc.coefficients.sigma.c0 = 0.2;
  sc.coefficients.phi = {0, 1, 0, 0, 0, 0};  // phi = x
  sc.coefficients.L1 = 1.0;
  sc.montecarlo.paths = 4096;
  const auto field = solve_hjb(sc).field;
  const auto b = simulate_feedback(sc, field);
  const auto c = cost(b);
  CHECK(std::fabs(c.mean - 0.3) <= 4.0 * c.std_error + 1e-6);
  // std error of a 0.2-vol endpoint over 4096 paths
  CHECK(c.std_error == doctest::Approx(0.2 / 64.0).epsilon(0.2));
}

TEST_CASE("backward consistency holds along feedback paths") {
  const auto sc = testsupport::small_lq_scenario();
  const auto field = solve_hjb(sc).field;
  const auto b = simulate_feedback(sc, field);
  const auto r = dpp_consistency(sc, b);
  CHECK(r.samples > 0);
  CHECK(r.excluded_paths == 0);
  CHECK(r.max_gap <= 0.05);
  CHECK(r.mean_gap <= 0.02);
}

TEST_CASE("paths that leave the box are capped and excluded from consistency") {
  auto sc = testsupport::zero_scenario(80, 12);
  sc.x0 = 0.0;
  sc.coefficients.sigma.c0 = 0.4;
  sc.coefficients.phi = {0, 1, 0, 0, 0, 0};
  sc.coefficients.L1 = 1.0;
  // Tight enough that most paths leave, wide enough that a few dozen stay.
  sc.grid.xmin = -0.3;
  sc.grid.xmax = 0.3;
  sc.montecarlo.paths = 256;

  // Default cap: 1% clamped node visits is an error for this box.
  const auto field = solve_hjb(sc).field;
  CHECK_THROWS_AS(simulate_feedback(sc, field), NumericError);

  sc.montecarlo.out_of_box_cap = 1.0;
  const auto wide_open = simulate_feedback(sc, field);
  CHECK(wide_open.out_of_box > 0);
  const auto r = dpp_consistency(sc, wide_open);
  CHECK(r.excluded_paths > 0);
  CHECK(r.excluded_paths < 256);
}

TEST_CASE("picard mode reproduces a decoupled closed form") {
  auto sc = testsupport::zero_scenario(50, 60);
  sc.x0 = 0.3;
  sc.coefficients.sigma.c0 = 0.3;
  sc.coefficients.g.c0 = 1.0;
  sc.coefficients.g.cu = 1.0;
  sc.coefficients.phi = {0, 1, 0, 0, 0, 0};  // Y_t = X_t + (1 + u)(T - t)
  sc.coefficients.L1 = 1.0;
  sc.montecarlo.paths = 2048;

  const std::vector<double> schedule(static_cast<std::size_t>(sc.grid.nt), 0.5);
  const auto b = simulate_picard(sc, schedule);
  CHECK(b.mode == SimulationMode::picard);
  CHECK(b.picard_sweeps >= 1);

  const auto c = cost(b);
  CHECK(std::fabs(c.mean - (0.3 + 1.5)) <= 4.0 * c.std_error + 0.01);

  // The regressed backward start should sit on the closed form too.
  double y0_mean = 0;
  for (int path = 0; path < b.paths; ++path) y0_mean += b.y[b.at(path, 0)];
  y0_mean /= b.paths;
  CHECK(std::fabs(y0_mean - 1.8) <= 0.02);

  // Open-loop schedule is recorded into the control channel.
  CHECK(b.u[b.at(0, 0)] == 0.5);
  CHECK(b.u[b.at(b.paths - 1, b.nodes - 2)] == 0.5);
}
