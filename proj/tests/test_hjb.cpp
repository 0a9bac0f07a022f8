#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>

#include "fbcontrol/errors.hpp"
#include "fbcontrol/hjb.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using namespace fbcontrol;

TEST_CASE("vanishing coefficients leave the terminal condition untouched") {
  const auto sc = testsupport::zero_scenario(200, 200);
  const auto sol = solve_hjb(sc);
  const auto& f = sol.field;
  REQUIRE(f.nt == sc.grid.nt + 1);
  REQUIRE(f.nx == sc.grid.nx + 1);
  double worst = 0;
  for (int i = 0; i < f.nt; ++i)
    for (int j = 0; j < f.nx; ++j) {
      const double x = f.x_at(j);
      worst = std::max(worst, std::fabs(f.w[f.index(i, j)] - x * x));
    }
  CHECK(worst == 0.0);
  CHECK(sol.diagnostics.cfl_ratio == 0.0);
}

TEST_CASE("a unit running cost adds exactly the remaining horizon") {
  const auto sc = testsupport::constant_cost_scenario(200, 200);
  const auto sol = solve_hjb(sc);
  const auto& f = sol.field;
  double worst = 0;
  for (int i = 0; i < f.nt; ++i)
    for (int j = 0; j < f.nx; ++j) {
      const double x = f.x_at(j);
      const double want = x * x + (sc.T - f.time_at(i));
      worst = std::max(worst, std::fabs(f.w[f.index(i, j)] - want));
    }
  CHECK(worst <= sc.dt());      // the scheme's contract
  CHECK(worst <= 1e-10);        // what pure accumulation actually costs
}

TEST_CASE("pure diffusion reproduces the damped-sine closed form") {
  const double s0 = 0.3;
  const auto sc = testsupport::heat_sine_scenario(400, 80, s0);
  const auto sol = solve_hjb(sc);
  const auto& f = sol.field;
  // Compare away from the edges where the one-sided stencils live.
  double worst = 0;
  for (int i = 0; i < f.nt; ++i)
    for (int j = f.nx / 4; j <= 3 * f.nx / 4; ++j) {
      const double x = f.x_at(j);
      const double want = std::exp(-0.5 * s0 * s0 * (sc.T - f.time_at(i))) * std::sin(x);
      worst = std::max(worst, std::fabs(f.w[f.index(i, j)] - want));
    }
  CHECK(worst <= 0.01);
  CHECK(sol.diagnostics.cfl_ratio ==
        doctest::Approx(sc.dt() * s0 * s0 / (sc.dx() * sc.dx())).epsilon(1e-12));
}

// Errors are measured against the finest level, so a scheme of order m shows
// log2((4^m - 1)/(2^m - 1)): ~2.32 for m = 2 and ~1.58 for m = 1.
TEST_CASE("self-convergence orders match the scheme") {
  SUBCASE("second order in space") {
    auto sc = testsupport::heat_sine_scenario(600, 64, 0.3);
    const auto est = refine_and_estimate_order(sc, RefinementMode::space);
    CHECK(est.coarse_error > est.mid_error);
    CHECK(est.order > 1.9);
    CHECK(est.order < 2.7);
  }
  SUBCASE("first order in time") {
    auto sc = testsupport::heat_sine_scenario(64, 160, 0.3);
    const auto est = refine_and_estimate_order(sc, RefinementMode::time);
    CHECK(est.coarse_error > est.mid_error);
    CHECK(est.order > 1.2);
    CHECK(est.order < 1.9);
  }
  SUBCASE("a degenerate spatial ladder is rejected") {
    auto sc = testsupport::heat_sine_scenario(40, 16, 0.3);
    CHECK_THROWS_AS(refine_and_estimate_order(sc, RefinementMode::space), InputError);
  }
}

TEST_CASE("argmin ties resolve to the lowest control index") {
  auto sc = testsupport::zero_scenario(20, 20);
  sc.controls.points = {-1.0, 1.0};
  sc.coefficients.g.cx = 0.2;  // costs ignore u entirely
  sc.coefficients.L1 = 2.0;
  const auto sol = solve_hjb(sc);
  for (int i = 0; i + 1 < sol.field.nt; ++i)
    for (int j = 0; j < sol.field.nx; ++j) CHECK(sol.field.u_index[sol.field.index(i, j)] == 0);
}

TEST_CASE("explicit scheme refuses an unstable step") {
  auto sc = testsupport::heat_sine_scenario(100, 200, 1.5);
  try {
    solve_hjb(sc);
    FAIL("expected CflViolation");
  } catch (const CflViolation& e) {
    CHECK(e.required_dt < e.actual_dt);
  }
}

TEST_CASE("the sweep rejects value slopes past the contraction budget") {
  auto sc = testsupport::zero_scenario(200, 50);
  sc.grid.xmin = -3;
  sc.grid.xmax = 3;
  sc.coefficients.sigma.c0 = 0.3;
  sc.coefficients.sigma.cz = 0.15;  // phi_x reaches 6 at the edge: 6 * 0.15 > 1 - beta0
  sc.coefficients.L3 = 0.15;
  CHECK_THROWS_AS(solve_hjb(sc), AlgebraMarginViolation);
}

TEST_CASE("interpolation clamps space and honors the tableau") {
  const auto sc = testsupport::heat_sine_scenario(50, 40, 0.3);
  const auto f = solve_hjb(sc).field;
  CHECK(f.interp(0.3, f.xmax + 10.0) == f.interp(0.3, f.xmax));
  CHECK(f.interp(0.3, f.xmin - 10.0) == f.interp(0.3, f.xmin));
  // Node values are reproduced exactly.
  CHECK(f.interp(f.time_at(7), f.x_at(11)) == f.w[f.index(7, 11)]);
  // Bilinear: a cell center is the mean of its four corners.
  const double tc = 0.5 * (f.time_at(3) + f.time_at(4));
  const double xc = 0.5 * (f.x_at(5) + f.x_at(6));
  const double corners = 0.25 * (f.w[f.index(3, 5)] + f.w[f.index(3, 6)] +
                                 f.w[f.index(4, 5)] + f.w[f.index(4, 6)]);
  CHECK(f.interp(tc, xc) == doctest::Approx(corners).epsilon(1e-13));
}

TEST_CASE("feedback policy recovers the constant minimizer of a linear control cost") {
  const auto sc = testsupport::small_lq_scenario();
  const auto f = solve_hjb(sc).field;
  testsupport::TestRng rng(55);
  for (int i = 0; i < 50; ++i) {
    const double t = rng.uniform(sc.t0, sc.T - 1e-9);
    const double x = rng.uniform(sc.grid.xmin, sc.grid.xmax);
    CHECK(feedback_policy(sc, f, t, x) == -1.0);
  }
}

TEST_CASE("the backward sweep is invariant under the worker count") {
  const auto sc = testsupport::heat_sine_scenario(100, 60, 0.3);
  const auto a = solve_hjb(sc, 1);
  const auto b = solve_hjb(sc, 4);
  REQUIRE(a.field.w.size() == b.field.w.size());
  bool same = true;
  for (std::size_t i = 0; i < a.field.w.size(); ++i)
    same = same && a.field.w[i] == b.field.w[i] && a.field.wx[i] == b.field.wx[i] &&
           a.field.u_index[i] == b.field.u_index[i];
  CHECK(same);
}

TEST_CASE("grid accessors expose the declared geometry") {
  const auto sc = testsupport::zero_scenario(10, 20);
  const auto f = solve_hjb(sc).field;
  CHECK(f.time_at(0) == sc.t0);
  CHECK(f.time_at(f.nt - 1) == doctest::Approx(sc.T).epsilon(1e-15));
  CHECK(f.x_at(0) == sc.grid.xmin);
  CHECK(f.x_at(f.nx - 1) == doctest::Approx(sc.grid.xmax).epsilon(1e-15));
  CHECK(f.index(2, 3) == static_cast<std::size_t>(2 * f.nx + 3));
}
