#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>

#include "json.hpp"

#include "fbcontrol/assumptions.hpp"
#include "fbcontrol/scenario.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using namespace fbcontrol;
using testsupport::TestRng;

TEST_CASE("envelope matches its displayed polynomial and is even") {
  TestRng rng(41);
  for (int i = 0; i < 500; ++i) {
    const double L1 = rng.uniform(0.05, 3), L2 = rng.uniform(0, 2);
    const double beta0 = rng.uniform(0.05, 0.9), y = rng.uniform(-4, 4);
    const double ay = std::fabs(y);
    const double want = L1 + (L2 + L1 + L1 * L2 / beta0) * ay +
                        (L2 + (L1 * L2 + L2 * L2) / beta0) * y * y +
                        (L2 * L2 / beta0) * ay * ay * ay;
    CHECK(f_eval(y, L1, L2, beta0) == doctest::Approx(want).epsilon(1e-13));
    CHECK(f_eval(-y, L1, L2, beta0) == f_eval(y, L1, L2, beta0));
  }
  CHECK(f_eval(0.0, 0.7, 1.3, 0.2) == doctest::Approx(0.7));
}

TEST_CASE("bound ODE matches the exponential closed form when L2 = 0") {
  const double L1 = 1.5, T = 1.0;
  const auto ode = solve_bound_odes(L1, 0.0, 0.2, T, 1000);
  REQUIRE(ode.t.size() == ode.s.size());
  REQUIRE_FALSE(ode.blew_up);
  double worst = 0, worst_sym = 0;
  for (std::size_t i = 0; i < ode.t.size(); ++i) {
    const double exact = (1.0 + L1) * std::exp(L1 * (T - ode.t[i])) - 1.0;
    worst = std::max(worst, std::fabs(ode.s[i] - exact));
    worst_sym = std::max(worst_sym, std::fabs(ode.l[i] + ode.s[i]));
  }
  CHECK(worst <= 1e-8);
  CHECK(worst_sym <= 1e-12);
  // No cubic tail means no finite barrier.
  CHECK(ode.t1 <= -1e299);
  CHECK(ode.t_star <= -1e299);
}

TEST_CASE("bound ODE integration shows fourth-order convergence") {
  const double L1 = 1.5, T = 1.0;
  auto sup_err = [&](int steps) {
    const auto ode = solve_bound_odes(L1, 0.0, 0.2, T, steps);
    double worst = 0;
    for (std::size_t i = 0; i < ode.t.size(); ++i) {
      const double exact = (1.0 + L1) * std::exp(L1 * (T - ode.t[i])) - 1.0;
      worst = std::max(worst, std::fabs(ode.s[i] - exact));
    }
    return worst;
  };
  const double e_coarse = sup_err(250);
  const double e_fine = sup_err(500);
  const double order = std::log2(e_coarse / e_fine);
  CHECK(order > 3.7);
  CHECK(order < 4.3);
}

TEST_CASE("steep envelopes blow up inside the horizon and report the barrier") {
  const double L1 = 2.0, L2 = 2.0, beta0 = 0.2, T = 1.0;
  const auto ode = solve_bound_odes(L1, L2, beta0, T);
  CHECK(ode.blew_up);
  CHECK(ode.t_star > 0.0);
  CHECK(ode.t_star < T);

  // Independent barrier quadrature: t1 = T - integral_{L1}^{inf} dy / F(y),
  // Simpson on a finite span plus the exact cubic tail.
  const double cap = 1e4;
  const int n = 200000;
  const double h = (cap - L1) / n;
  double integral = 0;
  for (int i = 0; i < n; ++i) {
    const double a = L1 + h * i;
    integral += h / 6.0 *
                (1.0 / f_eval(a, L1, L2, beta0) + 4.0 / f_eval(a + 0.5 * h, L1, L2, beta0) +
                 1.0 / f_eval(a + h, L1, L2, beta0));
  }
  integral += 1.0 / (2.0 * (L2 * L2 / beta0) * cap * cap);  // tail of 1/(c3 y^3)
  const double t1_ref = T - integral;
  CHECK(std::fabs(ode.t1 - t1_ref) <= 1e-4);
  // The RK4 blow-up is observed at, or slightly before, the barrier time.
  CHECK(ode.blow_up_time >= ode.t_star - 0.02);
  CHECK(ode.blow_up_time <= T);
}

TEST_CASE("assumption3 verdict is the conjunction of its parts") {
  for (const char* stem : {"lq_smooth", "lq_coupled", "local_convex"}) {
    const auto sc = testsupport::load_repo_scenario(stem);
    const auto ode = solve_bound_odes(sc.coefficients.L1, sc.coefficients.L2, sc.beta0,
                                      sc.T - sc.t0);
    const auto v = check_assumption3(sc, ode);
    CHECK(v.pass == (v.barrier_ok && v.no_blow_up && v.contraction_ok));
    CHECK(v.contraction_budget == doctest::Approx(1.0 - sc.beta0));
    CHECK(v.contraction_product ==
          doctest::Approx(std::max(v.s0, -v.l0) * sc.coefficients.L3).epsilon(1e-12));
  }
}

TEST_CASE("shipped coupled instances satisfy assumption 3") {
  for (const char* stem : {"lq_smooth", "lq_coupled"}) {
    const auto sc = testsupport::load_repo_scenario(stem);
    const auto rep = run_assumption_checks(sc);
    CHECK(rep.assumption3.pass);
    CHECK(rep.gate_pass);
  }
}

TEST_CASE("lambda advisory follows the declared norm constants") {
  auto sc = testsupport::load_repo_scenario("lq_coupled");
  CHECK_FALSE(lambda_beta(sc).enabled);

  sc.c_beta[2] = 1.5;
  const auto rep = lambda_beta(sc);
  CHECK(rep.enabled);
  const double coupling = std::max(sc.coefficients.L2, sc.coefficients.L3);
  const double want = 1.5 * std::pow(2.0, 3) * (1.0 + std::pow(sc.T, 2.0)) * coupling * coupling;
  CHECK(rep.lambda == doctest::Approx(want).epsilon(1e-12));
  CHECK(rep.beta == 2);
  CHECK(rep.advisory_small == (want < 1.0));

  // Several entries: the report keeps the sharpest one.
  sc.c_beta[1] = 100.0;
  CHECK(lambda_beta(sc).beta == 2);
}

TEST_CASE("monotonicity fit certifies the dissipative local family") {
  const auto sc = testsupport::load_repo_scenario("local_convex");
  const auto rep = check_monotonicity(sc, 64, 7);
  CHECK(rep.applicable);
  CHECK(rep.pass);
  CHECK(rep.beta1 == doctest::Approx(1.0).epsilon(0.05));
  CHECK(rep.beta2 <= 0.05);
  CHECK(rep.beta3 == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.worst_margin >= -1e-9);
  CHECK(rep.samples > 0);
}

TEST_CASE("monotonicity fit rejects an anti-dissipative running cost") {
  auto sc = testsupport::load_repo_scenario("local_convex");
  sc.coefficients.g.cx = -1.0;  // flips the x pairing sign
  const auto rep = check_monotonicity(sc, 64, 7);
  CHECK(rep.applicable);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("monotonicity is advisory outside the local regime") {
  const auto rep = check_monotonicity(testsupport::load_repo_scenario("lq_smooth"), 64, 7);
  CHECK_FALSE(rep.applicable);
}

TEST_CASE("gate follows monotonicity in the local regime and the envelope elsewhere") {
  // The local instance deliberately sits outside the envelope's reach: its
  // bounding ODE blows up, yet the gate passes on the monotonicity fit.
  const auto local = run_assumption_checks(testsupport::load_repo_scenario("local_convex"));
  CHECK(local.monotonicity.applicable);
  CHECK(local.monotonicity.pass);
  CHECK_FALSE(local.assumption3.pass);
  CHECK(local.gate_pass);

  // A general-regime instance with a steep envelope fails the gate outright.
  auto steep = testsupport::load_repo_scenario("lq_coupled");
  steep.coefficients.L1 = 2.0;
  steep.coefficients.L2 = 2.0;
  const auto rep = run_assumption_checks(steep);
  CHECK_FALSE(rep.assumption3.pass);
  CHECK_FALSE(rep.gate_pass);
}

TEST_CASE("assumption report serializes to well-formed json") {
  const auto rep = run_assumption_checks(testsupport::load_repo_scenario("lq_smooth"));
  const auto j = nlohmann::json::parse(assumption_report_json(rep));
  CHECK(j.contains("gate_pass"));
  CHECK(j["gate_pass"].get<bool>() == rep.gate_pass);
  CHECK(j.contains("assumption3"));
  CHECK(j["assumption3"]["pass"].get<bool>() == rep.assumption3.pass);
  CHECK(j.contains("monotonicity"));
  CHECK(j.contains("bound_ode"));
}
