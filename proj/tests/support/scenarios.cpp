#include "support/scenarios.hpp"

#include <cmath>

#include "fbcontrol/scenario.hpp"

#ifndef FBC_SCENARIO_DIR
#error "FBC_SCENARIO_DIR must point at the shipped scenario files"
#endif

namespace testsupport {

using fbcontrol::Scenario;

Scenario load_repo_scenario(const std::string& stem) {
  return fbcontrol::load_scenario(std::string(FBC_SCENARIO_DIR) + "/" + stem + ".fbc");
}

namespace {

Scenario bare(const std::string& name, int nt, int nx, double xmin, double xmax) {
  Scenario sc;
  sc.name = name;
  sc.T = 1.0;
  sc.t0 = 0.0;
  sc.x0 = 0.5 * (xmin + xmax);
  sc.beta0 = 0.2;
  sc.regime = fbcontrol::Regime::general;
  sc.controls.points = {0.0};
  sc.controls.convex = false;
  sc.grid = {nt, nx, xmin, xmax};
  sc.montecarlo.paths = 512;
  sc.montecarlo.seed = 91;
  return sc;
}

}  // namespace

Scenario zero_scenario(int nt, int nx) {
  Scenario sc = bare("zero", nt, nx, -1.0, 1.0);
  sc.coefficients.phi.f2 = 1.0;
  sc.coefficients.L1 = 2.0;  // phi slope on the box
  sc.validate();
  return sc;
}

Scenario constant_cost_scenario(int nt, int nx) {
  Scenario sc = bare("unit_cost", nt, nx, -1.0, 1.0);
  sc.coefficients.phi.f2 = 1.0;
  sc.coefficients.g.c0 = 1.0;
  sc.coefficients.L1 = 2.0;
  sc.validate();
  return sc;
}

Scenario heat_sine_scenario(int nt, int nx, double s0) {
  const double pi = std::acos(-1.0);
  Scenario sc = bare("heat_sine", nt, nx, -pi, pi);
  sc.x0 = 0.4;
  sc.coefficients.sigma.c0 = s0;
  sc.coefficients.phi.amp = 1.0;
  sc.coefficients.phi.w = 1.0;
  sc.coefficients.L1 = 1.0;
  sc.validate();
  return sc;
}

Scenario small_lq_scenario() {
  Scenario sc = load_repo_scenario("lq_smooth");
  sc.name = "lq_small";
  sc.grid.nt = 100;
  sc.grid.nx = 100;
  sc.montecarlo.paths = 2048;
  sc.validate();
  return sc;
}

Scenario gauge_scenario(double phi_offset) {
  Scenario sc = bare("gauge", 100, 100, -3.0, 3.0);
  sc.x0 = 0.3;
  sc.coefficients.b.cx = 0.2;
  sc.coefficients.sigma.c0 = 0.2;
  sc.coefficients.sigma.cx = 0.02;
  sc.coefficients.g.cx = 0.2;
  sc.coefficients.g.cu = 0.5;
  sc.coefficients.phi = {phi_offset, 0.2, 0.5, 0, 0, 0};
  sc.coefficients.L1 = 3.3;
  sc.controls.points = {-1.0, -0.5, 0.0, 0.5, 1.0};
  sc.controls.convex = true;
  sc.controls.box_lo = -1.0;
  sc.controls.box_hi = 1.0;
  sc.montecarlo.paths = 2048;
  sc.montecarlo.seed = 20260816;
  sc.validate();
  return sc;
}

}  // namespace testsupport
