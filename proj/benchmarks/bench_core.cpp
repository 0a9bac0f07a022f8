#include <benchmark/benchmark.h>

#include "fbcontrol/algebra.hpp"
#include "fbcontrol/hjb.hpp"
#include "fbcontrol/regression.hpp"
#include "fbcontrol/rng.hpp"
#include "fbcontrol/scenario.hpp"

namespace {

using namespace fbcontrol;

Scenario bench_scenario() {
  Scenario sc;
  sc.name = "bench";
  sc.T = 1.0;
  sc.x0 = 0.3;
  sc.beta0 = 0.2;
  sc.coefficients.b = {0, 0, 0.2, 0, 0, 0};
  sc.coefficients.sigma = {0.2, 0, 0.02, 0, 0, 0};
  sc.coefficients.g = {0, 0, 0.2, 0.3, 0.2, 0.5};
  sc.coefficients.phi = {0, 0.2, 0.5};
  sc.coefficients.L1 = 3.3;
  sc.coefficients.L2 = 0;
  sc.coefficients.L3 = 0;
  for (int i = 0; i <= 8; ++i) sc.controls.points.push_back(-1.0 + 0.25 * i);
  sc.controls.box_lo = -1;
  sc.controls.box_hi = 1;
  sc.grid = {64, 64, -3, 3};
  sc.montecarlo.paths = 256;
  sc.montecarlo.seed = 7;
  return sc;
}

void BM_solve_v(benchmark::State& state) {
  const Scenario sc = bench_scenario();
  const CoefficientSet cs = sc.coefficient_set();
  double x = 0.1;
  for (auto _ : state) {
    const AlgebraSolution sol = solve_v(cs, 0.5, x, 0.4, 0.8, -1.0, sc.beta0);
    benchmark::DoNotOptimize(sol.value);
    x = (x < 1 ? x + 1e-6 : 0.1);
  }
}
BENCHMARK(BM_solve_v);

void BM_k2(benchmark::State& state) {
  Gradient3 sg{0.02, 0.01, 0.005};
  Hessian3 sh{0.001, 0, 0, 0.002, 0, 0.001};
  double p = 0.8;
  for (auto _ : state) {
    const double k1v = k1(sg, p, 0.4);
    benchmark::DoNotOptimize(k2(sg, sh, p, 1.2, 0.3, k1v));
    p = (p < 0.9 ? p + 1e-7 : 0.8);
  }
}
BENCHMARK(BM_k2);

void BM_hjb_solve(benchmark::State& state) {
  Scenario sc = bench_scenario();
  sc.grid.nt = static_cast<int>(state.range(0));
  sc.grid.nx = 64;
  for (auto _ : state) {
    const HjbSolution sol = solve_hjb(sc);
    benchmark::DoNotOptimize(sol.field.w.data());
  }
}
BENCHMARK(BM_hjb_solve)->Arg(64)->Arg(128);

void BM_regression_fit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::vector<double> x(n), y(n);
  NormalStream rng(42, 0);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.next();
    y[i] = 0.3 + 0.5 * x[i] - 0.2 * x[i] * x[i] + 0.01 * rng.next();
  }
  for (auto _ : state) {
    PolynomialRegression reg(4);
    reg.fit(x, y);
    benchmark::DoNotOptimize(reg.evaluate(0.2));
  }
}
BENCHMARK(BM_regression_fit)->Arg(1024)->Arg(8192);

}  // namespace

BENCHMARK_MAIN();
