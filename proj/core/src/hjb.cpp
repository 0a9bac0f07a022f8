#include "fbcontrol/hjb.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "fbcontrol/algebra.hpp"
#include "fbcontrol/errors.hpp"
#include "fbcontrol/log.hpp"
#include "fbcontrol/parallel.hpp"

namespace fbcontrol {

namespace {

double interp_table(const std::vector<double>& table, const ValueField& f, double t, double x) {
  const double tc = std::clamp(t, f.t0, f.T);
  const double xc = std::clamp(x, f.xmin, f.xmax);
  const double ti = (tc - f.t0) / f.dt;
  const double xi = (xc - f.xmin) / f.dx;
  const int i0 = std::clamp(static_cast<int>(ti), 0, f.nt - 2);
  const int j0 = std::clamp(static_cast<int>(xi), 0, f.nx - 2);
  // Clamp the fractional parts so extrapolation never happens.
  const double a = std::clamp(ti - i0, 0.0, 1.0);
  const double b = std::clamp(xi - j0, 0.0, 1.0);
  const int i1 = i0 + 1;
  const int j1 = j0 + 1;
  const double w00 = table[f.index(i0, j0)];
  const double w01 = table[f.index(i0, j1)];
  const double w10 = table[f.index(i1, j0)];
  const double w11 = table[f.index(i1, j1)];
  return (1 - a) * ((1 - b) * w00 + b * w01) + a * ((1 - b) * w10 + b * w11);
}

}  // namespace

double ValueField::interp(double t, double x) const { return interp_table(w, *this, t, x); }
double ValueField::interp_wx(double t, double x) const { return interp_table(wx, *this, t, x); }
double ValueField::interp_wxx(double t, double x) const { return interp_table(wxx, *this, t, x); }

namespace {

/// Fills the finite-difference rows for one time level: central differences
/// inside; at the edges a three-point one-sided first difference and the
/// curvature copied from the adjacent interior node.  Both edge rules are
/// exact for quadratics, so boundary columns do not leak first-order error
/// into the sweep.
void fill_difference_rows(ValueField& f, int level) {
  const int nx = f.nx;
  const double dx = f.dx;
  const std::size_t base = f.index(level, 0);
  const double* w = f.w.data() + base;
  double* wx = f.wx.data() + base;
  double* wxx = f.wxx.data() + base;

  for (int j = 1; j < nx - 1; ++j) {
    wx[j] = (w[j + 1] - w[j - 1]) / (2.0 * dx);
    wxx[j] = (w[j + 1] - 2.0 * w[j] + w[j - 1]) / (dx * dx);
  }
  wx[0] = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * dx);
  wx[nx - 1] = (3.0 * w[nx - 1] - 4.0 * w[nx - 2] + w[nx - 3]) / (2.0 * dx);
  wxx[0] = wxx[1];
  wxx[nx - 1] = wxx[nx - 2];
}

struct LevelScanResult {
  double step_value = 0;   // min_u G at the node
  double sigma_abs = 0;    // |sigma| at the argmin, for the CFL ledger
  int iterations = 0;
  double residual = 0;
};

}  // namespace

HjbSolution solve_hjb(const Scenario& sc, unsigned threads) {
  const auto start = std::chrono::steady_clock::now();
  const CoefficientSet cs = sc.coefficient_set();
  const auto& pts = sc.controls.points;

  HjbSolution out;
  ValueField& f = out.field;
  f.nt = sc.grid.nt + 1;
  f.nx = sc.grid.nx + 1;
  f.t0 = sc.t0;
  f.T = sc.T;
  f.xmin = sc.grid.xmin;
  f.xmax = sc.grid.xmax;
  f.dt = sc.dt();
  f.dx = sc.dx();
  const std::size_t total = static_cast<std::size_t>(f.nt) * static_cast<std::size_t>(f.nx);
  f.w.assign(total, 0.0);
  f.wx.assign(total, 0.0);
  f.wxx.assign(total, 0.0);
  f.v.assign(total, 0.0);
  f.u_index.assign(total, 0);

  FixedPointOptions fp;
  fp.tol = sc.tolerances.fixed_point;

  const double contraction_budget = 1.0 - sc.beta0;
  const double L3 = cs.L3;

  for (int j = 0; j < f.nx; ++j) f.w[f.index(f.nt - 1, j)] = cs.phi.value(f.x_at(j));

  std::vector<LevelScanResult> row(static_cast<std::size_t>(f.nx));
  HjbDiagnostics& diag = out.diagnostics;

  for (int level = f.nt - 1; level >= 0; --level) {
    fill_difference_rows(f, level);
    const double t = f.time_at(level);

    parallel_for(static_cast<std::size_t>(f.nx), threads, [&](std::size_t js) {
      const int j = static_cast<int>(js);
      const std::size_t idx = f.index(level, j);
      const double x = f.x_at(j);
      const double wv = f.w[idx];
      const double p = f.wx[idx];
      const double a = f.wxx[idx];

      const double margin = std::fabs(p) * L3 - contraction_budget;
      if (margin > 1e-12)
        throw AlgebraMarginViolation(
            "hjb: |W_x|*L3 exceeded the contraction budget at t = " + std::to_string(t) +
                ", x = " + std::to_string(x),
            t, x, margin);

      LevelScanResult best;
      int best_u = 0;
      double best_v = 0;
      bool first = true;
      int iter_max = 0;
      double res_max = 0;
      for (std::size_t ui = 0; ui < pts.size(); ++ui) {
        const GeneratorValue gv = generator(cs, t, x, wv, p, a, pts[ui], sc.beta0, fp);
        iter_max = std::max(iter_max, gv.v.iterations);
        res_max = std::max(res_max, gv.v.residual);
        if (first || gv.value < best.step_value) {
          first = false;
          best.step_value = gv.value;
          best.sigma_abs = std::fabs(gv.sigma_at_v);
          best_u = static_cast<int>(ui);
          best_v = gv.v.value;
        }
      }
      best.iterations = iter_max;
      best.residual = res_max;
      row[js] = best;
      f.u_index[idx] = best_u;
      f.v[idx] = best_v;
    });

    // Serial reductions keep the diagnostics thread-count independent.
    double sigma_max = 0;
    for (const auto& r : row) {
      sigma_max = std::max(sigma_max, r.sigma_abs);
      diag.picard_iterations_max = std::max(diag.picard_iterations_max, r.iterations);
      diag.picard_residual_max = std::max(diag.picard_residual_max, r.residual);
    }
    const double cfl = f.dt * sigma_max * sigma_max / (f.dx * f.dx);
    diag.cfl_ratio = std::max(diag.cfl_ratio, cfl);
    if (cfl > sc.tolerances.cfl_safety) {
      const double required = sc.tolerances.cfl_safety * f.dx * f.dx /
                              std::max(sigma_max * sigma_max, 1e-300);
      throw CflViolation("hjb: explicit step too large at level " + std::to_string(level) +
                             " (ratio " + std::to_string(cfl) + ")",
                         required, f.dt);
    }

    if (level > 0) {
      for (int j = 0; j < f.nx; ++j)
        f.w[f.index(level - 1, j)] =
            f.w[f.index(level, j)] + f.dt * row[static_cast<std::size_t>(j)].step_value;
    }
  }

  for (const double v : f.w) diag.max_abs_w = std::max(diag.max_abs_w, std::fabs(v));
  diag.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                           start)
                     .count();
  FBC_LOG_INFO("hjb: %dx%d grid solved, cfl %.3f, max|W| %.4g, %.1f ms", f.nt, f.nx,
               diag.cfl_ratio, diag.max_abs_w, diag.wall_ms);
  return out;
}

double feedback_policy(const Scenario& sc, const ValueField& field, double t, double x) {
  const double tc = std::clamp(t, field.t0, field.T);
  const double xc = std::clamp(x, field.xmin, field.xmax);
  const int i = std::clamp(static_cast<int>(std::lround((tc - field.t0) / field.dt)), 0,
                           field.nt - 1);
  const int j = std::clamp(static_cast<int>(std::lround((xc - field.xmin) / field.dx)), 0,
                           field.nx - 1);
  return sc.controls.points[static_cast<std::size_t>(field.u_index[field.index(i, j)])];
}

OrderEstimate refine_and_estimate_order(const Scenario& sc, RefinementMode mode,
                                        unsigned threads) {
  Scenario coarse = sc, mid = sc, fine = sc;
  switch (mode) {
    case RefinementMode::time:
      mid.grid.nt *= 2;
      fine.grid.nt *= 4;
      break;
    case RefinementMode::space: {
      // A long time grid pins the temporal error so the spatial part is the
      // only thing that moves between the three solves.
      const int nt_big = sc.grid.nt * 16;
      coarse.grid.nt = mid.grid.nt = fine.grid.nt = nt_big;
      coarse.grid.nx = std::max(8, sc.grid.nx / 4);
      mid.grid.nx = std::max(16, sc.grid.nx / 2);
      if (mid.grid.nx >= fine.grid.nx)
        throw InputError(
            "hjb: spatial refinement needs nx >= 32 so the three levels stay distinct");
      break;
    }
    case RefinementMode::joint:
      coarse.grid.nx = std::max(8, sc.grid.nx / 2);
      mid.grid.nt *= 4;
      fine.grid.nt *= 16;
      fine.grid.nx *= 2;
      break;
  }

  const ValueField fc = solve_hjb(coarse, threads).field;
  const ValueField fm = solve_hjb(mid, threads).field;
  const ValueField ff = solve_hjb(fine, threads).field;

  // Probe lattice strictly inside the domain, on eighths of both axes: for
  // grids divisible by 8 (the refinement pattern itself) the probes land on
  // shared nodes, so interpolation error does not pollute the order.
  OrderEstimate est;
  for (int a = 1; a <= 7; ++a) {
    const double t = sc.t0 + (sc.T - sc.t0) * a / 8.0;
    for (int b = 1; b <= 7; ++b) {
      const double x = sc.grid.xmin + (sc.grid.xmax - sc.grid.xmin) * b / 8.0;
      const double ref = ff.interp(t, x);
      est.coarse_error = std::max(est.coarse_error, std::fabs(fc.interp(t, x) - ref));
      est.mid_error = std::max(est.mid_error, std::fabs(fm.interp(t, x) - ref));
    }
  }
  est.order = est.mid_error > 0 ? std::log2(est.coarse_error / est.mid_error) : 0.0;
  return est;
}

}
