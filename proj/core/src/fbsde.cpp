#include "fbcontrol/fbsde.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "fbcontrol/algebra.hpp"
#include "fbcontrol/errors.hpp"
#include "fbcontrol/log.hpp"
#include "fbcontrol/parallel.hpp"
#include "fbcontrol/regression.hpp"
#include "fbcontrol/rng.hpp"

namespace fbcontrol {

namespace {

void init_bundle(TrajectoryBundle& b, const Scenario& sc, SimulationMode mode) {
  b.paths = sc.montecarlo.paths;
  b.nodes = sc.grid.nt + 1;
  b.t0 = sc.t0;
  b.T = sc.T;
  b.dt = sc.dt();
  b.mode = mode;
  const std::size_t total = static_cast<std::size_t>(b.paths) * static_cast<std::size_t>(b.nodes);
  b.x.assign(total, 0.0);
  b.y.assign(total, 0.0);
  b.z.assign(total, 0.0);
  b.u.assign(total, 0.0);
  b.dw.assign(static_cast<std::size_t>(b.paths) * static_cast<std::size_t>(b.nodes - 1), 0.0);
  b.path_cost.assign(static_cast<std::size_t>(b.paths), 0.0);
  b.y_residual.assign(static_cast<std::size_t>(b.paths), 0.0);
}

/// Backward pass over one stored path: realized value and its worst gap
/// against the stored Y channel.
void realized_backward(const CoefficientSet& cs, const TrajectoryBundle& b, int path,
                       double* cost_out, double* residual_out) {
  const int n = b.nodes - 1;
  double acc = cs.phi.value(b.x[b.at(path, n)]);
  double residual = std::fabs(acc - b.y[b.at(path, n)]);
  for (int k = n - 1; k >= 0; --k) {
    const std::size_t i = b.at(path, k);
    const double t = b.t0 + b.dt * k;
    acc += cs.g.value(t, b.x[i], b.y[i], b.z[i], b.u[i]) * b.dt - b.z[i] * b.dw[static_cast<std::size_t>(path) * (b.nodes - 1) + k];
    residual = std::max(residual, std::fabs(acc - b.y[i]));
  }
  *cost_out = acc;
  *residual_out = residual;
}

}  // namespace

TrajectoryBundle simulate_feedback(const Scenario& sc, const ValueField& field,
                                   unsigned threads) {
  const CoefficientSet cs = sc.coefficient_set();
  TrajectoryBundle b;
  init_bundle(b, sc, SimulationMode::feedback);
  const int n = b.nodes - 1;
  const double sqdt = std::sqrt(b.dt);

  FixedPointOptions fp;
  fp.tol = sc.tolerances.fixed_point;

  std::atomic<long long> clamped{0};

  parallel_for(static_cast<std::size_t>(b.paths), threads, [&](std::size_t path) {
    NormalStream stream(sc.montecarlo.seed, path);
    long long my_clamped = 0;
    double x = sc.x0;
    for (int k = 0; k <= n; ++k) {
      const std::size_t i = b.at(static_cast<int>(path), k);
      const double t = b.t0 + b.dt * k;
      b.x[i] = x;

      if (k == n) {
        // Terminal data is exact; the last interval's (z, u) repeat below.
        b.y[i] = cs.phi.value(x);
        b.z[i] = b.z[i - 1];
        b.u[i] = b.u[i - 1];
        break;
      }

      const bool outside = x < field.xmin || x > field.xmax;
      if (outside) ++my_clamped;
      const double xc = std::clamp(x, field.xmin, field.xmax);

      const double y = field.interp(t, xc);
      const double p = field.interp_wx(t, xc);
      const double u = feedback_policy(sc, field, t, xc);

      // Warm start the algebra solve from the stored node value.
      const int il = std::clamp(static_cast<int>(std::lround((t - field.t0) / field.dt)), 0,
                                field.nt - 1);
      const int jl = std::clamp(static_cast<int>(std::lround((xc - field.xmin) / field.dx)), 0,
                                field.nx - 1);
      FixedPointOptions fp_local = fp;
      fp_local.initial = field.v[field.index(il, jl)];
      const double z = solve_v(cs, t, xc, y, p, u, sc.beta0, fp_local).value;

      b.y[i] = y;
      b.z[i] = z;
      b.u[i] = u;

      const double dw = sqdt * stream.next();
      b.dw[path * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)] = dw;
      // The dynamics always run on the true state; clamping is only a
      // read-side device for the tableau lookups.
      x += cs.b.value(t, x, y, z, u) * b.dt + cs.sigma.value(t, x, y, z, u) * dw;
    }
    double cost_v = 0, res_v = 0;
    realized_backward(cs, b, static_cast<int>(path), &cost_v, &res_v);
    b.path_cost[path] = cost_v;
    b.y_residual[path] = res_v;
    clamped.fetch_add(my_clamped, std::memory_order_relaxed);
  });

  b.out_of_box = static_cast<int>(clamped.load());
  const double frac = static_cast<double>(b.out_of_box) /
                      (static_cast<double>(b.paths) * static_cast<double>(n));
  if (frac > sc.montecarlo.out_of_box_cap)
    throw NumericError("simulate_feedback: " + std::to_string(100.0 * frac) +
                       "% of node visits left the grid box (cap " +
                       std::to_string(100.0 * sc.montecarlo.out_of_box_cap) + "%)");
  FBC_LOG_INFO("feedback simulation: %d paths, %d steps, %.3f%% clamped", b.paths, n,
               100.0 * frac);
  return b;
}

TrajectoryBundle simulate_picard(const Scenario& sc, const std::vector<double>& control_per_step,
                                 unsigned threads) {
  const CoefficientSet cs = sc.coefficient_set();
  TrajectoryBundle b;
  init_bundle(b, sc, SimulationMode::picard);
  const int n = b.nodes - 1;
  const int paths = b.paths;
  const double sqdt = std::sqrt(b.dt);

  if (control_per_step.empty())
    throw InputError("simulate_picard: control schedule is empty");
  if (control_per_step.size() != 1 && control_per_step.size() != static_cast<std::size_t>(n))
    throw InputError("simulate_picard: control schedule must have 1 or nt entries");
  auto control_at = [&](int k) {
    return control_per_step.size() == 1 ? control_per_step[0]
                                        : control_per_step[static_cast<std::size_t>(k)];
  };

  // Draw every increment once; sweeps reuse them so the fixed point is over
  // path functionals, not fresh noise.
  parallel_for(static_cast<std::size_t>(paths), threads, [&](std::size_t path) {
    NormalStream stream(sc.montecarlo.seed, path);
    for (int k = 0; k < n; ++k)
      b.dw[path * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)] = sqdt * stream.next();
    for (int k = 0; k <= n; ++k) b.u[b.at(static_cast<int>(path), k)] = control_at(std::min(k, n - 1));
  });

  std::vector<double> y_prev(b.y.size(), 0.0), z_prev(b.z.size(), 0.0);
  std::vector<double> feature(static_cast<std::size_t>(paths));
  std::vector<double> target(static_cast<std::size_t>(paths));
  std::vector<double> target_z(static_cast<std::size_t>(paths));

  double last_delta = std::numeric_limits<double>::infinity();
  int rising = 0;
  bool damped = false;

  for (int sweep = 1; sweep <= sc.montecarlo.picard_max_sweeps; ++sweep) {
    // Forward pass under the current (Y, Z) guess.
    parallel_for(static_cast<std::size_t>(paths), threads, [&](std::size_t path) {
      double x = sc.x0;
      for (int k = 0; k <= n; ++k) {
        const std::size_t i = b.at(static_cast<int>(path), k);
        b.x[i] = x;
        if (k == n) break;
        const double t = b.t0 + b.dt * k;
        const double dw = b.dw[path * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)];
        x += cs.b.value(t, x, y_prev[i], z_prev[i], b.u[i]) * b.dt +
             cs.sigma.value(t, x, y_prev[i], z_prev[i], b.u[i]) * dw;
      }
    });

    // Backward regression pass.
    PolynomialRegression proj_y(sc.montecarlo.regression_degree);
    PolynomialRegression proj_z(sc.montecarlo.regression_degree);
    for (int path = 0; path < paths; ++path) {
      const std::size_t i = b.at(path, n);
      b.y[i] = cs.phi.value(b.x[i]);
    }
    for (int k = n - 1; k >= 0; --k) {
      const double t = b.t0 + b.dt * k;
      for (int path = 0; path < paths; ++path) {
        feature[static_cast<std::size_t>(path)] = b.x[b.at(path, k)];
        target[static_cast<std::size_t>(path)] = b.y[b.at(path, k + 1)];
      }
      proj_y.fit(feature, target);

      // Martingale-increment regression with the projected value as control
      // variate: the estimand is unchanged and the residual noise scales
      // with sqrt(dt) instead of 1.
      for (int path = 0; path < paths; ++path) {
        const double resid = b.y[b.at(path, k + 1)] - proj_y.evaluate(feature[static_cast<std::size_t>(path)]);
        const double dw = b.dw[static_cast<std::size_t>(path) * static_cast<std::size_t>(n) +
                               static_cast<std::size_t>(k)];
        target_z[static_cast<std::size_t>(path)] = resid * dw / b.dt;
      }
      proj_z.fit(feature, target_z);

      for (int path = 0; path < paths; ++path) {
        const std::size_t i = b.at(path, k);
        const double xk = feature[static_cast<std::size_t>(path)];
        const double yk_cond = proj_y.evaluate(xk);
        const double zk = proj_z.evaluate(xk);
        b.z[i] = zk;
        b.y[i] = yk_cond + cs.g.value(t, xk, yk_cond, zk, b.u[i]) * b.dt;
      }
    }

    // Sweep movement in sup norm over every stored node.
    double delta = 0;
    for (std::size_t i = 0; i < b.y.size(); ++i) {
      delta = std::max(delta, std::fabs(b.y[i] - y_prev[i]));
      delta = std::max(delta, std::fabs(b.z[i] - z_prev[i]));
    }
    b.picard_sweeps = sweep;
    b.picard_delta = delta;
    FBC_LOG_DEBUG("picard sweep %d: delta %.3e%s", sweep, delta, damped ? " (damped)" : "");

    if (delta <= sc.tolerances.fixed_point) break;

    if (delta > last_delta) {
      if (++rising >= 3)
        throw PicardDivergence("simulate_picard: sweep deltas rose three times in a row",
                               sweep, delta);
    } else {
      rising = 0;
    }
    damped = last_delta < std::numeric_limits<double>::infinity() && delta > 0.9 * last_delta;
    if (damped) {
      for (std::size_t i = 0; i < b.y.size(); ++i) {
        b.y[i] = 0.5 * (b.y[i] + y_prev[i]);
        b.z[i] = 0.5 * (b.z[i] + z_prev[i]);
      }
    }
    last_delta = delta;
    y_prev = b.y;
    z_prev = b.z;
  }

  parallel_for(static_cast<std::size_t>(paths), threads, [&](std::size_t path) {
    double cost_v = 0, res_v = 0;
    realized_backward(cs, b, static_cast<int>(path), &cost_v, &res_v);
    b.path_cost[path] = cost_v;
    b.y_residual[path] = res_v;
  });
  return b;
}

CostEstimate cost(const TrajectoryBundle& bundle) {
  CostEstimate est;
  est.paths = bundle.paths;
  double mean = 0;
  for (double c : bundle.path_cost) mean += c;
  mean /= static_cast<double>(bundle.paths);
  double var = 0;
  for (double c : bundle.path_cost) var += (c - mean) * (c - mean);
  var /= std::max(1.0, static_cast<double>(bundle.paths - 1));
  est.mean = mean;
  est.std_error = std::sqrt(var / static_cast<double>(bundle.paths));
  return est;
}

DppResidual dpp_consistency(const Scenario& sc, const TrajectoryBundle& bundle) {
  const CoefficientSet cs = sc.coefficient_set();
  DppResidual r;
  const int n = bundle.nodes - 1;
  double total = 0;
  for (int path = 0; path < bundle.paths; ++path) {
    // A path that ever reads the tableau through the clamp carries that
    // clamp through its whole backward tail; the comparison is only
    // meaningful for paths that stayed inside the box.
    bool inside = true;
    for (int k = 0; k <= n && inside; ++k) {
      const double x = bundle.x[bundle.at(path, k)];
      inside = x >= sc.grid.xmin && x <= sc.grid.xmax;
    }
    if (!inside) {
      ++r.excluded_paths;
      continue;
    }
    double acc = cs.phi.value(bundle.x[bundle.at(path, n)]);
    for (int k = n - 1; k >= 0; --k) {
      const std::size_t i = bundle.at(path, k);
      const double t = bundle.t0 + bundle.dt * k;
      acc += cs.g.value(t, bundle.x[i], bundle.y[i], bundle.z[i], bundle.u[i]) * bundle.dt -
             bundle.z[i] * bundle.dw[static_cast<std::size_t>(path) * n + static_cast<std::size_t>(k)];
      const double gap = std::fabs(acc - bundle.y[i]);
      r.max_gap = std::max(r.max_gap, gap);
      total += gap;
      ++r.samples;
    }
  }
  r.mean_gap = r.samples > 0 ? total / r.samples : 0.0;
  return r;
}

}
