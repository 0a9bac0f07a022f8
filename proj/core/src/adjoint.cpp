#include "fbcontrol/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fbcontrol/algebra.hpp"
#include "fbcontrol/errors.hpp"
#include "fbcontrol/log.hpp"
#include "fbcontrol/parallel.hpp"
#include "fbcontrol/regression.hpp"

namespace fbcontrol {

namespace {

struct PathPoint {
  double t, x, y, z, u;
};

PathPoint point_at(const TrajectoryBundle& b, int path, int k) {
  const std::size_t i = b.at(path, k);
  return {b.t0 + b.dt * k, b.x[i], b.y[i], b.z[i], b.u[i]};
}

/// Driver of the first adjoint pair, with the embedded combination resolved
/// from (p, q).  Term order is fixed; callers rely on bit-stable output.
double first_driver(const CoefficientSet& cs, const PathPoint& pt, double p, double q) {
  const Gradient3 bg = cs.b.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
  const Gradient3 sg = cs.sigma.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
  const Gradient3 gg = cs.g.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
  const double K1 = k1(sg, p, q);
  return gg.x + gg.y * p + gg.z * K1 + bg.x * p + bg.y * p * p + bg.z * K1 * p + sg.x * q +
         sg.y * p * q + sg.z * K1 * q;
}

/// Driver of the second adjoint pair given the first pair at the same node.
double second_driver(const CoefficientSet& cs, const PathPoint& pt, double p, double q,
                     double P, double Q) {
  const Gradient3 bg = cs.b.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
  const Gradient3 sg = cs.sigma.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
  const Gradient3 gg = cs.g.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
  const Hessian3 bh = cs.b.hessian(pt.t, pt.x, pt.y, pt.z, pt.u);
  const Hessian3 sh = cs.sigma.hessian(pt.t, pt.x, pt.y, pt.z, pt.u);
  const Hessian3 gh = cs.g.hessian(pt.t, pt.x, pt.y, pt.z, pt.u);

  const double K1 = k1(sg, p, q);
  const double K2 = k2(sg, sh, p, P, Q, K1);
  const double dsv = sg.x + sg.y * p + sg.z * K1;
  const double dbv = bg.x + bg.y * p + bg.z * K1;
  const double hy = gg.y + p * bg.y + q * sg.y;
  const double hz = gg.z + p * bg.z + q * sg.z;
  const Hessian3 hess = {gh.xx + p * bh.xx + q * sh.xx, gh.xy + p * bh.xy + q * sh.xy,
                         gh.xz + p * bh.xz + q * sh.xz, gh.yy + p * bh.yy + q * sh.yy,
                         gh.yz + p * bh.yz + q * sh.yz, gh.zz + p * bh.zz + q * sh.zz};
  return P * (dsv * dsv + 2.0 * dbv + hy) + 2.0 * Q * dsv + quad_form_1pk(hess, p, K1) +
         hz * K2;
}

/// Damped scalar iteration for v = base + dt * driver(v).
template <class Driver>
double implicit_step(double base, double dt, double tol, const Driver& driver, const char* who) {
  double v = base;
  double prev_delta = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 100; ++it) {
    const double vn = base + dt * driver(v);
    const double delta = std::fabs(vn - v);
    if (delta <= tol) return vn;
    if (delta > prev_delta) {
      v = 0.5 * (vn + v);  // moving apart: damp the update
    } else {
      v = vn;
    }
    prev_delta = delta;
  }
  throw NoConvergence(std::string(who) + ": implicit step failed to settle", 100, prev_delta);
}

}  // namespace

AdjointBundle solve_first_adjoint(const Scenario& sc, const TrajectoryBundle& bundle,
                                  unsigned threads) {
  const CoefficientSet cs = sc.coefficient_set();
  const int paths = bundle.paths;
  const int nodes = bundle.nodes;
  const int n = nodes - 1;
  const double dt = bundle.dt;
  const double tol = sc.tolerances.fixed_point;

  AdjointBundle adj;
  adj.paths = paths;
  adj.nodes = nodes;
  const std::size_t total = static_cast<std::size_t>(paths) * static_cast<std::size_t>(nodes);
  adj.p.assign(total, 0.0);
  adj.q.assign(total, 0.0);
  adj.big_p.assign(total, 0.0);
  adj.big_q.assign(total, 0.0);
  adj.k1v.assign(total, 0.0);
  adj.k2v.assign(total, 0.0);

  for (int path = 0; path < paths; ++path)
    adj.p[adj.at(path, n)] = cs.phi.dx(bundle.x[bundle.at(path, n)]);

  PolynomialRegression proj_p(sc.montecarlo.regression_degree);
  PolynomialRegression proj_q(sc.montecarlo.regression_degree);
  std::vector<double> feature(static_cast<std::size_t>(paths));
  std::vector<double> target(static_cast<std::size_t>(paths));

  for (int k = n - 1; k >= 0; --k) {
    for (int path = 0; path < paths; ++path) {
      feature[static_cast<std::size_t>(path)] = bundle.x[bundle.at(path, k)];
      target[static_cast<std::size_t>(path)] = adj.p[adj.at(path, k + 1)];
    }
    proj_p.fit(feature, target);

    for (int path = 0; path < paths; ++path) {
      const double resid = adj.p[adj.at(path, k + 1)] -
                           proj_p.evaluate(feature[static_cast<std::size_t>(path)]);
      const double dw = bundle.dw[static_cast<std::size_t>(path) * n + static_cast<std::size_t>(k)];
      target[static_cast<std::size_t>(path)] = resid * dw / dt;
    }
    proj_q.fit(feature, target);

    parallel_for(static_cast<std::size_t>(paths), threads, [&](std::size_t path) {
      const std::size_t i = adj.at(static_cast<int>(path), k);
      const double x = feature[path];
      const double q = proj_q.evaluate(x);
      const double p_hat = proj_p.evaluate(x);
      const PathPoint pt = point_at(bundle, static_cast<int>(path), k);
      const double p = implicit_step(
          p_hat, dt, tol, [&](double pv) { return first_driver(cs, pt, pv, q); },
          "first adjoint");
      adj.p[i] = p;
      adj.q[i] = q;
      const Gradient3 sg = cs.sigma.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
      adj.k1v[i] = k1(sg, p, q);
    });
  }

  // Interval channels repeat their final interval at the terminal node.
  for (int path = 0; path < paths; ++path) {
    adj.q[adj.at(path, n)] = adj.q[adj.at(path, n - 1)];
    adj.k1v[adj.at(path, n)] = adj.k1v[adj.at(path, n - 1)];
  }

  double bound = 0;
  for (const double v : adj.p) bound = std::max(bound, std::fabs(v));
  adj.p_bound = bound;
  FBC_LOG_INFO("first adjoint: %d paths, max|p| = %.4g", paths, bound);
  return adj;
}

void solve_second_adjoint(const Scenario& sc, const TrajectoryBundle& bundle,
                          AdjointBundle& adj, unsigned threads) {
  const CoefficientSet cs = sc.coefficient_set();
  const int paths = bundle.paths;
  const int n = bundle.nodes - 1;
  const double dt = bundle.dt;
  const double tol = sc.tolerances.fixed_point;

  if (adj.paths != paths || adj.nodes != bundle.nodes)
    throw InputError("solve_second_adjoint: adjoint bundle does not match the trajectories");

  for (int path = 0; path < paths; ++path)
    adj.big_p[adj.at(path, n)] = cs.phi.dxx(bundle.x[bundle.at(path, n)]);

  PolynomialRegression proj_P(sc.montecarlo.regression_degree);
  PolynomialRegression proj_Q(sc.montecarlo.regression_degree);
  std::vector<double> feature(static_cast<std::size_t>(paths));
  std::vector<double> target(static_cast<std::size_t>(paths));

  for (int k = n - 1; k >= 0; --k) {
    for (int path = 0; path < paths; ++path) {
      feature[static_cast<std::size_t>(path)] = bundle.x[bundle.at(path, k)];
      target[static_cast<std::size_t>(path)] = adj.big_p[adj.at(path, k + 1)];
    }
    proj_P.fit(feature, target);

    for (int path = 0; path < paths; ++path) {
      const double resid = adj.big_p[adj.at(path, k + 1)] -
                           proj_P.evaluate(feature[static_cast<std::size_t>(path)]);
      const double dw = bundle.dw[static_cast<std::size_t>(path) * n + static_cast<std::size_t>(k)];
      target[static_cast<std::size_t>(path)] = resid * dw / dt;
    }
    proj_Q.fit(feature, target);

    parallel_for(static_cast<std::size_t>(paths), threads, [&](std::size_t path) {
      const std::size_t i = adj.at(static_cast<int>(path), k);
      const double x = feature[path];
      const double Q = proj_Q.evaluate(x);
      const double P_hat = proj_P.evaluate(x);
      const PathPoint pt = point_at(bundle, static_cast<int>(path), k);
      const double p = adj.p[i];
      const double q = adj.q[i];
      const double P = implicit_step(
          P_hat, dt, tol, [&](double pv) { return second_driver(cs, pt, p, q, pv, Q); },
          "second adjoint");
      adj.big_p[i] = P;
      adj.big_q[i] = Q;
      const Gradient3 sg = cs.sigma.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
      const Hessian3 sh = cs.sigma.hessian(pt.t, pt.x, pt.y, pt.z, pt.u);
      adj.k2v[i] = k2(sg, sh, p, P, Q, adj.k1v[i]);
    });
  }

  for (int path = 0; path < paths; ++path) {
    adj.big_q[adj.at(path, n)] = adj.big_q[adj.at(path, n - 1)];
    adj.k2v[adj.at(path, n)] = adj.k2v[adj.at(path, n - 1)];
  }
}

LocalAdjointBundle solve_local_adjoint(const Scenario& sc, const TrajectoryBundle& bundle,
                                       const AdjointBundle& adj, unsigned threads) {
  (void)adj;  // the triple is solved independently; relations compare later
  const CoefficientSet cs = sc.coefficient_set();
  const int paths = bundle.paths;
  const int nodes = bundle.nodes;
  const int n = nodes - 1;
  const double dt = bundle.dt;

  LocalAdjointBundle loc;
  loc.paths = paths;
  loc.nodes = nodes;
  const std::size_t total = static_cast<std::size_t>(paths) * static_cast<std::size_t>(nodes);
  loc.h.assign(total, 0.0);
  loc.m.assign(total, 0.0);
  loc.n.assign(total, 0.0);

  std::vector<double> m_prev(total, 0.0), n_prev(total, 0.0);
  std::vector<double> feature(static_cast<std::size_t>(paths));
  std::vector<double> target(static_cast<std::size_t>(paths));
  PolynomialRegression proj_m(sc.montecarlo.regression_degree);
  PolynomialRegression proj_n(sc.montecarlo.regression_degree);

  // Forward variational factor under a given (m, n) guess.
  auto forward_pass = [&](const std::vector<double>& m_src, const std::vector<double>& n_src) {
    parallel_for(static_cast<std::size_t>(paths), threads, [&](std::size_t path) {
      double h = 1.0;
      for (int k = 0; k <= n; ++k) {
        const std::size_t i = loc.at(static_cast<int>(path), k);
        loc.h[i] = h;
        if (k == n) break;
        const PathPoint pt = point_at(bundle, static_cast<int>(path), k);
        const Gradient3 bg = cs.b.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
        const Gradient3 sg = cs.sigma.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
        const Gradient3 gg = cs.g.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
        const double dw =
            bundle.dw[path * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)];
        h += (gg.y * h + bg.y * m_src[i] + sg.y * n_src[i]) * dt +
             (gg.z * h + bg.z * m_src[i] + sg.z * n_src[i]) * dw;
      }
    });
  };

  double last_delta = std::numeric_limits<double>::infinity();
  int rising = 0;
  // Relaxation weight on the sweep map.  The two-point structure can carry
  // an alternating mode past unit modulus (reachable horizons put its
  // dominant eigenvalue near -1.35), which plain sweeps cannot damp;
  // averaging with the previous iterate restores the contraction.
  double theta = 1.0;

  for (int sweep = 1; sweep <= sc.montecarlo.picard_max_sweeps; ++sweep) {
    forward_pass(m_prev, n_prev);

    // Backward pair by regression, mirroring the first adjoint pass.
    for (int path = 0; path < paths; ++path) {
      const std::size_t i = loc.at(path, n);
      loc.m[i] = cs.phi.dx(bundle.x[bundle.at(path, n)]) * loc.h[i];
    }
    for (int k = n - 1; k >= 0; --k) {
      for (int path = 0; path < paths; ++path) {
        feature[static_cast<std::size_t>(path)] = bundle.x[bundle.at(path, k)];
        target[static_cast<std::size_t>(path)] = loc.m[loc.at(path, k + 1)];
      }
      proj_m.fit(feature, target);
      for (int path = 0; path < paths; ++path) {
        const double resid = loc.m[loc.at(path, k + 1)] -
                             proj_m.evaluate(feature[static_cast<std::size_t>(path)]);
        const double dw =
            bundle.dw[static_cast<std::size_t>(path) * n + static_cast<std::size_t>(k)];
        target[static_cast<std::size_t>(path)] = resid * dw / dt;
      }
      proj_n.fit(feature, target);

      for (int path = 0; path < paths; ++path) {
        const std::size_t i = loc.at(path, k);
        const double nv = proj_n.evaluate(feature[static_cast<std::size_t>(path)]);
        const double m_hat = proj_m.evaluate(feature[static_cast<std::size_t>(path)]);
        const PathPoint pt = point_at(bundle, path, k);
        const Gradient3 bg = cs.b.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
        const Gradient3 sg = cs.sigma.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
        const Gradient3 gg = cs.g.gradient(pt.t, pt.x, pt.y, pt.z, pt.u);
        const double h = loc.h[i];
        // dm has driver g_x h + b_x m + sigma_x n; implicit in m.
        const double denom = 1.0 - dt * bg.x;
        const double m = std::fabs(denom) > 1e-12
                             ? (m_hat + dt * (gg.x * h + sg.x * nv)) / denom
                             : m_hat + dt * (gg.x * h + bg.x * m_hat + sg.x * nv);
        loc.m[i] = m;
        loc.n[i] = nv;
      }
    }

    if (theta < 1.0) {
      for (std::size_t i = 0; i < total; ++i) {
        loc.m[i] = theta * loc.m[i] + (1.0 - theta) * m_prev[i];
        loc.n[i] = theta * loc.n[i] + (1.0 - theta) * n_prev[i];
      }
    }

    double delta = 0;
    for (std::size_t i = 0; i < total; ++i) {
      delta = std::max(delta, std::fabs(loc.m[i] - m_prev[i]));
      delta = std::max(delta, std::fabs(loc.n[i] - n_prev[i]));
    }
    FBC_LOG_DEBUG("local adjoint sweep %d: delta %.3e (theta %.3f)", sweep, delta, theta);
    if (delta <= sc.tolerances.fixed_point) break;
    if (delta > last_delta) {
      if (theta > 0.26) {
        theta *= 0.5;
        rising = 0;
      } else if (++rising >= 3) {
        throw PicardDivergence("local adjoint: sweep deltas rose three times in a row", sweep,
                               delta);
      }
    } else {
      rising = 0;
    }
    last_delta = delta;
    m_prev = loc.m;
    n_prev = loc.n;
  }

  // Re-derive h from the final pair so the returned triple solves one
  // consistent system.
  forward_pass(loc.m, loc.n);
  for (int path = 0; path < paths; ++path)
    loc.n[loc.at(path, n)] = loc.n[loc.at(path, n - 1)];
  return loc;
}

double local_relation_n(double b_z, double g_z, double sigma_z, double p, double q, double h) {
  const double den = 1.0 - p * sigma_z;
  if (std::fabs(den) < 1e-14)
    throw SingularDenominator("local_relation_n: 1 - p*sigma_z vanished", den);
  return (b_z * p * p + p * g_z + q) * h / den;
}

}
