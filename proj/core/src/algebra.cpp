#include "fbcontrol/algebra.hpp"

#include <cmath>
#include <string>

#include "fbcontrol/errors.hpp"

namespace fbcontrol {

namespace {

constexpr double kDenominatorGuard = 1e-14;

void require_contraction(double p, double L3, double beta0, const char* who) {
  if (!std::isfinite(p)) throw NumericError(std::string(who) + ": non-finite multiplier");
  const double product = std::fabs(p) * L3;
  const double budget = 1.0 - beta0;
  // Equality is allowed: the admissible class is closed at the boundary.
  if (product > budget + 1e-12)
    throw ContractionMarginViolated(
        std::string(who) + ": |p|*L3 = " + std::to_string(product) + " exceeds 1 - beta0 = " +
            std::to_string(budget),
        product - budget);
}

/// Picard loop for maps z -> map(z) with Lipschitz constant |p|*L3 < 1.
template <class Map>
AlgebraSolution picard(const Map& map, const FixedPointOptions& opts, const char* who) {
  AlgebraSolution sol;
  double z = opts.initial;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const double zn = map(z);
    const double delta = std::fabs(zn - z);
    if (opts.trace) opts.trace->push_back(delta);
    z = zn;
    sol.iterations = it;
    if (delta <= opts.tol) {
      sol.value = z;
      sol.residual = std::fabs(z - map(z));
      return sol;
    }
  }
  throw NoConvergence(std::string(who) + ": no convergence after " +
                          std::to_string(opts.max_iter) + " iterations",
                      opts.max_iter, std::fabs(map(z) - z));
}

}  // namespace

AlgebraSolution solve_v(const CoefficientSet& cs, double t, double x, double v, double p,
                        double u, double beta0, const FixedPointOptions& opts) {
  require_contraction(p, cs.L3, beta0, "solve_v");
  return picard([&](double z) { return p * cs.sigma.value(t, x, v, z, u); }, opts, "solve_v");
}

AlgebraSolution solve_delta(const CoefficientSet& cs, double s, double xr, double yr,
                            double zr, double ur, double p, double u, double beta0,
                            const FixedPointOptions& opts) {
  require_contraction(p, cs.L3, beta0, "solve_delta");
  const double sigma_ref = cs.sigma.value(s, xr, yr, zr, ur);
  return picard(
      [&](double d) { return p * (cs.sigma.value(s, xr, yr, zr + d, u) - sigma_ref); }, opts,
      "solve_delta");
}

double k1(const Gradient3& sigma_d, double p, double q) {
  const double den = 1.0 - p * sigma_d.z;
  if (std::fabs(den) < kDenominatorGuard)
    throw SingularDenominator("k1: 1 - p*sigma_z vanished", den);
  return (sigma_d.x * p + sigma_d.y * p * p + q) / den;
}

double quad_form_1pk(const Hessian3& m, double p, double k) {
  // Fixed evaluation order keeps the result bit-stable across call sites.
  return m.xx + 2.0 * p * m.xy + 2.0 * k * m.xz + p * p * m.yy + 2.0 * p * k * m.yz +
         k * k * m.zz;
}

double k2(const Gradient3& sigma_d, const Hessian3& sigma_dd, double p, double big_p,
          double big_q, double k1_value) {
  const double den = 1.0 - p * sigma_d.z;
  if (std::fabs(den) < kDenominatorGuard)
    throw SingularDenominator("k2: 1 - p*sigma_z vanished", den);
  const double linear =
      (p * sigma_d.y + 2.0 * (sigma_d.x + sigma_d.y * p + sigma_d.z * k1_value)) * big_p;
  const double curvature = big_q + p * quad_form_1pk(sigma_dd, p, k1_value);
  return linear / den + curvature / den;
}

double k2_tilde(const Gradient3& sigma_d, const Hessian3& sigma_dd, double p, double w_xx,
                double w_xxx_sigma, double k1_value) {
  return k2(sigma_d, sigma_dd, p, w_xx, w_xxx_sigma, k1_value);
}

GeneratorValue generator(const CoefficientSet& cs, double t, double x, double v, double p,
                         double a, double u, double beta0, const FixedPointOptions& opts) {
  GeneratorValue out;
  out.v = solve_v(cs, t, x, v, p, u, beta0, opts);
  const double z = out.v.value;
  const double bb = cs.b.value(t, x, v, z, u);
  const double ss = cs.sigma.value(t, x, v, z, u);
  const double gg = cs.g.value(t, x, v, z, u);
  out.sigma_at_v = ss;
  out.value = p * bb + 0.5 * a * ss * ss + gg;
  return out;
}

HamiltonianValue hamiltonian_h(const CoefficientSet& cs, const HamiltonianPoint& pt,
                               double beta0, const FixedPointOptions& opts) {
  HamiltonianValue out;
  out.delta = solve_delta(cs, pt.s, pt.xr, pt.yr, pt.zr, pt.ur, pt.p, pt.u, beta0, opts);
  const double z_eff = pt.z + out.delta.value;
  const double bb = cs.b.value(pt.s, pt.x, pt.y, z_eff, pt.u);
  const double ss = cs.sigma.value(pt.s, pt.x, pt.y, z_eff, pt.u);
  const double gg = cs.g.value(pt.s, pt.x, pt.y, z_eff, pt.u);
  const double sigma_ref = cs.sigma.value(pt.s, pt.xr, pt.yr, pt.zr, pt.ur);
  const double diff = ss - sigma_ref;
  out.value = pt.p * bb + pt.q * ss + gg + 0.5 * pt.P * diff * diff;
  return out;
}

double hamiltonian_h1(const CoefficientSet& cs, double s, double xr, double yr, double zr,
                      double ur, double p, double q, double P, double beta0,
                      const FixedPointOptions& opts) {
  HamiltonianPoint pt;
  pt.s = s;
  pt.x = xr; pt.y = yr; pt.z = zr; pt.u = ur;
  pt.p = p; pt.q = q; pt.P = P;
  pt.xr = xr; pt.yr = yr; pt.zr = zr; pt.ur = ur;
  const double h_bar = hamiltonian_h(cs, pt, beta0, opts).value;
  const double sigma_ref = cs.sigma.value(s, xr, yr, zr, ur);
  return -h_bar + P * sigma_ref * sigma_ref;
}

HprimeValue hamiltonian_hprime(const CoefficientSet& cs, double s, double x, double y,
                               double z, double u, double h, double m, double n) {
  if (!cs.has_control_derivatives())
    throw InputError("hamiltonian_hprime: coefficient set lacks control derivatives");
  HprimeValue out;
  out.value = m * cs.b.value(s, x, y, z, u) + n * cs.sigma.value(s, x, y, z, u) +
              h * cs.g.value(s, x, y, z, u);
  out.du = m * cs.b.du(s, x, y, z, u) + n * cs.sigma.du(s, x, y, z, u) +
           h * cs.g.du(s, x, y, z, u);
  return out;
}

}
