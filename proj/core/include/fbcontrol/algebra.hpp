#pragma once

#include <vector>

#include "fbcontrol/coefficients.hpp"

namespace fbcontrol {

struct FixedPointOptions {
  double tol = 1e-12;
  int max_iter = 200;
  double initial = 0.0;
  /// When set, receives |z_k - z_{k-1}| per iteration.
  std::vector<double>* trace = nullptr;
};

struct AlgebraSolution {
  double value = 0;
  int iterations = 0;
  double residual = 0;  // |value - map(value)| at exit
};

/// Solves the algebra equation V = p * sigma(t, x, v, V, u) by Picard
/// iteration.  Requires |p| * L3 <= 1 - beta0 (throws
/// ContractionMarginViolated otherwise); throws NoConvergence past max_iter.
AlgebraSolution solve_v(const CoefficientSet& cs, double t, double x, double v, double p,
                        double u, double beta0, const FixedPointOptions& opts = {});

/// Solves Delta = p * (sigma(s, xr, yr, zr + Delta, u) - sigma(s, xr, yr, zr, ur)).
/// Same contraction precondition as solve_v.  Delta(ur) == 0 in one
/// iteration when u == ur.
AlgebraSolution solve_delta(const CoefficientSet& cs, double s, double xr, double yr,
                            double zr, double ur, double p, double u, double beta0,
                            const FixedPointOptions& opts = {});

/// K1 = (1 - p*sigma_z)^{-1} [sigma_x p + sigma_y p^2 + q].
/// Throws SingularDenominator when |1 - p*sigma_z| is below the machine guard.
double k1(const Gradient3& sigma_d, double p, double q);

/// Quadratic form (1, p, k) M (1, p, k)^T evaluated in a fixed term order.
double quad_form_1pk(const Hessian3& m, double p, double k);

/// K2 = (1 - p*sigma_z)^{-1} { p*sigma_y + 2[sigma_x + sigma_y p + sigma_z K1] } P
///    + (1 - p*sigma_z)^{-1} { Q + p * (1,p,K1) D2sigma (1,p,K1)^T }.
double k2(const Gradient3& sigma_d, const Hessian3& sigma_dd, double p, double big_p,
          double big_q, double k1_value);

/// Same combination with the field curvatures in place of the second
/// adjoint: P -> w_xx, Q -> w_xxx * sigma.
double k2_tilde(const Gradient3& sigma_d, const Hessian3& sigma_dd, double p, double w_xx,
                double w_xxx_sigma, double k1_value);

struct GeneratorValue {
  double value = 0;
  AlgebraSolution v;      // algebra solution used in the z slot
  double sigma_at_v = 0;  // diffusion at the solved point, for CFL accounting
};

/// G(t, x, v, p, A, u) = p*b + 0.5*A*sigma^2 + g, all coefficients evaluated
/// at (t, x, v, V, u) with V from solve_v.
GeneratorValue generator(const CoefficientSet& cs, double t, double x, double v, double p,
                         double a, double u, double beta0, const FixedPointOptions& opts = {});

/// Evaluation point for the global Hamiltonian.  (xr, yr, zr, ur) is the
/// reference trajectory point that anchors the Delta equation and the
/// diffusion difference term.
struct HamiltonianPoint {
  double s = 0;
  double x = 0, y = 0, z = 0;
  double u = 0;
  double p = 0, q = 0, P = 0;
  double xr = 0, yr = 0, zr = 0, ur = 0;
};

struct HamiltonianValue {
  double value = 0;
  AlgebraSolution delta;
};

/// H(s,x,y,z,u,p,q,P) = p*b(s,x,y,z+D,u) + q*sigma(s,x,y,z+D,u)
///                    + g(s,x,y,z+D,u)
///                    + 0.5*P*(sigma(s,x,y,z+D,u) - sigma(s,xr,yr,zr,ur))^2
/// with D the solve_delta solution at the reference point.
HamiltonianValue hamiltonian_h(const CoefficientSet& cs, const HamiltonianPoint& pt,
                               double beta0, const FixedPointOptions& opts = {});

/// H1 = -H(s, xr, yr, zr, ur, p, q, P) + P * sigma(s, xr, yr, zr, ur)^2.
double hamiltonian_h1(const CoefficientSet& cs, double s, double xr, double yr, double zr,
                      double ur, double p, double q, double P, double beta0,
                      const FixedPointOptions& opts = {});

struct HprimeValue {
  double value = 0;
  double du = 0;  // control gradient m*b_u + n*sigma_u + h*g_u
};

/// H'(s,x,y,z,u) = m*b + n*sigma + h*g with its control derivative.
/// Throws InputError when the coefficient set lacks control derivatives.
HprimeValue hamiltonian_hprime(const CoefficientSet& cs, double s, double x, double y,
                               double z, double u, double h, double m, double n);

}
