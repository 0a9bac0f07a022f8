#pragma once

#include <functional>

namespace fbcontrol {

/// First derivatives of a coefficient in the (x, y, z) slots.
struct Gradient3 {
  double x = 0, y = 0, z = 0;
};

/// Symmetric second derivatives in the (x, y, z) slots.
struct Hessian3 {
  double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0;
};

using CoefficientFn = std::function<double(double t, double x, double y, double z, double u)>;

/// One coefficient of the controlled system together with its derivative
/// oracles.  The oracles are model-supplied exact functions; they are
/// cross-checked against finite differences by validate_derivatives, never
/// replaced by them.  du may be empty when the model declares no control
/// derivative.
struct CoefficientFunction {
  CoefficientFn value;
  CoefficientFn dx, dy, dz;
  CoefficientFn dxx, dxy, dxz, dyy, dyz, dzz;
  CoefficientFn du;

  double operator()(double t, double x, double y, double z, double u) const {
    return value(t, x, y, z, u);
  }
  Gradient3 gradient(double t, double x, double y, double z, double u) const {
    return {dx(t, x, y, z, u), dy(t, x, y, z, u), dz(t, x, y, z, u)};
  }
  Hessian3 hessian(double t, double x, double y, double z, double u) const {
    return {dxx(t, x, y, z, u), dxy(t, x, y, z, u), dxz(t, x, y, z, u),
            dyy(t, x, y, z, u), dyz(t, x, y, z, u), dzz(t, x, y, z, u)};
  }
  bool has_control_derivative() const { return static_cast<bool>(du); }
};

struct TerminalFunction {
  std::function<double(double)> value;
  std::function<double(double)> dx;
  std::function<double(double)> dxx;
};

/// Drift b, diffusion sigma, running cost g and terminal cost phi with the
/// declared Lipschitz groups:
///   L1 bounds the x sensitivity of b and sigma and the full (x,y,z)
///      sensitivity of g, plus phi;
///   L2 bounds the (y,z) sensitivity of b and the y sensitivity of sigma;
///   L3 bounds the z sensitivity of sigma.
struct CoefficientSet {
  CoefficientFunction b, sigma, g;
  TerminalFunction phi;
  double L1 = 0, L2 = 0, L3 = 0;

  bool has_control_derivatives() const {
    return b.has_control_derivative() && sigma.has_control_derivative() &&
           g.has_control_derivative();
  }
};

/// Built-in coefficient form:
///   c0 + ct*t + cx*x + cy*y + cz*z + cu*u
///   + amp * sin(wx*x + wy*y + wz*z + wu*u + phase)
struct LinearSineParams {
  double c0 = 0, ct = 0, cx = 0, cy = 0, cz = 0, cu = 0;
  double amp = 0, wx = 0, wy = 0, wz = 0, wu = 0, phase = 0;
  bool operator==(const LinearSineParams&) const = default;
};

/// Built-in terminal form: f0 + f1*x + f2*x^2 + amp * sin(w*x + phase)
struct TerminalParams {
  double f0 = 0, f1 = 0, f2 = 0;
  double amp = 0, w = 0, phase = 0;
  bool operator==(const TerminalParams&) const = default;
};

struct CoefficientParams {
  LinearSineParams b, sigma, g;
  TerminalParams phi;
  double L1 = 0, L2 = 0, L3 = 0;
  bool operator==(const CoefficientParams&) const = default;
};

CoefficientFunction make_coefficient(const LinearSineParams& p);
TerminalFunction make_terminal(const TerminalParams& p);
CoefficientSet make_coefficient_set(const CoefficientParams& p);

}
