#include "fbcontrol/coefficients.hpp"

#include <cmath>

namespace fbcontrol {

CoefficientFunction make_coefficient(const LinearSineParams& p) {
  CoefficientFunction f;

  f.value = [p](double t, double x, double y, double z, double u) {
    double v = p.c0 + p.ct * t + p.cx * x + p.cy * y + p.cz * z + p.cu * u;
    if (p.amp != 0.0) v += p.amp * std::sin(p.wx * x + p.wy * y + p.wz * z + p.wu * u + p.phase);
    return v;
  };

  // First derivatives: the sine rides on (x, y, z, u) only.
  auto first = [p](double weight, double coeff) {
    return [p, weight, coeff](double, double x, double y, double z, double u) {
      double v = coeff;
      if (p.amp != 0.0)
        v += p.amp * weight * std::cos(p.wx * x + p.wy * y + p.wz * z + p.wu * u + p.phase);
      return v;
    };
  };
  f.dx = first(p.wx, p.cx);
  f.dy = first(p.wy, p.cy);
  f.dz = first(p.wz, p.cz);
  f.du = first(p.wu, p.cu);

  auto second = [p](double wa, double wb) {
    return [p, wa, wb](double, double x, double y, double z, double u) {
      if (p.amp == 0.0) return 0.0;
      return -p.amp * wa * wb * std::sin(p.wx * x + p.wy * y + p.wz * z + p.wu * u + p.phase);
    };
  };
  f.dxx = second(p.wx, p.wx);
  f.dxy = second(p.wx, p.wy);
  f.dxz = second(p.wx, p.wz);
  f.dyy = second(p.wy, p.wy);
  f.dyz = second(p.wy, p.wz);
  f.dzz = second(p.wz, p.wz);

  return f;
}

TerminalFunction make_terminal(const TerminalParams& p) {
  TerminalFunction f;
  f.value = [p](double x) {
    double v = p.f0 + p.f1 * x + p.f2 * x * x;
    if (p.amp != 0.0) v += p.amp * std::sin(p.w * x + p.phase);
    return v;
  };
  f.dx = [p](double x) {
    double v = p.f1 + 2.0 * p.f2 * x;
    if (p.amp != 0.0) v += p.amp * p.w * std::cos(p.w * x + p.phase);
    return v;
  };
  f.dxx = [p](double x) {
    double v = 2.0 * p.f2;
    if (p.amp != 0.0) v -= p.amp * p.w * p.w * std::sin(p.w * x + p.phase);
    return v;
  };
  return f;
}

CoefficientSet make_coefficient_set(const CoefficientParams& p) {
  CoefficientSet cs;
  cs.b = make_coefficient(p.b);
  cs.sigma = make_coefficient(p.sigma);
  cs.g = make_coefficient(p.g);
  cs.phi = make_terminal(p.phi);
  cs.L1 = p.L1;
  cs.L2 = p.L2;
  cs.L3 = p.L3;
  return cs;
}

}
