#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace testsupport {

using fbcontrol::CoefficientSet;
using fbcontrol::Gradient3;
using fbcontrol::Hessian3;
using fbcontrol::Scenario;

namespace {

double bisect(const std::function<double(double)>& f) {
  // Expand a bracket around 0 until the sign changes, then halve 200 times.
  double lo = -1.0, hi = 1.0;
  double flo = f(lo), fhi = f(hi);
  int expand = 0;
  while (flo * fhi > 0.0) {
    lo *= 2.0;
    hi *= 2.0;
    flo = f(lo);
    fhi = f(hi);
    if (++expand > 70) throw std::runtime_error("bisect: no sign change found");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if (flo * fm <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double bisect_v(const CoefficientSet& cs, double t, double x, double y, double p, double u) {
  return bisect([&](double z) { return z - p * cs.sigma(t, x, y, z, u); });
}

double bisect_delta(const CoefficientSet& cs, double s, double xr, double yr, double zr,
                    double ur, double p, double u) {
  const double base = cs.sigma(s, xr, yr, zr, ur);
  return bisect([&](double d) { return d - p * (cs.sigma(s, xr, yr, zr + d, u) - base); });
}

std::vector<std::vector<double>> rk4_path(
    const std::function<std::vector<double>(double, const std::vector<double>&)>& f,
    std::vector<double> y0, double t_begin, double t_end, int steps) {
  const std::size_t dim = y0.size();
  const double h = (t_end - t_begin) / steps;
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back(y0);
  std::vector<double> y = std::move(y0), tmp(dim);
  for (int i = 0; i < steps; ++i) {
    const double t = t_begin + h * i;
    const auto k1 = f(t, y);
    for (std::size_t j = 0; j < dim; ++j) tmp[j] = y[j] + 0.5 * h * k1[j];
    const auto k2 = f(t + 0.5 * h, tmp);
    for (std::size_t j = 0; j < dim; ++j) tmp[j] = y[j] + 0.5 * h * k2[j];
    const auto k3 = f(t + 0.5 * h, tmp);
    for (std::size_t j = 0; j < dim; ++j) tmp[j] = y[j] + h * k3[j];
    const auto k4 = f(t + h, tmp);
    for (std::size_t j = 0; j < dim; ++j)
      y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    out.push_back(y);
  }
  return out;
}

QuadraticValueOracle::QuadraticValueOracle(const Scenario& sc, int steps)
    : t0_(sc.t0), T_(sc.T), steps_(steps) {
  const auto& cf = sc.coefficients;
  auto flat = [](const fbcontrol::LinearSineParams& q, bool allow_x_slope) {
    if (q.ct != 0 || q.amp != 0) throw std::runtime_error("oracle: sine/time terms unsupported");
    if (!allow_x_slope && (q.cy != 0 || q.cz != 0 || q.cu != 0))
      throw std::runtime_error("oracle: forward coefficient must be y/z/u-free");
  };
  flat(cf.b, false);
  flat(cf.sigma, false);
  flat(cf.g, true);
  if (cf.phi.amp != 0) throw std::runtime_error("oracle: terminal sine unsupported");

  const double b0 = cf.b.c0, bx = cf.b.cx;
  const double s0 = cf.sigma.c0, sx = cf.sigma.cx;
  const double g0 = cf.g.c0, gx = cf.g.cx, gy = cf.g.cy, gz = cf.g.cz, gu = cf.g.cu;

  // min_u over the control grid of the only u-dependent term.
  ustar_ = sc.controls.points.front();
  for (double u : sc.controls.points)
    if (gu * u < gu * ustar_) ustar_ = u;

  // W = a x^2 + c x + d; collect x^2 / x / 1 coefficients of
  // p*b + a*sigma^2 + g evaluated at y = W, z = W_x * sigma.
  auto rhs = [&](double /*t*/, const std::vector<double>& y) {
    const double a = y[0], c = y[1], d = y[2];
    const double da = -(a * (2.0 * bx + sx * sx + gy + 2.0 * sx * gz));
    const double dc = -(2.0 * a * b0 + c * bx + 2.0 * a * s0 * sx + gx + gy * c +
                        gz * (2.0 * a * s0 + c * sx));
    const double dd =
        -(c * b0 + a * s0 * s0 + g0 + gy * d + gz * c * s0 + gu * ustar_);
    return std::vector<double>{da, dc, dd};
  };

  auto path = rk4_path(rhs, {cf.phi.f2, cf.phi.f1, cf.phi.f0}, T_, t0_, steps);
  a_.resize(static_cast<std::size_t>(steps) + 1);
  c_.resize(a_.size());
  d_.resize(a_.size());
  for (int j = 0; j <= steps; ++j) {
    // path runs T -> t0; store forward-indexed.
    a_[static_cast<std::size_t>(steps - j)] = path[static_cast<std::size_t>(j)][0];
    c_[static_cast<std::size_t>(steps - j)] = path[static_cast<std::size_t>(j)][1];
    d_[static_cast<std::size_t>(steps - j)] = path[static_cast<std::size_t>(j)][2];
  }
}

void QuadraticValueOracle::coefficients_at(double t, double& a, double& c, double& d) const {
  const double pos = (t - t0_) / (T_ - t0_) * steps_;
  const double clamped = std::clamp(pos, 0.0, static_cast<double>(steps_));
  const int j0 = std::min(static_cast<int>(clamped), steps_ - 1);
  const double s = clamped - j0;
  const auto j = static_cast<std::size_t>(j0);
  a = (1.0 - s) * a_[j] + s * a_[j + 1];
  c = (1.0 - s) * c_[j] + s * c_[j + 1];
  d = (1.0 - s) * d_[j] + s * d_[j + 1];
}

double QuadraticValueOracle::w(double t, double x) const {
  double a, c, d;
  coefficients_at(t, a, c, d);
  return (a * x + c) * x + d;
}

double QuadraticValueOracle::wx(double t, double x) const {
  double a, c, d;
  coefficients_at(t, a, c, d);
  return 2.0 * a * x + c;
}

double QuadraticValueOracle::wxx(double t) const {
  double a, c, d;
  coefficients_at(t, a, c, d);
  return 2.0 * a;
}

double quad_form_reference(const Hessian3& m, double p, double k) {
  const double v[3] = {1.0, p, k};
  const double mat[3][3] = {{m.xx, m.xy, m.xz}, {m.xy, m.yy, m.yz}, {m.xz, m.yz, m.zz}};
  double acc = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) acc += v[i] * mat[i][j] * v[j];
  return acc;
}

double k2_reference(const Gradient3& sd, const Hessian3& sdd, double p, double big_p,
                    double big_q, double k1v) {
  const double denom = 1.0 - p * sd.z;
  double acc = big_p * (p * sd.y);
  acc += 2.0 * big_p * sd.x;
  acc += 2.0 * big_p * (sd.y * p);
  acc += 2.0 * big_p * (sd.z * k1v);
  acc += big_q;
  acc += p * quad_form_reference(sdd, p, k1v);
  return acc / denom;
}

unsigned long long TestRng::next() {
  s_ ^= s_ >> 12;
  s_ ^= s_ << 25;
  s_ ^= s_ >> 27;
  return s_ * 0x2545f4914f6cdd1dull;
}

double TestRng::uniform(double lo, double hi) {
  const double r = static_cast<double>(next() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * r;
}

double TestRng::pick_sign() { return (next() & 1ull) ? 1.0 : -1.0; }

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace testsupport
