#include "fbcontrol/probes.hpp"

#include <algorithm>
#include <cmath>

#include "fbcontrol/rng.hpp"

namespace fbcontrol {

DomainBox domain_box(const Scenario& s) {
  DomainBox box;
  box.t_lo = s.t0;
  box.t_hi = s.T;
  box.x_lo = s.grid.xmin;
  box.x_hi = s.grid.xmax;

  // Size the (y, z) probe range from the terminal data sweep over the box.
  CoefficientSet cs = s.coefficient_set();
  double m = 1.0;
  for (int j = 0; j <= 64; ++j) {
    double x = s.grid.xmin + (s.grid.xmax - s.grid.xmin) * j / 64.0;
    m = std::max(m, std::fabs(cs.phi.value(x)));
    m = std::max(m, std::fabs(cs.phi.dx(x)));
  }
  const double r = 2.0 * m;
  box.y_lo = -r;
  box.y_hi = r;
  box.z_lo = -r;
  box.z_hi = r;
  return box;
}

namespace {

struct ProbePoint {
  double t, x, y, z, u;
};

double lerp(double lo, double hi, double s) { return lo + (hi - lo) * s; }

ProbePoint draw_point(NormalStream& stream, const DomainBox& box, const ControlSet& controls) {
  ProbePoint p;
  p.t = lerp(box.t_lo, box.t_hi, stream.next_uniform());
  p.x = lerp(box.x_lo, box.x_hi, stream.next_uniform());
  p.y = lerp(box.y_lo, box.y_hi, stream.next_uniform());
  p.z = lerp(box.z_lo, box.z_hi, stream.next_uniform());
  const std::size_t idx =
      static_cast<std::size_t>(stream.next_uniform() * static_cast<double>(controls.points.size()));
  p.u = controls.points[std::min(idx, controls.points.size() - 1)];
  return p;
}

class MismatchTable {
 public:
  explicit MismatchTable(std::vector<DerivativeCheck>* checks) : checks_(checks) {}

  void record(const std::string& oracle, double mismatch, const ProbePoint& p) {
    for (auto& c : *checks_) {
      if (c.oracle == oracle) {
        if (mismatch > c.max_mismatch) {
          c.max_mismatch = mismatch;
          c.at_t = p.t; c.at_x = p.x; c.at_y = p.y; c.at_z = p.z; c.at_u = p.u;
        }
        return;
      }
    }
    checks_->push_back({oracle, mismatch, p.t, p.x, p.y, p.z, p.u});
  }

 private:
  std::vector<DerivativeCheck>* checks_;
};

enum class Slot { x, y, z, u };

double eval_shift(const CoefficientFunction& f, const ProbePoint& p, Slot a, double da,
                  Slot b, double db) {
  double x = p.x, y = p.y, z = p.z, u = p.u;
  auto bump = [&](Slot s, double d) {
    switch (s) {
      case Slot::x: x += d; break;
      case Slot::y: y += d; break;
      case Slot::z: z += d; break;
      case Slot::u: u += d; break;
    }
  };
  bump(a, da);
  bump(b, db);
  return f.value(p.t, x, y, z, u);
}

double fd_first(const CoefficientFunction& f, const ProbePoint& p, Slot s, double h) {
  return (eval_shift(f, p, s, h, s, 0) - eval_shift(f, p, s, -h, s, 0)) / (2 * h);
}

double fd_second(const CoefficientFunction& f, const ProbePoint& p, Slot s, double h) {
  return (eval_shift(f, p, s, h, s, 0) - 2 * f.value(p.t, p.x, p.y, p.z, p.u) +
          eval_shift(f, p, s, -h, s, 0)) /
         (h * h);
}

double fd_cross(const CoefficientFunction& f, const ProbePoint& p, Slot a, Slot b, double h) {
  return (eval_shift(f, p, a, h, b, h) - eval_shift(f, p, a, h, b, -h) -
          eval_shift(f, p, a, -h, b, h) + eval_shift(f, p, a, -h, b, -h)) /
         (4 * h * h);
}

void check_coefficient(const std::string& name, const CoefficientFunction& f,
                       const ProbePoint& p, double h1, double h2, MismatchTable& table) {
  const double t = p.t, x = p.x, y = p.y, z = p.z, u = p.u;
  table.record(name + ".dx", std::fabs(fd_first(f, p, Slot::x, h1) - f.dx(t, x, y, z, u)), p);
  table.record(name + ".dy", std::fabs(fd_first(f, p, Slot::y, h1) - f.dy(t, x, y, z, u)), p);
  table.record(name + ".dz", std::fabs(fd_first(f, p, Slot::z, h1) - f.dz(t, x, y, z, u)), p);
  if (f.has_control_derivative())
    table.record(name + ".du", std::fabs(fd_first(f, p, Slot::u, h1) - f.du(t, x, y, z, u)), p);

  table.record(name + ".dxx", std::fabs(fd_second(f, p, Slot::x, h2) - f.dxx(t, x, y, z, u)), p);
  table.record(name + ".dyy", std::fabs(fd_second(f, p, Slot::y, h2) - f.dyy(t, x, y, z, u)), p);
  table.record(name + ".dzz", std::fabs(fd_second(f, p, Slot::z, h2) - f.dzz(t, x, y, z, u)), p);
  table.record(name + ".dxy",
               std::fabs(fd_cross(f, p, Slot::x, Slot::y, h2) - f.dxy(t, x, y, z, u)), p);
  table.record(name + ".dxz",
               std::fabs(fd_cross(f, p, Slot::x, Slot::z, h2) - f.dxz(t, x, y, z, u)), p);
  table.record(name + ".dyz",
               std::fabs(fd_cross(f, p, Slot::y, Slot::z, h2) - f.dyz(t, x, y, z, u)), p);
}

bool all_finite(const CoefficientFunction& f, const ProbePoint& p) {
  const double vals[] = {
      f.value(p.t, p.x, p.y, p.z, p.u), f.dx(p.t, p.x, p.y, p.z, p.u),
      f.dy(p.t, p.x, p.y, p.z, p.u),    f.dz(p.t, p.x, p.y, p.z, p.u),
      f.dxx(p.t, p.x, p.y, p.z, p.u),   f.dyy(p.t, p.x, p.y, p.z, p.u),
      f.dzz(p.t, p.x, p.y, p.z, p.u)};
  for (double v : vals)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

DerivativeReport validate_derivatives(const CoefficientSet& cs, const ControlSet& controls,
                                      const DomainBox& box, int samples, std::uint64_t seed,
                                      double h_first, double h_second) {
  DerivativeReport rep;
  rep.h_first = h_first;
  rep.h_second = h_second;
  rep.tol_first = 1e-6;
  rep.tol_second = 1e-4;

  MismatchTable table(&rep.checks);
  NormalStream stream(seed, 0x9001);

  bool finite_ok = true;
  for (int i = 0; i < samples; ++i) {
    ProbePoint p = draw_point(stream, box, controls);
    finite_ok = finite_ok && all_finite(cs.b, p) && all_finite(cs.sigma, p) && all_finite(cs.g, p);
    check_coefficient("b", cs.b, p, h_first, h_second, table);
    check_coefficient("sigma", cs.sigma, p, h_first, h_second, table);
    check_coefficient("g", cs.g, p, h_first, h_second, table);

    const double px = p.x;
    finite_ok = finite_ok && std::isfinite(cs.phi.value(px)) && std::isfinite(cs.phi.dx(px)) &&
                std::isfinite(cs.phi.dxx(px));
    const double fd1 = (cs.phi.value(px + h_first) - cs.phi.value(px - h_first)) / (2 * h_first);
    const double fd2 = (cs.phi.value(px + h_second) - 2 * cs.phi.value(px) +
                        cs.phi.value(px - h_second)) /
                       (h_second * h_second);
    table.record("phi.dx", std::fabs(fd1 - cs.phi.dx(px)), p);
    table.record("phi.dxx", std::fabs(fd2 - cs.phi.dxx(px)), p);
  }

  rep.pass = finite_ok;
  for (const auto& c : rep.checks) {
    // Second-order names carry three letters after the dot (dxx, dxy, ...),
    // first-order two (dx, dy, dz, du).
    const std::string suffix = c.oracle.substr(c.oracle.rfind('.') + 1);
    const double tol = suffix.size() == 3 ? rep.tol_second : rep.tol_first;
    if (c.max_mismatch > tol || !std::isfinite(c.max_mismatch)) {
      rep.flagged.push_back(c.oracle);
      rep.pass = false;
    }
  }
  return rep;
}

LipschitzEstimate estimate_lipschitz(const CoefficientSet& cs, const ControlSet& controls,
                                     const DomainBox& box, int samples, std::uint64_t seed) {
  LipschitzEstimate est;
  est.samples = samples;
  NormalStream stream(seed, 0x9002);

  auto quotient = [](double f1, double f2, double dist) {
    return dist > 1e-12 ? std::fabs(f1 - f2) / dist : 0.0;
  };

  for (int i = 0; i < samples; ++i) {
    ProbePoint p = draw_point(stream, box, controls);

    // Vary x only: feeds the L1 group for b, sigma, g and phi.
    {
      const double x2 = lerp(box.x_lo, box.x_hi, stream.next_uniform());
      const double d = std::fabs(p.x - x2);
      est.L1 = std::max(est.L1, quotient(cs.b.value(p.t, p.x, p.y, p.z, p.u),
                                         cs.b.value(p.t, x2, p.y, p.z, p.u), d));
      est.L1 = std::max(est.L1, quotient(cs.sigma.value(p.t, p.x, p.y, p.z, p.u),
                                         cs.sigma.value(p.t, x2, p.y, p.z, p.u), d));
      est.L1 = std::max(est.L1, quotient(cs.g.value(p.t, p.x, p.y, p.z, p.u),
                                         cs.g.value(p.t, x2, p.y, p.z, p.u), d));
      est.L1 = std::max(est.L1, quotient(cs.phi.value(p.x), cs.phi.value(x2), d));
    }

    // Vary (y, z) jointly: L2 for b, L1 for g.
    {
      const double y2 = lerp(box.y_lo, box.y_hi, stream.next_uniform());
      const double z2 = lerp(box.z_lo, box.z_hi, stream.next_uniform());
      const double d = std::hypot(p.y - y2, p.z - z2);
      est.L2 = std::max(est.L2, quotient(cs.b.value(p.t, p.x, p.y, p.z, p.u),
                                         cs.b.value(p.t, p.x, y2, z2, p.u), d));
      est.L1 = std::max(est.L1, quotient(cs.g.value(p.t, p.x, p.y, p.z, p.u),
                                         cs.g.value(p.t, p.x, y2, z2, p.u), d));
    }

    // Vary y only: L2 for sigma.
    {
      const double y2 = lerp(box.y_lo, box.y_hi, stream.next_uniform());
      const double d = std::fabs(p.y - y2);
      est.L2 = std::max(est.L2, quotient(cs.sigma.value(p.t, p.x, p.y, p.z, p.u),
                                         cs.sigma.value(p.t, p.x, y2, p.z, p.u), d));
    }

    // Vary z only: L3 for sigma.
    {
      const double z2 = lerp(box.z_lo, box.z_hi, stream.next_uniform());
      const double d = std::fabs(p.z - z2);
      est.L3 = std::max(est.L3, quotient(cs.sigma.value(p.t, p.x, p.y, p.z, p.u),
                                         cs.sigma.value(p.t, p.x, p.y, z2, p.u), d));
    }
  }
  return est;
}

}
