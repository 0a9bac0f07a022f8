#include "fbcontrol/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "fbcontrol/errors.hpp"
#include "fbcontrol/probes.hpp"
#include "fbcontrol/rng.hpp"

namespace fbcontrol {

namespace {
constexpr double kMinusInf = -1e300;  // finite stand-in so JSON stays valid
}

double f_eval(double y, double L1, double L2, double beta0) {
  const double a = std::fabs(y);
  const double c1 = L2 + L1 + L1 * L2 / beta0;
  const double c2 = L2 + (L1 * L2 + L2 * L2) / beta0;
  const double c3 = (L2 * L2) / beta0;
  return L1 + c1 * a + c2 * a * a + c3 * a * a * a;
}

namespace {

/// Barrier integral I = int_{L1}^{inf} dy / F(y) by Simpson on the
/// substitution y = L1 + u/(1-u).  Infinite (no barrier) iff L2 == 0,
/// where F grows only linearly.
double barrier_integral(double L1, double L2, double beta0) {
  if (L2 == 0.0) return std::numeric_limits<double>::infinity();
  const int n = 4000;  // even
  const double du = 1.0 / n;
  auto integrand = [&](double u) {
    if (u >= 1.0) return 0.0;
    const double om = 1.0 - u;
    const double y = L1 + u / om;
    return 1.0 / (f_eval(y, L1, L2, beta0) * om * om);
  };
  double acc = integrand(0.0) + integrand(1.0);
  for (int i = 1; i < n; ++i) acc += integrand(i * du) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * du / 3.0;
}

}  // namespace

BoundOdeSolution solve_bound_odes(double L1, double L2, double beta0, double T, int steps,
                                  double cap) {
  BoundOdeSolution sol;
  const int n = std::max(steps, 16);
  sol.t.resize(n + 1);
  sol.s.resize(n + 1);
  sol.l.resize(n + 1);

  // Integrate in tau = T - t so both equations run forward:
  //   ds/dtau = +F(s), s(0) = L1;  dl/dtau = -F(l), l(0) = -L1.
  const double dtau = T / n;
  auto fs = [&](double s) { return f_eval(s, L1, L2, beta0); };

  double s = L1, l = -L1;
  sol.t[n] = T;
  sol.s[n] = s;
  sol.l[n] = l;
  bool dead = false;
  for (int i = 1; i <= n; ++i) {
    const int idx = n - i;  // increasing tau fills decreasing t
    if (!dead) {
      const double k1s = fs(s);
      const double k2s = fs(s + 0.5 * dtau * k1s);
      const double k3s = fs(s + 0.5 * dtau * k2s);
      const double k4s = fs(s + dtau * k3s);
      s += dtau / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s);

      const double k1l = -fs(l);
      const double k2l = -fs(l + 0.5 * dtau * k1l);
      const double k3l = -fs(l + 0.5 * dtau * k2l);
      const double k4l = -fs(l + dtau * k3l);
      l += dtau / 6.0 * (k1l + 2 * k2l + 2 * k3l + k4l);

      if (!std::isfinite(s) || !std::isfinite(l) || std::fabs(s) > cap || std::fabs(l) > cap) {
        dead = true;
        sol.blew_up = true;
        sol.blow_up_time = T - i * dtau;
        s = std::copysign(cap, s);
        l = std::copysign(cap, l);
      }
    }
    sol.t[idx] = T - i * dtau;
    sol.s[idx] = s;
    sol.l[idx] = l;
  }

  const double integral = barrier_integral(L1, L2, beta0);
  sol.t2 = std::isinf(integral) ? kMinusInf : T - integral;
  sol.t1 = sol.t2;  // F is even, so the lower barrier mirrors exactly
  sol.t_star = std::max(sol.t1, sol.t2);
  sol.s0 = sol.s.front();
  sol.l0 = sol.l.front();
  return sol;
}

Assumption3Verdict check_assumption3(const Scenario& sc, const BoundOdeSolution& ode) {
  Assumption3Verdict v;
  v.t_star = ode.t_star;
  v.s0 = ode.s0;
  v.l0 = ode.l0;
  v.barrier_ok = ode.t_star < 0.0;
  v.no_blow_up = !ode.blew_up;
  v.contraction_product = std::max(ode.s0, -ode.l0) * sc.coefficients.L3;
  v.contraction_budget = 1.0 - sc.beta0;
  v.contraction_ok = v.contraction_product <= v.contraction_budget;
  v.pass = v.barrier_ok && v.no_blow_up && v.contraction_ok;

  std::ostringstream detail;
  detail << "t_star = " << v.t_star << " (need < 0); bound at t0: max(s0, -l0) = "
         << std::max(v.s0, -v.l0) << "; contraction " << v.contraction_product
         << " <= " << v.contraction_budget << (v.contraction_ok ? " holds" : " FAILS");
  if (ode.blew_up) detail << "; envelope blew up at t = " << ode.blow_up_time;
  v.detail = detail.str();
  return v;
}

LambdaBetaReport lambda_beta(const Scenario& sc) {
  LambdaBetaReport rep;
  if (sc.c_beta.empty()) return rep;
  rep.enabled = true;
  const double coupling = std::max(sc.coefficients.L2, sc.coefficients.L3);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [beta, cb] : sc.c_beta) {
    const double lam = cb * std::pow(2.0, beta + 1) * (1.0 + std::pow(sc.T, beta)) *
                       std::pow(coupling, beta);
    if (lam < best) {
      best = lam;
      rep.beta = beta;
      rep.c_beta = cb;
      rep.lambda = lam;
    }
  }
  rep.advisory_small = rep.lambda < 1.0;
  return rep;
}

namespace {

struct MonoConstraint {
  double a = 0, b = 0, c = 0;  // a*beta1 + b*beta2 <= c
  MonotonicitySample sample;
};

/// The pairing <A(t, p1) - A(t, p2), p1 - p2> with A = (-g, b, sigma) matched
/// against (dx, dy, dz).
MonoConstraint make_constraint(const CoefficientSet& cs, double t, double u,
                               const double p1[3], const double p2[3]) {
  MonoConstraint c;
  const double dx = p1[0] - p2[0], dy = p1[1] - p2[1], dz = p1[2] - p2[2];
  const double gd = cs.g.value(t, p1[0], p1[1], p1[2], u) - cs.g.value(t, p2[0], p2[1], p2[2], u);
  const double bd = cs.b.value(t, p1[0], p1[1], p1[2], u) - cs.b.value(t, p2[0], p2[1], p2[2], u);
  const double sd = cs.sigma.value(t, p1[0], p1[1], p1[2], u) -
                    cs.sigma.value(t, p2[0], p2[1], p2[2], u);
  const double lhs = -gd * dx + bd * dy + sd * dz;
  c.a = dx * dx;
  c.b = dy * dy + dz * dz;
  c.c = -lhs;
  c.sample = {p1[0], p1[1], p1[2], p2[0], p2[1], p2[2], u, lhs, 0.0};
  return c;
}

bool feasible(const std::vector<MonoConstraint>& cons, double b1, double b2) {
  for (const auto& c : cons)
    if (c.a * b1 + c.b * b2 > c.c + 1e-12) return false;
  return true;
}

/// sup{v : feasible along the ray} on [0, 10], coarse grid then bisection.
double sup_along(const std::vector<MonoConstraint>& cons, bool vary_b2, double fixed) {
  auto ok = [&](double v) { return vary_b2 ? feasible(cons, fixed, v) : feasible(cons, v, fixed); };
  if (!ok(0.0)) return -1.0;
  double lo = 0.0, hi = 0.0;
  for (int i = 1; i <= 100; ++i) {
    const double v = 10.0 * i / 100.0;
    if (ok(v)) lo = v; else { hi = v; break; }
  }
  if (hi == 0.0) return 10.0;  // feasible across the whole scan range
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ok(mid)) lo = mid; else hi = mid;
  }
  return lo;
}

}  // namespace

MonotonicityReport check_monotonicity(const Scenario& sc, int samples, unsigned seed) {
  MonotonicityReport rep;
  rep.applicable = sc.regime == Regime::local_convex;
  if (!rep.applicable) return rep;

  const CoefficientSet cs = sc.coefficient_set();
  const DomainBox box = domain_box(sc);
  NormalStream stream(seed, 0x9003);

  auto draw = [&](double lo, double hi) { return lo + (hi - lo) * stream.next_uniform(); };
  auto draw_u = [&]() {
    const auto& pts = sc.controls.points;
    const std::size_t i =
        static_cast<std::size_t>(stream.next_uniform() * static_cast<double>(pts.size()));
    return pts[std::min(i, pts.size() - 1)];
  };

  std::vector<MonoConstraint> cons;
  cons.reserve(static_cast<std::size_t>(samples) * 4);
  for (int i = 0; i < samples; ++i) {
    const double t = draw(box.t_lo, box.t_hi);
    const double u = draw_u();
    const double base[3] = {draw(box.x_lo, box.x_hi), draw(box.y_lo, box.y_hi),
                            draw(box.z_lo, box.z_hi)};
    // Axis-aligned pairs pin each beta's constraint exactly; the joint pair
    // exercises interactions.
    double px[3] = {draw(box.x_lo, box.x_hi), base[1], base[2]};
    double py[3] = {base[0], draw(box.y_lo, box.y_hi), base[2]};
    double pz[3] = {base[0], base[1], draw(box.z_lo, box.z_hi)};
    double pj[3] = {draw(box.x_lo, box.x_hi), draw(box.y_lo, box.y_hi), draw(box.z_lo, box.z_hi)};
    cons.push_back(make_constraint(cs, t, u, base, px));
    cons.push_back(make_constraint(cs, t, u, base, py));
    cons.push_back(make_constraint(cs, t, u, base, pz));
    cons.push_back(make_constraint(cs, t, u, base, pj));
  }
  rep.samples = static_cast<int>(cons.size());

  const double b1 = sup_along(cons, false, 0.0);
  if (b1 < 0.0) {
    // Even (0, 0) fails: the pairing itself has the wrong sign somewhere.
    rep.pass = false;
    rep.beta1 = 0.0;
    rep.beta2 = 0.0;
  } else {
    rep.beta1 = b1;
    rep.beta2 = std::max(0.0, sup_along(cons, true, b1));
    rep.pass = rep.beta1 > 1e-9;
  }

  // Terminal slope certificate: (phi(x1) - phi(x2)) (x1 - x2) >= beta3 dx^2.
  double beta3 = std::numeric_limits<double>::infinity();
  NormalStream tstream(seed, 0x9004);
  for (int i = 0; i < samples; ++i) {
    const double x1 = box.x_lo + (box.x_hi - box.x_lo) * tstream.next_uniform();
    const double x2 = box.x_lo + (box.x_hi - box.x_lo) * tstream.next_uniform();
    const double dx = x1 - x2;
    if (std::fabs(dx) < 1e-9) continue;
    beta3 = std::min(beta3, (cs.phi.value(x1) - cs.phi.value(x2)) * dx / (dx * dx));
  }
  rep.beta3 = std::isfinite(beta3) ? beta3 : 0.0;
  if (rep.beta3 < 0.0) rep.pass = false;

  // Worst margin and its witness at the certified pair.
  double worst = std::numeric_limits<double>::infinity();
  for (auto& c : cons) {
    const double margin = c.c - c.a * rep.beta1 - c.b * rep.beta2;
    if (margin < worst) {
      worst = margin;
      c.sample.rhs = -rep.beta1 * c.a - rep.beta2 * c.b;
      rep.witness = c.sample;
    }
  }
  rep.worst_margin = std::isfinite(worst) ? worst : 0.0;
  return rep;
}

namespace {

RegimeReport detect_regime(const Scenario& sc, const BoundOdeSolution& ode) {
  RegimeReport rep;
  const auto& c = sc.coefficients;

  const bool sigma_sine = c.sigma.amp != 0.0;
  rep.linear_sigma = !sigma_sine;

  const bool sigma_zero = !sigma_sine && c.sigma.c0 == 0 && c.sigma.ct == 0 && c.sigma.cx == 0 &&
                          c.sigma.cy == 0 && c.sigma.cz == 0 && c.sigma.cu == 0;
  const bool b_z_free = c.b.cz == 0 && (c.b.amp == 0 || c.b.wz == 0);
  rep.local_convex = sigma_zero && b_z_free && sc.controls.convex;

  rep.a_tilde = (1.0 - sc.beta0) - std::max(ode.s0, -ode.l0) * c.L3;

  std::ostringstream why;
  why << (sigma_sine ? "diffusion has a nonlinear part" : "diffusion is affine");
  if (sigma_zero) why << "; diffusion vanishes identically";
  if (!b_z_free) why << "; drift depends on z";
  why << "; control set is " << (sc.controls.convex ? "convex" : "a discrete scan");
  if (sc.regime == Regime::local_convex && !rep.local_convex)
    why << "; declared local_convex but the coefficients do not qualify";
  rep.rationale = why.str();
  return rep;
}

}  // namespace

AssumptionReport run_assumption_checks(const Scenario& sc) {
  AssumptionReport rep;
  rep.ode = solve_bound_odes(sc.coefficients.L1, sc.coefficients.L2, sc.beta0, sc.T);
  rep.assumption3 = check_assumption3(sc, rep.ode);
  rep.lambda = lambda_beta(sc);
  rep.monotonicity = check_monotonicity(sc, 64, static_cast<unsigned>(sc.montecarlo.seed));
  rep.regime = detect_regime(sc, rep.ode);

  // The bounding envelope is a coupling device: it certifies the general
  // fully coupled case.  A degenerate local model can sit far outside the
  // envelope's reach and still be perfectly well posed, so in that regime
  // the monotonicity fit is the gate and the envelope stays advisory.
  rep.gate_pass = rep.monotonicity.applicable ? rep.monotonicity.pass : rep.assumption3.pass;
  return rep;
}

std::string assumption_report_json(const AssumptionReport& rep) {
  nlohmann::json j;
  j["bound_ode"] = {{"s0", rep.ode.s0},
                    {"l0", rep.ode.l0},
                    {"t1", rep.ode.t1},
                    {"t2", rep.ode.t2},
                    {"t_star", rep.ode.t_star},
                    {"blew_up", rep.ode.blew_up},
                    {"blow_up_time", rep.ode.blow_up_time}};
  j["assumption3"] = {{"pass", rep.assumption3.pass},
                      {"barrier_ok", rep.assumption3.barrier_ok},
                      {"no_blow_up", rep.assumption3.no_blow_up},
                      {"contraction_ok", rep.assumption3.contraction_ok},
                      {"contraction_product", rep.assumption3.contraction_product},
                      {"contraction_budget", rep.assumption3.contraction_budget},
                      {"t_star", rep.assumption3.t_star},
                      {"detail", rep.assumption3.detail}};
  j["lambda_beta"] = {{"enabled", rep.lambda.enabled},
                      {"beta", rep.lambda.beta},
                      {"c_beta", rep.lambda.c_beta},
                      {"lambda", rep.lambda.lambda},
                      {"advisory_small", rep.lambda.advisory_small}};
  j["monotonicity"] = {{"applicable", rep.monotonicity.applicable},
                       {"pass", rep.monotonicity.pass},
                       {"beta1", rep.monotonicity.beta1},
                       {"beta2", rep.monotonicity.beta2},
                       {"beta3", rep.monotonicity.beta3},
                       {"worst_margin", rep.monotonicity.worst_margin},
                       {"samples", rep.monotonicity.samples}};
  j["regime"] = {{"linear_sigma", rep.regime.linear_sigma},
                 {"local_convex", rep.regime.local_convex},
                 {"a_tilde", rep.regime.a_tilde},
                 {"rationale", rep.regime.rationale}};
  j["gate_pass"] = rep.gate_pass;
  return j.dump(2) + "\n";
}

}
