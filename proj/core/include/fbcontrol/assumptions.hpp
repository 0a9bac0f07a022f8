#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fbcontrol/scenario.hpp"

namespace fbcontrol {

/// Envelope F(y) = L1 + (L2 + L1 + L1*L2/beta0)|y|
///               + [L2 + (L1*L2 + L2^2)/beta0] y^2 + (L2^2/beta0)|y|^3.
/// Even in y; F(0) = L1 > 0 whenever L1 > 0.
double f_eval(double y, double L1, double L2, double beta0);

struct BoundOdeSolution {
  std::vector<double> t;
  std::vector<double> s;  // s' = -F(s), s(T) = L1, integrated backward
  std::vector<double> l;  // l' =  F(l), l(T) = -L1; equals -s by symmetry
  bool blew_up = false;
  double blow_up_time = 0;  // largest t where |s| first exceeded the cap
  double t1 = 0;            // lower existence barrier (-inf encoded as -1e300)
  double t2 = 0;            // same for l; equal to t1 by symmetry
  double t_star = 0;        // max(t1, t2)
  double s0 = 0;            // s at the earliest surviving node
  double l0 = 0;
};

/// RK4 integration of the bounding ODEs from T down to 0, with the barrier
/// times t1/t2 computed by quadrature of dy/F(y) on [L1, inf).
/// L2 == 0 gives t2 = -inf and the closed form s(t) = (1+L1)e^{L1(T-t)} - 1.
BoundOdeSolution solve_bound_odes(double L1, double L2, double beta0, double T,
                                  int steps = 4000, double cap = 1e8);

struct Assumption3Verdict {
  bool pass = false;
  bool barrier_ok = false;      // t_star < 0
  bool no_blow_up = false;
  bool contraction_ok = false;  // max(s0, -l0) * L3 <= 1 - beta0
  double t_star = 0;
  double s0 = 0;
  double l0 = 0;
  double contraction_product = 0;  // max(s0, -l0) * L3
  double contraction_budget = 0;   // 1 - beta0
  std::string detail;
};

Assumption3Verdict check_assumption3(const Scenario& sc, const BoundOdeSolution& ode);

struct LambdaBetaReport {
  bool enabled = false;  // only when the scenario supplies c_beta
  double beta = 0;
  double c_beta = 0;
  double lambda = 0;  // c_beta * 2^{beta+1} (1 + T^beta) max(L2, L3)^beta
  bool advisory_small = false;  // lambda < 1
};

LambdaBetaReport lambda_beta(const Scenario& sc);

struct MonotonicitySample {
  double x1 = 0, y1 = 0, z1 = 0;
  double x2 = 0, y2 = 0, z2 = 0;
  double u = 0;
  double lhs = 0;  // the monotonicity pairing at this sample
  double rhs = 0;  // -beta1|dx|^2 - beta2(|dy|^2 + |dz|^2) bound it must beat
};

struct MonotonicityReport {
  bool applicable = false;  // local_convex regime only
  bool pass = false;
  double beta1 = 0, beta2 = 0, beta3 = 0;
  double worst_margin = 0;  // min over samples of lhs - rhs
  std::optional<MonotonicitySample> witness;  // worst sample
  int samples = 0;
};

/// Fits the largest (beta1, beta2) certified by sampled coefficient
/// differences: each sample yields a linear constraint a*beta1 + b*beta2 <= c,
/// maximized over a coarse grid on [0,10]^2 then bisection-refined.
/// beta3 comes from the terminal condition monotonicity.
MonotonicityReport check_monotonicity(const Scenario& sc, int samples, unsigned seed);

struct RegimeReport {
  bool linear_sigma = false;  // sigma affine in (x, y, z, u) at every probe
  bool local_convex = false;  // sigma == 0, b free of z, control set convex
  double a_tilde = 0;         // contraction surplus 1 - max|p-bound|*L3 - beta0
  std::string rationale;
};

struct AssumptionReport {
  BoundOdeSolution ode;
  Assumption3Verdict assumption3;
  LambdaBetaReport lambda;
  MonotonicityReport monotonicity;
  RegimeReport regime;
  // Monotonicity when applicable (degenerate local models live outside the
  // bounding envelope's reach), assumption3 otherwise.
  bool gate_pass = false;
};

AssumptionReport run_assumption_checks(const Scenario& sc);

std::string assumption_report_json(const AssumptionReport& rep);

}
