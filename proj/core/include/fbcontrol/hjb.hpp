#pragma once

#include <cstddef>
#include <vector>

#include "fbcontrol/scenario.hpp"

namespace fbcontrol {

/// Dense space-time tableau of the dynamic-programming solve.  Row-major,
/// time-major: index(i, j) = i * nx + j with i the time level.
struct ValueField {
  int nt = 0;  // number of time levels (grid.nt + 1)
  int nx = 0;  // number of space nodes (grid.nx + 1)
  double t0 = 0, T = 0;
  double xmin = 0, xmax = 0;
  double dt = 0, dx = 0;

  std::vector<double> w;        // value
  std::vector<double> wx;       // first space difference
  std::vector<double> wxx;      // second space difference
  std::vector<double> v;        // algebra solution at the argmin control
  std::vector<int> u_index;     // argmin index into the scenario control set

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(nx) +
           static_cast<std::size_t>(j);
  }
  double time_at(int i) const { return t0 + dt * i; }
  double x_at(int j) const { return xmin + dx * j; }

  /// Bilinear interpolation of w; x is clamped into [xmin, xmax].
  double interp(double t, double x) const;
  /// Same for the stored derivative tables.
  double interp_wx(double t, double x) const;
  double interp_wxx(double t, double x) const;
};

struct HjbDiagnostics {
  double cfl_ratio = 0;           // max over levels of dt*sigma^2/dx^2
  double max_abs_w = 0;
  int picard_iterations_max = 0;  // worst algebra iteration count seen
  double picard_residual_max = 0;
  double wall_ms = 0;
};

struct HjbSolution {
  ValueField field;
  HjbDiagnostics diagnostics;
};

/// Explicit backward scheme: W(t_i, x) = W(t_{i+1}, x) + dt * min_u G
/// with G evaluated from the level-(i+1) tableau, central differences
/// inside, three-point one-sided first differences and neighbor-copied
/// curvature at the edges (both exact for quadratic values).
/// Throws CflViolation when dt * max sigma^2 / dx^2 exceeds the safety
/// factor at any level (sigma taken at the argmin control).
HjbSolution solve_hjb(const Scenario& sc, unsigned threads = 1);

/// Argmin control at a point, recomputed from the stored tableau.
double feedback_policy(const Scenario& sc, const ValueField& field, double t, double x);

enum class RefinementMode { time, space, joint };

struct OrderEstimate {
  double coarse_error = 0;  // |coarse - fine| at probe points, sup norm
  double mid_error = 0;     // |mid - fine|
  double order = 0;         // log2(coarse_error / mid_error)
};

/// Self-convergence: solves at three nested resolutions and estimates the
/// observed order against the finest as reference.
OrderEstimate refine_and_estimate_order(const Scenario& sc, RefinementMode mode,
                                        unsigned threads = 1);

}
