#pragma once

#include <cstddef>
#include <vector>

#include "fbcontrol/hjb.hpp"
#include "fbcontrol/scenario.hpp"

namespace fbcontrol {

enum class SimulationMode { feedback, picard };

/// One path per row; nodes = grid.nt + 1 entries per path for every channel.
/// z and u carry interval values: the last entry repeats the final interval.
struct TrajectoryBundle {
  int paths = 0;
  int nodes = 0;
  double t0 = 0, T = 0, dt = 0;
  SimulationMode mode = SimulationMode::feedback;

  std::vector<double> x, y, z, u;  // paths * nodes, row-major
  std::vector<double> dw;          // paths * (nodes - 1)

  /// Realized backward value per path:
  /// phi(X_N) + sum g dt - sum Z dB.  cost() averages this column, which
  /// keeps the Monte Carlo spread honest even in feedback mode.
  std::vector<double> path_cost;
  /// max_k |Ytilde_k - Y_k| per path, the backward-consistency residual.
  std::vector<double> y_residual;

  int out_of_box = 0;      // interpolation clamps observed
  int picard_sweeps = 0;   // picard mode only
  double picard_delta = 0; // last sweep's max coefficient move

  std::size_t at(int path, int k) const {
    return static_cast<std::size_t>(path) * static_cast<std::size_t>(nodes) +
           static_cast<std::size_t>(k);
  }
};

/// Forward Euler–Maruyama under the tableau policy: Y from interpolated w,
/// u from the argmin table, Z from the algebra solve warm-started at the
/// stored node value.  Dynamics always use the true X; clamping happens
/// only at interpolation, and the clamp fraction is capped by the scenario.
TrajectoryBundle simulate_feedback(const Scenario& sc, const ValueField& field,
                                   unsigned threads = 1);

/// Decoupled Picard sweeps: forward Euler with the current (Y, Z) guess,
/// then a backward regression pass (polynomial projection with the
/// martingale-increment control variate).  Control is a fixed per-step
/// open-loop schedule.  Damps 0.5 when the sweep contraction ratio
/// exceeds 0.9; throws PicardDivergence after three rising deltas.
TrajectoryBundle simulate_picard(const Scenario& sc, const std::vector<double>& control_per_step,
                                 unsigned threads = 1);

struct CostEstimate {
  double mean = 0;
  double std_error = 0;
  int paths = 0;
};

CostEstimate cost(const TrajectoryBundle& bundle);

struct DppResidual {
  double max_gap = 0;     // sup over sampled (path, k) of the backward gap
  double mean_gap = 0;
  int samples = 0;
  int excluded_paths = 0;  // paths that left the box; their tails are clamped
};

/// Recomputes the backward integrals node by node and compares against the
/// stored Y channel; streaming, no extra per-path memory.
DppResidual dpp_consistency(const Scenario& sc, const TrajectoryBundle& bundle);

}
