#pragma once

#include <stdexcept>
#include <string>

namespace fbcontrol {

/// Base class for all toolkit failures.  The subclass fixes the CLI exit
/// class: InputError -> 2, AssumptionError -> 1, NumericError -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed scenario files, bad flags, missing inputs.
struct InputError : Error {
  using Error::Error;
};

/// A hard assumption gate failed (the model is outside the supported class).
struct AssumptionError : Error {
  using Error::Error;
};

/// A solver broke down at runtime.
struct NumericError : Error {
  using Error::Error;
};

/// Filesystem writes or reads failed mid-run.
struct IoError : Error {
  using Error::Error;
};

/// |p| * L3 exceeds 1 - beta0, so the z fixed point is not a contraction.
struct ContractionMarginViolated : NumericError {
  ContractionMarginViolated(std::string msg, double margin_used)
      : NumericError(std::move(msg)), margin(margin_used) {}
  double margin;
};

/// A fixed-point iteration hit max_iter before reaching tolerance.
struct NoConvergence : NumericError {
  NoConvergence(std::string msg, int iters, double last_residual)
      : NumericError(std::move(msg)), iterations(iters), residual(last_residual) {}
  int iterations;
  double residual;
};

/// 1 - p * sigma_z fell below the machine guard.
struct SingularDenominator : NumericError {
  SingularDenominator(std::string msg, double denominator_value)
      : NumericError(std::move(msg)), denominator(denominator_value) {}
  double denominator;
};

/// Explicit time step too large for the observed diffusion.
struct CflViolation : NumericError {
  CflViolation(std::string msg, double required, double actual)
      : NumericError(std::move(msg)), required_dt(required), actual_dt(actual) {}
  double required_dt;
  double actual_dt;
};

/// |W_x| * L3 > 1 - beta0 at a grid node during the backward sweep.
struct AlgebraMarginViolation : NumericError {
  AlgebraMarginViolation(std::string msg, double t_at, double x_at, double margin_used)
      : NumericError(std::move(msg)), t(t_at), x(x_at), margin(margin_used) {}
  double t;
  double x;
  double margin;
};

/// Forward/backward sweeps moved apart for three consecutive rounds.
struct PicardDivergence : NumericError {
  PicardDivergence(std::string msg, int sweeps_done, double last_delta)
      : NumericError(std::move(msg)), sweeps(sweeps_done), delta(last_delta) {}
  int sweeps;
  double delta;
};

/// Least-squares basis became degenerate on a non-degenerate feature.
struct RegressionRankDeficiency : NumericError {
  using NumericError::NumericError;
};

}
