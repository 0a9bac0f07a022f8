#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbcontrol/coefficients.hpp"
#include "fbcontrol/scenario.hpp"

namespace fbcontrol {

/// Sampling region for derivative and Lipschitz probes.
struct DomainBox {
  double t_lo = 0, t_hi = 1;
  double x_lo = -1, x_hi = 1;
  double y_lo = -1, y_hi = 1;
  double z_lo = -1, z_hi = 1;
};

/// Probe region derived from a scenario: t, x from the grid, y and z sized
/// from the terminal data range.
DomainBox domain_box(const Scenario& s);

struct DerivativeCheck {
  std::string oracle;    // "b.dx", "sigma.dz", "phi.dxx", ...
  double max_mismatch;   // |finite difference - oracle| at the worst sample
  double at_t, at_x, at_y, at_z, at_u;
};

struct DerivativeReport {
  std::vector<DerivativeCheck> checks;
  std::vector<std::string> flagged;  // oracle names whose mismatch exceeded tolerance
  double h_first, h_second;
  double tol_first, tol_second;
  bool pass = false;
};

/// Central-difference cross-check of every supplied derivative oracle at
/// `samples` deterministic points in the box.  Non-finite oracle output
/// anywhere is an immediate flag.
DerivativeReport validate_derivatives(const CoefficientSet& cs, const ControlSet& controls,
                                      const DomainBox& box, int samples, std::uint64_t seed,
                                      double h_first = 1e-6, double h_second = 1e-4);

struct LipschitzEstimate {
  double L1 = 0, L2 = 0, L3 = 0;
  int samples = 0;
};

/// Empirical Lipschitz constants per declared group from paired difference
/// quotients.  For a fixed seed the estimate is a prefix maximum: it is
/// nondecreasing in the sample count.
LipschitzEstimate estimate_lipschitz(const CoefficientSet& cs, const ControlSet& controls,
                                     const DomainBox& box, int samples, std::uint64_t seed);

}
