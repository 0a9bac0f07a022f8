#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fbcontrol/coefficients.hpp"

namespace fbcontrol {

/// Admissible control values.  `points` is the scan order everywhere a
/// control grid is enumerated; ties in argmin scans resolve to the lowest
/// index.
struct ControlSet {
  std::vector<double> points;
  bool convex = false;
  double box_lo = 0, box_hi = 0;
  bool operator==(const ControlSet&) const = default;
};

struct GridSpec {
  int nt = 2;
  int nx = 3;
  double xmin = -1, xmax = 1;
  bool operator==(const GridSpec&) const = default;
};

struct MonteCarloSpec {
  int paths = 1024;
  std::uint64_t seed = 1;
  int regression_degree = 4;
  int picard_max_sweeps = 40;
  double out_of_box_cap = 0.01;
  bool operator==(const MonteCarloSpec&) const = default;
};

struct ToleranceSpec {
  double fixed_point = 1e-12;
  double verification = 1e-6;
  double cfl_safety = 1.0;
  bool operator==(const ToleranceSpec&) const = default;
};

/// Sampling plan for relation checks.
struct VerifySpec {
  int sample_paths = 32;
  int sample_times = 8;
  int jet_rungs = 4;
  double jet_delta0_dx = 16.0;  // first spatial rung in units of dx
  double jet_tau0_dt = 16.0;    // first temporal rung in units of dt
  bool operator==(const VerifySpec&) const = default;
};

enum class Regime { general, linear_sigma, local_convex };

const char* to_string(Regime r);

struct Scenario {
  std::string name;
  double T = 1.0;
  double t0 = 0.0;
  double x0 = 0.0;
  double beta0 = 0.2;
  Regime regime = Regime::general;
  CoefficientParams coefficients;
  ControlSet controls;
  GridSpec grid;
  MonteCarloSpec montecarlo;
  ToleranceSpec tolerances;
  VerifySpec verify;
  std::map<int, double> c_beta;  // user-supplied norm constants, advisory

  bool operator==(const Scenario&) const = default;

  CoefficientSet coefficient_set() const { return make_coefficient_set(coefficients); }

  double dt() const { return (T - t0) / grid.nt; }
  double dx() const { return (grid.xmax - grid.xmin) / grid.nx; }

  /// Throws InputError naming the offending section/key on the first
  /// violated constraint.
  void validate() const;
};

/// Parses the sectioned key/value scenario format.  Unknown sections or keys
/// are errors.  The result is validated.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

/// Canonical emission: stable section and key order, full double precision.
/// parse(format(s)) == s field for field.
std::string format_scenario(const Scenario& s);
void save_scenario(const Scenario& s, const std::string& path);

}
