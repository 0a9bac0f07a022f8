#pragma once

#include <vector>

#include "fbcontrol/fbsde.hpp"
#include "fbcontrol/scenario.hpp"

namespace fbcontrol {

/// First and second adjoint processes along simulated paths, produced by
/// backward regression passes over a TrajectoryBundle.  Layout matches the
/// bundle: paths * nodes, row-major; q/Q/K columns carry interval values.
struct AdjointBundle {
  int paths = 0;
  int nodes = 0;

  std::vector<double> p, q;        // first adjoint pair
  std::vector<double> big_p, big_q; // second adjoint pair
  std::vector<double> k1v, k2v;     // embedded combinations along the path

  double p_bound = 0;  // max |p| observed, feeds the contraction check

  std::size_t at(int path, int k) const {
    return static_cast<std::size_t>(path) * static_cast<std::size_t>(nodes) +
           static_cast<std::size_t>(k);
  }
};

/// Backward pair (p, q): terminal p_T = phi_x(X_T), driver
///   g_x + g_y p + g_z K1 + b_x p + b_y p^2 + b_z K1 p
///   + sigma_x q + sigma_y p q + sigma_z K1 q,
/// K1 resolved per step by a damped fixed point in (p, q).
/// Coefficients are frozen along the bundle's (X, Y, Z, u).
AdjointBundle solve_first_adjoint(const Scenario& sc, const TrajectoryBundle& bundle,
                                  unsigned threads = 1);

/// Extends the bundle with the second pair (P, Q): terminal P_T = phi_xx(X_T),
/// driver P[(Ds.v)^2 + 2 Db.v + H_y] + 2Q(Ds.v) + v D2H v^T + H_z K2 with
/// v = (1, p, K1) and D2H = D2g + p D2b + q D2sigma.  Requires a bundle
/// already carrying the first pair.
void solve_second_adjoint(const Scenario& sc, const TrajectoryBundle& bundle,
                          AdjointBundle& adj, unsigned threads = 1);

/// Local-case variational triple: h forward from h(t)=1, (m, n) backward
/// from m_T = phi_x(X_T) h_T.  Only meaningful when sigma is control- and
/// state-affine enough for the local expansion (the caller checks regime).
struct LocalAdjointBundle {
  int paths = 0;
  int nodes = 0;

  std::vector<double> h, m, n;

  std::size_t at(int path, int k) const {
    return static_cast<std::size_t>(path) * static_cast<std::size_t>(nodes) +
           static_cast<std::size_t>(k);
  }
};

LocalAdjointBundle solve_local_adjoint(const Scenario& sc, const TrajectoryBundle& bundle,
                                       const AdjointBundle& adj, unsigned threads = 1);

/// n = (1 - p sigma_z)^{-1} [b_z p^2 + p g_z + q] h, the closed-form
/// counterpart the simulated n column is checked against.
double local_relation_n(double b_z, double g_z, double sigma_z, double p, double q, double h);

}
