#pragma once

#include <string>

#include "fbcontrol/scenario.hpp"

namespace testsupport {

// Shipped scenario files, loaded through the real parser.
fbcontrol::Scenario load_repo_scenario(const std::string& stem);

// b = sigma = g = 0, phi = x^2: the dynamic-programming sweep must return
// the terminal condition unchanged.
fbcontrol::Scenario zero_scenario(int nt, int nx);

// Same but g = 1, so W = phi + (T - t).
fbcontrol::Scenario constant_cost_scenario(int nt, int nx);

// Pure diffusion with phi = sin(x): W(t, x) = exp(-s0^2 (T-t) / 2) sin(x).
fbcontrol::Scenario heat_sine_scenario(int nt, int nx, double s0);

// The shipped backward-coupled LQ instance shrunk to unit-test scale.
fbcontrol::Scenario small_lq_scenario();

// y-free LQ pair differing only by a constant shift of the terminal cost;
// every derivative-based quantity must be identical between the two.
fbcontrol::Scenario gauge_scenario(double phi_offset);

}  // namespace testsupport
