#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbcontrol/adjoint.hpp"
#include "fbcontrol/assumptions.hpp"
#include "fbcontrol/fbsde.hpp"
#include "fbcontrol/hjb.hpp"
#include "fbcontrol/scenario.hpp"
#include "fbcontrol/verify.hpp"

namespace fbcontrol {

/// All floating-point emission goes through %.17g so a re-parse restores the
/// exact bit pattern.
std::string format_double(double v);

void write_value_field_csv(const std::string& path, const ValueField& field,
                           const Scenario& sc);
void write_trajectories_csv(const std::string& path, const TrajectoryBundle& bundle);
/// Fixed little-endian layout: magic "FBTB", u32 version/paths/nodes,
/// f64 t0/T, then row-major f64 blocks X, Y, Z, u, dW.
void write_trajectories_bin(const std::string& path, const TrajectoryBundle& bundle);
void write_adjoints_csv(const std::string& path, const TrajectoryBundle& bundle,
                        const AdjointBundle& adj);
void write_local_adjoints_csv(const std::string& path, const TrajectoryBundle& bundle,
                              const LocalAdjointBundle& local);
void write_text_file(const std::string& path, const std::string& content);

std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64_file(const std::string& path);

struct StageTiming {
  std::string name;
  double wall_ms = 0;
};

struct RunManifest {
  std::string command;           // argv joined
  std::string version;
  std::string scenario_name;
  std::uint64_t scenario_hash = 0;  // fnv1a64 of the formatted scenario
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<StageTiming> stages;
  std::vector<std::string> outputs;  // files written, relative paths
  std::string status;                // "ok" or the failure class
  std::string detail;
};

/// Written even when a run fails; excluded from determinism comparisons
/// because it carries wall-clock timings.
void write_run_manifest(const std::string& path, const RunManifest& manifest);

}
