#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fbcontrol/scenario.hpp"
#include "fbcontrol/verify.hpp"

namespace fbcontrol {

enum class OutputFormat { csv, json, both };

struct RunOptions {
  std::string scenario_path;
  std::string out_dir = "out";
  unsigned threads = 1;
  std::optional<std::uint64_t> seed_override;
  std::vector<std::string> relations;  // names; empty = all applicable
  bool force = false;                  // run past a failed assumption gate
  OutputFormat format = OutputFormat::both;
  bool binary_trajectories = false;
};

/// Exit codes shared by the subcommands and the CLI wrapper.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRelationFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

struct RunOutcome {
  int exit_code = kExitOk;
  std::string summary;  // one-paragraph human text, printed by the CLI
};

/// check: parse + validate + derivative probes + assumption gates.
RunOutcome run_check(const RunOptions& opts);
/// solve: check, then the dynamic-programming solve and simulation exports.
RunOutcome run_solve(const RunOptions& opts);
/// verify: solve, then adjoints and the relation suite.
RunOutcome run_verify(const RunOptions& opts);
/// report: verify, then a consolidated text report.
RunOutcome run_report(const RunOptions& opts);

std::vector<RelationId> parse_relation_ids(const std::vector<std::string>& names);

}
