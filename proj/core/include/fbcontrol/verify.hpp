#pragma once

#include <string>
#include <vector>

#include "fbcontrol/adjoint.hpp"
#include "fbcontrol/fbsde.hpp"
#include "fbcontrol/hjb.hpp"
#include "fbcontrol/scenario.hpp"

namespace fbcontrol {

enum class RelationId {
  DPP_CONSISTENCY,   // realized backward value tracks the stored Y channel
  VERIFICATION_THM,  // W(t0,x0) lower-bounds constant controls, matches feedback
  MP_GLOBAL,         // H(u) - H(ubar) >= 0 over the control set along paths
  MP_LOCAL,          // <H'_u(ubar), u - ubar> >= 0 (convex control set)
  JET_SPACE,         // spatial super/sub-jet inequalities on a delta ladder
  JET_TIME,          // temporal envelope with the H1 correction
  SMOOTH_PQ,         // p = W_x, q = K1-tilde along paths
  SMOOTH_P2,         // W_xx <= P (one-sided second-order consistency)
  K1_VX,             // K1 matches d/dx of the embedded algebra solution
  K2_VXX,            // K2 matches the second difference of the same map
  LOCAL_MH           // m = p h and the closed-form n along paths
};

const char* relation_name(RelationId id);

/// One sampled inequality/equality margin.  For inequalities, margin >= -tol
/// passes; for equalities the margin is |lhs - rhs| and smaller is better.
struct SampleMargin {
  int path = 0;
  int step = 0;
  double margin = 0;
  double tol = 0;  // per-sample tolerance actually applied
};

struct RelationReport {
  RelationId id = RelationId::DPP_CONSISTENCY;
  bool pass = false;
  bool trusted = true;  // false when an upstream consistency gate failed
  // Tolerance decomposition, reported separately so a failure names its
  // dominant error source.
  double tol_field = 0;
  double tol_regression = 0;
  double tol_mc = 0;
  double tol_total = 0;
  double min_margin = 0;
  double median_margin = 0;
  double max_margin = 0;
  int count = 0;
  std::vector<SampleMargin> samples;  // worst offenders only, capped
  std::string note;
};

/// Deterministic (path, time) sample plan: fixed stride over paths and
/// interior time levels, independent of thread count.
struct SamplePlan {
  std::vector<int> paths;
  std::vector<int> steps;  // interior time indices
};

SamplePlan make_sample_plan(const Scenario& sc, const TrajectoryBundle& bundle);

struct VerifyContext {
  const Scenario& sc;
  const ValueField& field;
  const TrajectoryBundle& bundle;
  const AdjointBundle& adj;
  const LocalAdjointBundle* local = nullptr;  // local_convex regime only
  unsigned threads = 1;
};

RelationReport check_dpp_consistency(const VerifyContext& ctx);
RelationReport check_verification_theorem(const VerifyContext& ctx);
RelationReport check_mp_global(const VerifyContext& ctx);
RelationReport check_mp_local(const VerifyContext& ctx);
RelationReport check_jet_space(const VerifyContext& ctx);
RelationReport check_jet_time(const VerifyContext& ctx);
RelationReport check_smooth_pq(const VerifyContext& ctx);
RelationReport check_smooth_p2(const VerifyContext& ctx);
RelationReport check_k1_vx(const VerifyContext& ctx);
RelationReport check_k2_vxx(const VerifyContext& ctx);
RelationReport check_local_mh(const VerifyContext& ctx);

/// Identifiability probe: perturbs the candidate p by a fixed offset and
/// reports the second-order jet-gap metric (curvature term taken from the
/// field) for the true and perturbed candidates.  A working sub-jet test
/// separates the two by at least |offset| / 2.
struct JetProbeResult {
  double offset = 0;
  double gap_true = 0;       // metric at the unperturbed candidate
  double gap_perturbed_up = 0;
  double gap_perturbed_down = 0;
  bool separated = false;
};

JetProbeResult jet_subjet_probe(const VerifyContext& ctx, double offset);

struct VerificationRun {
  std::vector<RelationReport> reports;
  bool all_pass = false;
  bool dpp_trusted = true;  // propagated into jet reports when false
};

/// Runs every relation applicable to the scenario's regime, DPP consistency
/// first.  ids empty means "all applicable"; otherwise only the named ones.
VerificationRun run_verification(const VerifyContext& ctx,
                                 const std::vector<RelationId>& ids = {});

std::string relations_json(const VerificationRun& run);
std::string relations_table(const VerificationRun& run);

}
