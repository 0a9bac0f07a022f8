#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "fbcontrol/adjoint.hpp"
#include "fbcontrol/errors.hpp"
#include "fbcontrol/fbsde.hpp"
#include "fbcontrol/hjb.hpp"
#include "fbcontrol/pipeline.hpp"
#include "fbcontrol/verify.hpp"
#include "support/scenarios.hpp"

using namespace fbcontrol;

namespace {

struct Artifacts {
  Scenario sc;
  ValueField field;
  TrajectoryBundle bundle;
  AdjointBundle adj;

  VerifyContext ctx() const { return {sc, field, bundle, adj, nullptr, 1}; }
};

Artifacts build(const Scenario& sc) {
  Artifacts a{sc, {}, {}, {}};
  a.field = solve_hjb(a.sc).field;
  a.bundle = simulate_feedback(a.sc, a.field);
  a.adj = solve_first_adjoint(a.sc, a.bundle);
  solve_second_adjoint(a.sc, a.bundle, a.adj);
  return a;
}

const Artifacts& lq() {
  static Artifacts a = build(testsupport::small_lq_scenario());
  return a;
}

const RelationReport* find(const VerificationRun& run, RelationId id) {
  for (const auto& r : run.reports)
    if (r.id == id) return &r;
  return nullptr;
}

}  // namespace

TEST_CASE("sample plans are deterministic, interior and deduplicated") {
  const auto& a = lq();
  const auto plan = make_sample_plan(a.sc, a.bundle);
  const auto again = make_sample_plan(a.sc, a.bundle);
  CHECK(plan.paths == again.paths);
  CHECK(plan.steps == again.steps);
  CHECK(plan.paths.size() <= static_cast<std::size_t>(a.sc.verify.sample_paths));
  CHECK(plan.steps.size() <= static_cast<std::size_t>(a.sc.verify.sample_times));
  CHECK(std::is_sorted(plan.steps.begin(), plan.steps.end()));
  CHECK(std::adjacent_find(plan.steps.begin(), plan.steps.end()) == plan.steps.end());
  for (int k : plan.steps) {
    CHECK(k >= 1);
    CHECK(k <= a.bundle.nodes - 2);
  }
  for (int p : plan.paths) {
    CHECK(p >= 0);
    CHECK(p < a.bundle.paths);
  }
}

TEST_CASE("relation names round-trip through the parser") {
  const std::vector<std::string> names = {
      "DPP_CONSISTENCY", "VERIFICATION_THM", "MP_GLOBAL", "MP_LOCAL",   "JET_SPACE", "JET_TIME",
      "SMOOTH_PQ",       "SMOOTH_P2",        "K1_VX",     "K2_VXX",     "LOCAL_MH"};
  const auto ids = parse_relation_ids(names);
  REQUIRE(ids.size() == names.size());
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(relation_name(ids[i]) == names[i]);
}

TEST_CASE("unknown relation names are rejected with the valid list") {
  try {
    parse_relation_ids({"NOT_A_RELATION"});
    FAIL("expected InputError");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("NOT_A_RELATION") != std::string::npos);
    CHECK(msg.find("MP_GLOBAL") != std::string::npos);
  }
}

TEST_CASE("all applicable relations pass on the backward-coupled instance") {
  const auto run = run_verification(lq().ctx());
  CHECK(run.all_pass);
  CHECK(run.dpp_trusted);
  // linear_sigma regime: everything except the two local-case relations.
  CHECK(run.reports.size() == 9);
  for (const auto& r : run.reports) {
    INFO(relation_name(r.id));
    CHECK(r.pass);
    CHECK(r.trusted);
    CHECK(r.count > 0);
    CHECK(r.samples.size() <= 12);
    CHECK(r.tol_total >= 0.0);
  }
  CHECK(find(run, RelationId::MP_LOCAL) == nullptr);
  CHECK(find(run, RelationId::LOCAL_MH) == nullptr);
}

TEST_CASE("relation selection runs exactly the requested checks") {
  const auto run = run_verification(lq().ctx(), {RelationId::MP_GLOBAL});
  REQUIRE(run.reports.size() == 1);
  CHECK(run.reports[0].id == RelationId::MP_GLOBAL);
  CHECK(run.reports[0].pass);
}

TEST_CASE("corrupted backward values fail consistency and poison the jets") {
  auto a = build(testsupport::small_lq_scenario());
  // Shift one stored Y value mid-path far past the max-gap budget (which is
  // five times the composed tolerance): the recomputed backward integral can
  // no longer match.
  a.bundle.y[a.bundle.at(0, a.bundle.nodes / 2)] += 10.0;
  const auto run = run_verification(a.ctx());
  CHECK_FALSE(run.all_pass);
  CHECK_FALSE(run.dpp_trusted);
  const auto* dpp = find(run, RelationId::DPP_CONSISTENCY);
  REQUIRE(dpp != nullptr);
  CHECK_FALSE(dpp->pass);
  const auto* jet = find(run, RelationId::JET_SPACE);
  REQUIRE(jet != nullptr);
  CHECK_FALSE(jet->trusted);
  CHECK(jet->note.find("UNTRUSTED") != std::string::npos);
}

TEST_CASE("margins are invariant under a constant terminal shift") {
  const auto base = build(testsupport::gauge_scenario(0.0));
  const auto lifted = build(testsupport::gauge_scenario(5.0));
  for (RelationId id : {RelationId::MP_GLOBAL, RelationId::JET_SPACE, RelationId::SMOOTH_PQ}) {
    const auto r0 = *find(run_verification(base.ctx(), {id}), id);
    const auto r5 = *find(run_verification(lifted.ctx(), {id}), id);
    INFO(relation_name(id));
    CHECK(std::fabs(r0.min_margin - r5.min_margin) <= 1e-9);
    CHECK(std::fabs(r0.median_margin - r5.median_margin) <= 1e-9);
    CHECK(std::fabs(r0.max_margin - r5.max_margin) <= 1e-9);
  }
}

TEST_CASE("sub-jet probe separates a shifted gradient candidate") {
  const auto probe = jet_subjet_probe(lq().ctx(), 0.1);
  CHECK(probe.offset == 0.1);
  CHECK(probe.separated);
  CHECK(probe.gap_true < 0.05);
  CHECK(probe.gap_perturbed_up > 0.05);
  CHECK(probe.gap_perturbed_down > 0.05);
}

TEST_CASE("the verification theorem check exercises every constant control") {
  const auto run = run_verification(lq().ctx(), {RelationId::VERIFICATION_THM});
  const auto& r = run.reports[0];
  CHECK(r.pass);
  // One margin per constant control plus the feedback-gap sample.
  CHECK(r.count >= static_cast<int>(lq().sc.controls.points.size()));
}

TEST_CASE("relation reports serialize to json with their margins") {
  const auto run = run_verification(lq().ctx(), {RelationId::SMOOTH_PQ, RelationId::K1_VX});
  const auto j = nlohmann::json::parse(relations_json(run));
  REQUIRE(j.contains("relations"));
  REQUIRE(j["relations"].size() == 2);
  bool saw_pq = false;
  for (const auto& rel : j["relations"]) {
    CHECK(rel.contains("pass"));
    CHECK(rel.contains("min_margin"));
    CHECK(rel.contains("tol_total"));
    CHECK(rel.contains("worst_samples"));
    if (rel["relation"] == "SMOOTH_PQ") saw_pq = true;
  }
  CHECK(saw_pq);
  CHECK(j.contains("all_pass"));
}

TEST_CASE("the table renderer marks the overall verdict") {
  const auto run = run_verification(lq().ctx(), {RelationId::SMOOTH_PQ});
  const auto table = relations_table(run);
  CHECK(table.find("SMOOTH_PQ") != std::string::npos);
  CHECK(table.find("ALL RELATIONS PASS") != std::string::npos);
}
