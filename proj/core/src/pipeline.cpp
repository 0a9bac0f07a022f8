#include "fbcontrol/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>

#include "fbcontrol/adjoint.hpp"
#include "fbcontrol/assumptions.hpp"
#include "fbcontrol/errors.hpp"
#include "fbcontrol/fbsde.hpp"
#include "fbcontrol/hjb.hpp"
#include "fbcontrol/io.hpp"
#include "fbcontrol/log.hpp"
#include "fbcontrol/probes.hpp"
#include "fbcontrol/version.hpp"

namespace fbcontrol {

std::vector<RelationId> parse_relation_ids(const std::vector<std::string>& names) {
  static const RelationId all[] = {
      RelationId::DPP_CONSISTENCY, RelationId::VERIFICATION_THM, RelationId::MP_GLOBAL,
      RelationId::MP_LOCAL,        RelationId::JET_SPACE,        RelationId::JET_TIME,
      RelationId::SMOOTH_PQ,       RelationId::SMOOTH_P2,        RelationId::K1_VX,
      RelationId::K2_VXX,          RelationId::LOCAL_MH};
  std::vector<RelationId> out;
  for (const std::string& name : names) {
    bool found = false;
    for (RelationId id : all) {
      if (name == relation_name(id)) {
        out.push_back(id);
        found = true;
        break;
      }
    }
    if (!found) {
      std::ostringstream msg;
      msg << "unknown relation '" << name << "'; valid names:";
      for (RelationId id : all) msg << ' ' << relation_name(id);
      throw InputError(msg.str());
    }
  }
  return out;
}

namespace {

enum class Stage { check = 0, solve = 1, verify = 2, report = 3 };

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::check: return "check";
    case Stage::solve: return "solve";
    case Stage::verify: return "verify";
    case Stage::report: return "report";
  }
  return "?";
}

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool want_csv(OutputFormat f) { return f != OutputFormat::json; }
bool want_json(OutputFormat f) { return f != OutputFormat::csv; }

RunOutcome execute(const RunOptions& opts, Stage upto) {
  RunOutcome out;
  RunManifest man;
  man.version = kVersion;
  man.threads = opts.threads;
  man.command = std::string(stage_name(upto)) + " " + opts.scenario_path;
  man.status = "ok";

  std::error_code ec;
  std::filesystem::create_directories(opts.out_dir, ec);
  if (ec) {
    out.exit_code = kExitUsage;
    out.summary = "cannot create output directory '" + opts.out_dir + "': " + ec.message();
    return out;
  }

  auto emit = [&](const std::string& name, auto&& writer) {
    writer(opts.out_dir + "/" + name);
    man.outputs.push_back(name);
  };

  std::ostringstream text;
  bool gate_ok = true;
  try {
    const std::vector<RelationId> rel_ids = parse_relation_ids(opts.relations);

    Clock::time_point t0 = Clock::now();
    Scenario sc = load_scenario(opts.scenario_path);
    if (opts.seed_override) sc.montecarlo.seed = *opts.seed_override;
    const std::string formatted = format_scenario(sc);
    man.scenario_name = sc.name;
    man.scenario_hash = fnv1a64(formatted.data(), formatted.size());
    man.seed = sc.montecarlo.seed;
    man.stages.push_back({"load", ms_since(t0)});

    t0 = Clock::now();
    const CoefficientSet cs = sc.coefficient_set();
    const DomainBox box = domain_box(sc);
    const DerivativeReport deriv =
        validate_derivatives(cs, sc.controls, box, 200, sc.montecarlo.seed);
    if (!deriv.pass) {
      std::ostringstream msg;
      msg << "derivative oracles disagree with finite differences:";
      for (const std::string& f : deriv.flagged) msg << ' ' << f;
      throw InputError(msg.str());
    }
    const LipschitzEstimate lips = estimate_lipschitz(cs, sc.controls, box, 400,
                                                      sc.montecarlo.seed);
    if (lips.L1 > cs.L1 + 1e-9 || lips.L2 > cs.L2 + 1e-9 || lips.L3 > cs.L3 + 1e-9) {
      std::ostringstream msg;
      msg << "declared Lipschitz constants are below sampled evidence: declared (" << cs.L1
          << ", " << cs.L2 << ", " << cs.L3 << "), sampled (" << lips.L1 << ", " << lips.L2
          << ", " << lips.L3 << ")";
      throw InputError(msg.str());
    }
    man.stages.push_back({"probes", ms_since(t0)});

    t0 = Clock::now();
    const AssumptionReport arep = run_assumption_checks(sc);
    man.stages.push_back({"assumptions", ms_since(t0)});
    emit("assumptions.json", [&](const std::string& p) {
      write_text_file(p, assumption_report_json(arep));
    });

    gate_ok = arep.gate_pass;
    text << "scenario '" << sc.name << "' (" << to_string(sc.regime) << "): derivative probes ok"
         << ", Lipschitz sampled (" << lips.L1 << ", " << lips.L2 << ", " << lips.L3 << ")"
         << ", assumption gate " << (gate_ok ? "pass" : "FAIL") << ".";
    if (!gate_ok) {
      text << " " << arep.assumption3.detail;
      if (!opts.force || upto == Stage::check) {
        man.status = "gate_failed";
        man.detail = arep.assumption3.detail;
        out.exit_code = kExitRelationFailure;
        out.summary = text.str();
        write_run_manifest(opts.out_dir + "/run_manifest.json", man);
        return out;
      }
      text << " Continuing past the gate (--force).";
    }

    std::optional<HjbSolution> hjb;
    std::optional<TrajectoryBundle> bundle;
    if (upto >= Stage::solve) {
      t0 = Clock::now();
      hjb.emplace(solve_hjb(sc, opts.threads));
      man.stages.push_back({"hjb", ms_since(t0)});

      t0 = Clock::now();
      bundle.emplace(simulate_feedback(sc, hjb->field, opts.threads));
      man.stages.push_back({"simulate", ms_since(t0)});

      if (want_csv(opts.format)) {
        emit("value_field.csv", [&](const std::string& p) {
          write_value_field_csv(p, hjb->field, sc);
        });
        emit("trajectories.csv", [&](const std::string& p) {
          write_trajectories_csv(p, *bundle);
        });
      }
      if (opts.binary_trajectories) {
        emit("trajectories.bin", [&](const std::string& p) {
          write_trajectories_bin(p, *bundle);
        });
      }
      const CostEstimate ce = cost(*bundle);
      text << " Solved " << hjb->field.nt << "x" << hjb->field.nx << " (CFL "
           << hjb->diagnostics.cfl_ratio << ", max|W| " << hjb->diagnostics.max_abs_w
           << "); simulated " << bundle->paths << " paths, cost " << ce.mean << " +/- "
           << ce.std_error << ", W(t0,x0) = " << hjb->field.interp(sc.t0, sc.x0) << ".";
    }

    if (upto >= Stage::verify) {
      t0 = Clock::now();
      AdjointBundle adj = solve_first_adjoint(sc, *bundle, opts.threads);
      man.stages.push_back({"adjoint_first", ms_since(t0)});
      t0 = Clock::now();
      solve_second_adjoint(sc, *bundle, adj, opts.threads);
      man.stages.push_back({"adjoint_second", ms_since(t0)});

      std::optional<LocalAdjointBundle> local;
      if (sc.regime == Regime::local_convex) {
        t0 = Clock::now();
        local.emplace(solve_local_adjoint(sc, *bundle, adj, opts.threads));
        man.stages.push_back({"adjoint_local", ms_since(t0)});
      }

      if (want_csv(opts.format)) {
        emit("adjoints.csv", [&](const std::string& p) {
          write_adjoints_csv(p, *bundle, adj);
        });
        if (local) {
          emit("local_adjoints.csv", [&](const std::string& p) {
            write_local_adjoints_csv(p, *bundle, *local);
          });
        }
      }

      t0 = Clock::now();
      VerifyContext ctx{sc, hjb->field, *bundle, adj, local ? &*local : nullptr, opts.threads};
      const VerificationRun run = run_verification(ctx, rel_ids);
      man.stages.push_back({"verify", ms_since(t0)});

      if (want_json(opts.format)) {
        emit("relations.json", [&](const std::string& p) {
          write_text_file(p, relations_json(run));
        });
      }
      emit("relations.txt", [&](const std::string& p) {
        write_text_file(p, relations_table(run));
      });

      int passed = 0;
      std::string failed_names;
      for (const auto& r : run.reports) {
        if (r.pass) {
          ++passed;
        } else {
          failed_names += ' ';
          failed_names += relation_name(r.id);
        }
      }
      text << " Relations: " << passed << "/" << run.reports.size() << " pass";
      if (!run.all_pass) {
        text << " (failing:" << failed_names << ")";
        out.exit_code = kExitRelationFailure;
        man.status = "relation_failures";
        man.detail = "failing relations:" + failed_names;
      }
      text << ".";

      if (upto >= Stage::report) {
        std::ostringstream rep;
        rep << "run: " << man.command << "\n"
            << "version: " << man.version << "\n"
            << "seed: " << man.seed << ", threads: " << man.threads << "\n\n"
            << "== scenario ==\n"
            << formatted << "\n== assumptions ==\n"
            << assumption_report_json(arep) << "\n== relations ==\n"
            << relations_table(run);
        emit("report.txt", [&](const std::string& p) { write_text_file(p, rep.str()); });
      }
    }

    // Reaching this point with a failed gate means --force was given: the
    // override satisfied the precondition, so the run succeeds, but the
    // manifest keeps a record of what was waved through.
    if (!gate_ok && out.exit_code == kExitOk) {
      man.status = "gate_overridden";
      if (man.detail.empty()) man.detail = arep.assumption3.detail;
    }
  } catch (const InputError& e) {
    man.status = "input_error";
    man.detail = e.what();
    out.exit_code = kExitUsage;
    text << " error: " << e.what();
  } catch (const NumericError& e) {
    man.status = "numeric_error";
    man.detail = e.what();
    out.exit_code = kExitNumerical;
    text << " error: " << e.what();
  } catch (const Error& e) {
    man.status = "error";
    man.detail = e.what();
    out.exit_code = kExitNumerical;
    text << " error: " << e.what();
  }

  try {
    write_run_manifest(opts.out_dir + "/run_manifest.json", man);
  } catch (const Error& e) {
    FBC_LOG_WARN("manifest write failed: %s", e.what());
    if (out.exit_code == kExitOk) out.exit_code = kExitNumerical;
  }
  out.summary = text.str();
  return out;
}

}  // namespace

RunOutcome run_check(const RunOptions& opts) { return execute(opts, Stage::check); }
RunOutcome run_solve(const RunOptions& opts) { return execute(opts, Stage::solve); }
RunOutcome run_verify(const RunOptions& opts) { return execute(opts, Stage::verify); }
RunOutcome run_report(const RunOptions& opts) { return execute(opts, Stage::report); }

}
