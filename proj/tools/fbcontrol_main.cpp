// Command line front end: thin argument parsing over the library pipeline.
// Exit codes: 0 ok, 1 failed relation or assumption gate, 2 usage/input,
// 3 numerical breakdown.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "fbcontrol/pipeline.hpp"
#include "fbcontrol/version.hpp"

namespace {

fbcontrol::OutputFormat parse_format(const std::string& name) {
  if (name == "csv") return fbcontrol::OutputFormat::csv;
  if (name == "json") return fbcontrol::OutputFormat::json;
  return fbcontrol::OutputFormat::both;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical toolkit for fully coupled forward-backward stochastic control"};
  app.set_version_flag("--version", fbcontrol::kVersion);
  app.require_subcommand(1);

  fbcontrol::RunOptions opts;
  std::string format = "both";

  auto add_common = [&](CLI::App* cmd, bool with_relations) {
    cmd->add_option("scenario", opts.scenario_path, "scenario file")->required();
    cmd->add_option("--out", opts.out_dir, "output directory (default: out)");
    cmd->add_option("--threads", opts.threads, "worker threads (default: 1)");
    cmd->add_option("--seed", opts.seed_override, "override the scenario seed");
    cmd->add_flag("--force", opts.force, "continue past a failed assumption gate");
    cmd->add_option("--format", format, "table output format: csv, json, both")
        ->check(CLI::IsMember({"csv", "json", "both"}));
    cmd->add_flag("--binary", opts.binary_trajectories, "also write trajectories.bin");
    if (with_relations) {
      cmd->add_option("--relations", opts.relations,
                      "comma separated relation names (default: all applicable)")
          ->delimiter(',');
    }
  };

  CLI::App* c_check =
      app.add_subcommand("check", "parse, probe derivatives, run assumption gates");
  add_common(c_check, false);
  CLI::App* c_solve =
      app.add_subcommand("solve", "check, then the dynamic-programming solve and simulation");
  add_common(c_solve, false);
  CLI::App* c_verify =
      app.add_subcommand("verify", "solve, then adjoints and the relation suite");
  add_common(c_verify, true);
  CLI::App* c_report = app.add_subcommand("report", "verify, then a consolidated text report");
  add_common(c_report, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fbcontrol::kExitUsage;
  }

  opts.format = parse_format(format);

  try {
    fbcontrol::RunOutcome outcome;
    if (c_check->parsed()) outcome = fbcontrol::run_check(opts);
    else if (c_solve->parsed()) outcome = fbcontrol::run_solve(opts);
    else if (c_verify->parsed()) outcome = fbcontrol::run_verify(opts);
    else outcome = fbcontrol::run_report(opts);
    std::printf("%s\n", outcome.summary.c_str());
    return outcome.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fbcontrol: %s\n", e.what());
    return fbcontrol::kExitNumerical;
  }
}
