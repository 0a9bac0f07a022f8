#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "fbcontrol/errors.hpp"
#include "fbcontrol/scenario.hpp"
#include "support/scenarios.hpp"

using namespace fbcontrol;

namespace {

std::string minimal_text() {
  return "[problem]\n"
         "name = tiny\n"
         "T = 1\n"
         "t0 = 0\n"
         "x0 = 0.25\n"
         "beta0 = 0.2\n"
         "regime = general\n"
         "[coefficients]\n"
         "b = 0 0 0.1 0 0 0\n"
         "sigma = 0.3 0 0 0 0 0\n"
         "g = 0 0 0.1 0 0 0.2\n"
         "phi = 0 0.1 0.1\n"
         "L1 = 0.4\n"
         "[controls]\n"
         "points = -1 0 1\n"
         "convex = true\n"
         "box = -1 1\n"
         "[grid]\n"
         "nt = 50\n"
         "nx = 40\n"
         "xmin = -1\n"
         "xmax = 1\n";
}

}  // namespace

TEST_CASE("parse accepts the minimal sectioned format and fills defaults") {
  const auto sc = parse_scenario(minimal_text());
  CHECK(sc.name == "tiny");
  CHECK(sc.T == 1.0);
  CHECK(sc.regime == Regime::general);
  CHECK(sc.coefficients.b.cx == 0.1);
  CHECK(sc.coefficients.g.cu == 0.2);
  CHECK(sc.controls.points.size() == 3);
  CHECK(sc.controls.convex);
  CHECK(sc.grid.nt == 50);
  // Unstated sections keep their defaults.
  CHECK(sc.montecarlo.paths == 1024);
  CHECK(sc.tolerances.fixed_point == 1e-12);
  CHECK(sc.verify.sample_paths == 32);
}

TEST_CASE("format and parse round-trip every field") {
  auto sc = parse_scenario(minimal_text());
  sc.coefficients.sigma.amp = 0.125;
  sc.coefficients.sigma.wx = 2.0;
  sc.coefficients.phi.amp = 0.3;
  sc.coefficients.phi.w = 1.5;
  sc.montecarlo.seed = 987654321;
  sc.montecarlo.paths = 4096;
  sc.verify.jet_rungs = 6;
  sc.c_beta[2] = 1.75;
  const auto again = parse_scenario(format_scenario(sc));
  CHECK(again == sc);
}

TEST_CASE("comments and blank lines are ignored") {
  const auto sc = parse_scenario("# leading comment\n\n" + minimal_text() + "\n# trailing\n");
  CHECK(sc.name == "tiny");
}

TEST_CASE("unknown keys and sections are rejected with their location") {
  CHECK_THROWS_AS(parse_scenario(minimal_text() + "wobble = 3\n"), InputError);
  CHECK_THROWS_AS(parse_scenario(minimal_text() + "[mystery]\nk = 1\n"), InputError);
  try {
    parse_scenario(minimal_text() + "wobble = 3\n");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("wobble") != std::string::npos);
  }
}

TEST_CASE("malformed values name the offending key") {
  auto bad = minimal_text();
  bad.replace(bad.find("nt = 50"), 7, "nt = red");
  CHECK_THROWS_AS(parse_scenario(bad), InputError);
}

TEST_CASE("bad regime token is rejected") {
  auto bad = minimal_text();
  bad.replace(bad.find("regime = general"), 16, "regime = chaotic");
  CHECK_THROWS_AS(parse_scenario(bad), InputError);
}

TEST_CASE("validate rejects out-of-range structure") {
  auto sc = parse_scenario(minimal_text());

  auto broken = sc;
  broken.T = sc.t0;
  CHECK_THROWS_AS(broken.validate(), InputError);

  broken = sc;
  broken.beta0 = 1.0;
  CHECK_THROWS_AS(broken.validate(), InputError);

  broken = sc;
  broken.x0 = 5.0;  // outside the grid box
  CHECK_THROWS_AS(broken.validate(), InputError);

  broken = sc;
  broken.coefficients.L1 = 0.0;
  CHECK_THROWS_AS(broken.validate(), InputError);

  broken = sc;
  broken.controls.points.clear();
  CHECK_THROWS_AS(broken.validate(), InputError);

  broken = sc;
  broken.controls.points = {-2.0, 0.0};  // escapes the convex box
  CHECK_THROWS_AS(broken.validate(), InputError);

  broken = sc;
  broken.grid.nx = 1;
  CHECK_THROWS_AS(broken.validate(), InputError);

  broken = sc;
  broken.montecarlo.regression_degree = 9;
  CHECK_THROWS_AS(broken.validate(), InputError);

  broken = sc;
  broken.tolerances.cfl_safety = 1.5;
  CHECK_THROWS_AS(broken.validate(), InputError);
}

TEST_CASE("local_convex regime enforces its structural constraints") {
  auto sc = parse_scenario(minimal_text());
  sc.regime = Regime::local_convex;
  // Diffusion must vanish.
  CHECK_THROWS_AS(sc.validate(), InputError);
  sc.coefficients.sigma = LinearSineParams{};
  CHECK_NOTHROW(sc.validate());
  // Drift must be z-free.
  sc.coefficients.b.cz = 0.1;
  CHECK_THROWS_AS(sc.validate(), InputError);
  sc.coefficients.b.cz = 0.0;
  // Control set must be convex.
  sc.controls.convex = false;
  CHECK_THROWS_AS(sc.validate(), InputError);
}

TEST_CASE("load rejects a missing file") {
  CHECK_THROWS_AS(load_scenario("/nonexistent/nowhere.fbc"), InputError);
}

TEST_CASE("shipped scenario files parse, validate and round-trip") {
  for (const char* stem : {"lq_smooth", "lq_coupled", "local_convex"}) {
    const auto sc = testsupport::load_repo_scenario(stem);
    CHECK(sc.name == stem);
    CHECK_NOTHROW(sc.validate());
    const auto again = parse_scenario(format_scenario(sc));
    CHECK(again == sc);
  }
}

TEST_CASE("shipped instances cover all three coupling regimes") {
  CHECK(testsupport::load_repo_scenario("lq_smooth").regime == Regime::linear_sigma);
  CHECK(testsupport::load_repo_scenario("lq_coupled").regime == Regime::general);
  CHECK(testsupport::load_repo_scenario("local_convex").regime == Regime::local_convex);
}

TEST_CASE("regime names round-trip through to_string") {
  CHECK(std::string(to_string(Regime::general)) == "general");
  CHECK(std::string(to_string(Regime::linear_sigma)) == "linear_sigma");
  CHECK(std::string(to_string(Regime::local_convex)) == "local_convex");
}
