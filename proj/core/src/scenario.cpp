#include "fbcontrol/scenario.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "fbcontrol/errors.hpp"

namespace fbcontrol {

const char* to_string(Regime r) {
  switch (r) {
    case Regime::general: return "general";
    case Regime::linear_sigma: return "linear_sigma";
    case Regime::local_convex: return "local_convex";
  }
  return "general";
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw InputError("scenario: " + where + ": " + what);
}

double parse_double(const std::string& tok, const std::string& where) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') fail(where, "expected a number, got '" + tok + "'");
  return v;
}

long parse_long(const std::string& tok, const std::string& where) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  long v = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0') fail(where, "expected an integer, got '" + tok + "'");
  return v;
}

bool parse_bool(const std::string& tok, const std::string& where) {
  if (tok == "true") return true;
  if (tok == "false") return false;
  fail(where, "expected true or false, got '" + tok + "'");
}

std::vector<double> parse_doubles(const std::string& value, std::size_t n,
                                  const std::string& where) {
  auto toks = split_ws(value);
  if (toks.size() != n)
    fail(where, "expected " + std::to_string(n) + " numbers, got " + std::to_string(toks.size()));
  std::vector<double> out;
  out.reserve(n);
  for (const auto& t : toks) out.push_back(parse_double(t, where));
  return out;
}

void assign_linear(LinearSineParams& p, const std::string& value, const std::string& where) {
  auto v = parse_doubles(value, 6, where);
  p.c0 = v[0]; p.ct = v[1]; p.cx = v[2]; p.cy = v[3]; p.cz = v[4]; p.cu = v[5];
}

void assign_sine(LinearSineParams& p, const std::string& value, const std::string& where) {
  auto v = parse_doubles(value, 6, where);
  p.amp = v[0]; p.wx = v[1]; p.wy = v[2]; p.wz = v[3]; p.wu = v[4]; p.phase = v[5];
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_list(std::initializer_list<double> vs) {
  std::string out;
  for (double v : vs) {
    if (!out.empty()) out += ' ';
    out += fmt(v);
  }
  return out;
}

bool sine_present(const LinearSineParams& p) {
  return p.amp != 0 || p.wx != 0 || p.wy != 0 || p.wz != 0 || p.wu != 0 || p.phase != 0;
}

bool sine_present(const TerminalParams& p) {
  return p.amp != 0 || p.w != 0 || p.phase != 0;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  Scenario sc;
  std::string section;
  std::istringstream lines(text);
  std::string raw;
  int lineno = 0;

  while (std::getline(lines, raw)) {
    ++lineno;
    std::string line = raw;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail("line " + std::to_string(lineno), "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      static const char* known[] = {"problem",     "coefficients", "controls", "grid",
                                    "montecarlo",  "tolerances",   "verify",   "cbeta"};
      bool ok = false;
      for (const char* k : known) ok = ok || section == k;
      if (!ok) fail("line " + std::to_string(lineno), "unknown section [" + section + "]");
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail("line " + std::to_string(lineno), "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail("line " + std::to_string(lineno), "empty key");
    if (section.empty()) fail("line " + std::to_string(lineno), "key before any section");
    const std::string where = "[" + section + "] " + key;

    if (section == "problem") {
      if (key == "name") sc.name = value;
      else if (key == "T") sc.T = parse_double(value, where);
      else if (key == "t0") sc.t0 = parse_double(value, where);
      else if (key == "x0") sc.x0 = parse_double(value, where);
      else if (key == "beta0") sc.beta0 = parse_double(value, where);
      else if (key == "regime") {
        if (value == "general") sc.regime = Regime::general;
        else if (value == "linear_sigma") sc.regime = Regime::linear_sigma;
        else if (value == "local_convex") sc.regime = Regime::local_convex;
        else fail(where, "unknown regime '" + value + "'");
      } else fail(where, "unknown key");
    } else if (section == "coefficients") {
      auto& c = sc.coefficients;
      if (key == "b") assign_linear(c.b, value, where);
      else if (key == "b.sine") assign_sine(c.b, value, where);
      else if (key == "sigma") assign_linear(c.sigma, value, where);
      else if (key == "sigma.sine") assign_sine(c.sigma, value, where);
      else if (key == "g") assign_linear(c.g, value, where);
      else if (key == "g.sine") assign_sine(c.g, value, where);
      else if (key == "phi") {
        auto v = parse_doubles(value, 3, where);
        c.phi.f0 = v[0]; c.phi.f1 = v[1]; c.phi.f2 = v[2];
      } else if (key == "phi.sine") {
        auto v = parse_doubles(value, 3, where);
        c.phi.amp = v[0]; c.phi.w = v[1]; c.phi.phase = v[2];
      } else if (key == "L1") c.L1 = parse_double(value, where);
      else if (key == "L2") c.L2 = parse_double(value, where);
      else if (key == "L3") c.L3 = parse_double(value, where);
      else fail(where, "unknown key");
    } else if (section == "controls") {
      if (key == "points") {
        auto toks = split_ws(value);
        if (toks.empty()) fail(where, "needs at least one value");
        sc.controls.points.clear();
        for (const auto& t : toks) sc.controls.points.push_back(parse_double(t, where));
      } else if (key == "convex") sc.controls.convex = parse_bool(value, where);
      else if (key == "box") {
        auto v = parse_doubles(value, 2, where);
        sc.controls.box_lo = v[0];
        sc.controls.box_hi = v[1];
      } else fail(where, "unknown key");
    } else if (section == "grid") {
      if (key == "nt") sc.grid.nt = static_cast<int>(parse_long(value, where));
      else if (key == "nx") sc.grid.nx = static_cast<int>(parse_long(value, where));
      else if (key == "xmin") sc.grid.xmin = parse_double(value, where);
      else if (key == "xmax") sc.grid.xmax = parse_double(value, where);
      else fail(where, "unknown key");
    } else if (section == "montecarlo") {
      if (key == "paths") sc.montecarlo.paths = static_cast<int>(parse_long(value, where));
      else if (key == "seed") {
        long s = parse_long(value, where);
        if (s < 0) fail(where, "seed must be nonnegative");
        sc.montecarlo.seed = static_cast<std::uint64_t>(s);
      } else if (key == "regression_degree")
        sc.montecarlo.regression_degree = static_cast<int>(parse_long(value, where));
      else if (key == "picard_max_sweeps")
        sc.montecarlo.picard_max_sweeps = static_cast<int>(parse_long(value, where));
      else if (key == "out_of_box_cap")
        sc.montecarlo.out_of_box_cap = parse_double(value, where);
      else fail(where, "unknown key");
    } else if (section == "tolerances") {
      if (key == "fixed_point") sc.tolerances.fixed_point = parse_double(value, where);
      else if (key == "verification") sc.tolerances.verification = parse_double(value, where);
      else if (key == "cfl_safety") sc.tolerances.cfl_safety = parse_double(value, where);
      else fail(where, "unknown key");
    } else if (section == "verify") {
      if (key == "sample_paths") sc.verify.sample_paths = static_cast<int>(parse_long(value, where));
      else if (key == "sample_times")
        sc.verify.sample_times = static_cast<int>(parse_long(value, where));
      else if (key == "jet_rungs") sc.verify.jet_rungs = static_cast<int>(parse_long(value, where));
      else if (key == "jet_delta0_dx") sc.verify.jet_delta0_dx = parse_double(value, where);
      else if (key == "jet_tau0_dt") sc.verify.jet_tau0_dt = parse_double(value, where);
      else fail(where, "unknown key");
    } else if (section == "cbeta") {
      long beta = parse_long(key, "[cbeta] key");
      if (beta < 1) fail(where, "beta must be >= 1");
      sc.c_beta[static_cast<int>(beta)] = parse_double(value, where);
    }
  }

  sc.validate();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("scenario: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string format_scenario(const Scenario& s) {
  std::ostringstream out;
  out << "[problem]\n";
  out << "name = " << s.name << "\n";
  out << "T = " << fmt(s.T) << "\n";
  out << "t0 = " << fmt(s.t0) << "\n";
  out << "x0 = " << fmt(s.x0) << "\n";
  out << "beta0 = " << fmt(s.beta0) << "\n";
  out << "regime = " << to_string(s.regime) << "\n";

  const auto& c = s.coefficients;
  out << "\n[coefficients]\n";
  auto emit_linear = [&](const char* name, const LinearSineParams& p) {
    out << name << " = " << fmt_list({p.c0, p.ct, p.cx, p.cy, p.cz, p.cu}) << "\n";
    if (sine_present(p))
      out << name << ".sine = " << fmt_list({p.amp, p.wx, p.wy, p.wz, p.wu, p.phase}) << "\n";
  };
  emit_linear("b", c.b);
  emit_linear("sigma", c.sigma);
  emit_linear("g", c.g);
  out << "phi = " << fmt_list({c.phi.f0, c.phi.f1, c.phi.f2}) << "\n";
  if (sine_present(c.phi))
    out << "phi.sine = " << fmt_list({c.phi.amp, c.phi.w, c.phi.phase}) << "\n";
  out << "L1 = " << fmt(c.L1) << "\n";
  out << "L2 = " << fmt(c.L2) << "\n";
  out << "L3 = " << fmt(c.L3) << "\n";

  out << "\n[controls]\n";
  out << "points =";
  for (double u : s.controls.points) out << ' ' << fmt(u);
  out << "\n";
  out << "convex = " << (s.controls.convex ? "true" : "false") << "\n";
  out << "box = " << fmt_list({s.controls.box_lo, s.controls.box_hi}) << "\n";

  out << "\n[grid]\n";
  out << "nt = " << s.grid.nt << "\n";
  out << "nx = " << s.grid.nx << "\n";
  out << "xmin = " << fmt(s.grid.xmin) << "\n";
  out << "xmax = " << fmt(s.grid.xmax) << "\n";

  out << "\n[montecarlo]\n";
  out << "paths = " << s.montecarlo.paths << "\n";
  out << "seed = " << s.montecarlo.seed << "\n";
  out << "regression_degree = " << s.montecarlo.regression_degree << "\n";
  out << "picard_max_sweeps = " << s.montecarlo.picard_max_sweeps << "\n";
  out << "out_of_box_cap = " << fmt(s.montecarlo.out_of_box_cap) << "\n";

  out << "\n[tolerances]\n";
  out << "fixed_point = " << fmt(s.tolerances.fixed_point) << "\n";
  out << "verification = " << fmt(s.tolerances.verification) << "\n";
  out << "cfl_safety = " << fmt(s.tolerances.cfl_safety) << "\n";

  out << "\n[verify]\n";
  out << "sample_paths = " << s.verify.sample_paths << "\n";
  out << "sample_times = " << s.verify.sample_times << "\n";
  out << "jet_rungs = " << s.verify.jet_rungs << "\n";
  out << "jet_delta0_dx = " << fmt(s.verify.jet_delta0_dx) << "\n";
  out << "jet_tau0_dt = " << fmt(s.verify.jet_tau0_dt) << "\n";

  if (!s.c_beta.empty()) {
    out << "\n[cbeta]\n";
    for (const auto& [beta, cb] : s.c_beta) out << beta << " = " << fmt(cb) << "\n";
  }
  return out.str();
}

void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("scenario: cannot write '" + path + "'");
  out << format_scenario(s);
}

void Scenario::validate() const {
  if (name.empty()) fail("[problem] name", "must be nonempty");
  for (char ch : name)
    if (std::isspace(static_cast<unsigned char>(ch))) fail("[problem] name", "no whitespace allowed");
  if (!(T > t0)) fail("[problem] T", "must exceed t0");
  if (!(beta0 > 0.0) || !(beta0 < 1.0)) fail("[problem] beta0", "must lie in (0, 1)");
  if (!(x0 >= grid.xmin && x0 <= grid.xmax)) fail("[problem] x0", "must lie inside the grid box");

  if (!(coefficients.L1 > 0)) fail("[coefficients] L1", "must be positive");
  if (coefficients.L2 < 0) fail("[coefficients] L2", "must be nonnegative");
  if (coefficients.L3 < 0) fail("[coefficients] L3", "must be nonnegative");

  if (regime == Regime::local_convex) {
    const auto& sg = coefficients.sigma;
    const bool sigma_zero = sg.c0 == 0 && sg.ct == 0 && sg.cx == 0 && sg.cy == 0 &&
                            sg.cz == 0 && sg.cu == 0 && sg.amp == 0;
    const bool b_z_free =
        coefficients.b.cz == 0 && (coefficients.b.amp == 0 || coefficients.b.wz == 0);
    if (!sigma_zero) fail("[problem] regime", "local_convex needs a vanishing diffusion");
    if (!b_z_free) fail("[problem] regime", "local_convex needs a z-free drift");
    if (!controls.convex) fail("[problem] regime", "local_convex needs a convex control set");
  }

  if (controls.points.empty()) fail("[controls] points", "must be nonempty");
  for (double u : controls.points)
    if (!std::isfinite(u)) fail("[controls] points", "values must be finite");
  if (controls.convex) {
    if (!(controls.box_lo < controls.box_hi))
      fail("[controls] box", "convex control sets need box_lo < box_hi");
    for (double u : controls.points)
      if (u < controls.box_lo || u > controls.box_hi)
        fail("[controls] points", "point outside the declared box");
  }

  if (grid.nt < 1) fail("[grid] nt", "must be >= 1");
  if (grid.nx < 2) fail("[grid] nx", "must be >= 2");
  if (!(grid.xmin < grid.xmax)) fail("[grid] xmin", "must be below xmax");

  if (montecarlo.paths < 1) fail("[montecarlo] paths", "must be >= 1");
  if (montecarlo.regression_degree < 0 || montecarlo.regression_degree > 8)
    fail("[montecarlo] regression_degree", "must lie in [0, 8]");
  if (montecarlo.picard_max_sweeps < 1) fail("[montecarlo] picard_max_sweeps", "must be >= 1");
  if (montecarlo.out_of_box_cap < 0 || montecarlo.out_of_box_cap > 1)
    fail("[montecarlo] out_of_box_cap", "must lie in [0, 1]");

  if (!(tolerances.fixed_point > 0)) fail("[tolerances] fixed_point", "must be positive");
  if (!(tolerances.verification > 0)) fail("[tolerances] verification", "must be positive");
  if (!(tolerances.cfl_safety > 0) || tolerances.cfl_safety > 1)
    fail("[tolerances] cfl_safety", "must lie in (0, 1]");

  if (verify.sample_paths < 1) fail("[verify] sample_paths", "must be >= 1");
  if (verify.sample_times < 1) fail("[verify] sample_times", "must be >= 1");
  if (verify.jet_rungs < 1) fail("[verify] jet_rungs", "must be >= 1");
  if (!(verify.jet_delta0_dx > 0)) fail("[verify] jet_delta0_dx", "must be positive");
  if (!(verify.jet_tau0_dt > 0)) fail("[verify] jet_tau0_dt", "must be positive");

  for (const auto& [beta, cb] : c_beta) {
    if (beta < 1) fail("[cbeta]", "beta must be >= 1");
    if (!(cb > 0)) fail("[cbeta]", "C_beta must be positive");
  }
}

}
