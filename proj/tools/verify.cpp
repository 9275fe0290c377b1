// verify: run identity suites on a manifold config and write a report.
// Exit codes: 0 all pass, 1 failures, 2 config or I/O error.

#include "finsler/config.hpp"
#include "finsler/suites.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace finsler;

namespace {

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr)) throw std::runtime_error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::pair<std::string, double> parse_tol(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--tol expects check=value, got '" + s + "'");
  const std::string id = s.substr(0, eq);
  if (!known_check(id)) throw ConfigError("--tol: unknown check '" + id + "'");
  double v;
  try {
    std::size_t pos = 0;
    v = std::stod(s.substr(eq + 1), &pos);
    if (pos != s.size() - eq - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("--tol: bad value in '" + s + "'");
  }
  if (!(v >= 0)) throw ConfigError("--tol: tolerance must be nonnegative");
  return {id, v};
}

// writes to a file or stdout ("-")
template <class F>
void emit(const std::string& path, F&& body) {
  if (path == "-") {
    body(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output '" + path + "'");
  body(out);
  out.flush();
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

struct ArcArgs {
  std::string path;
  std::string mode = "closed";
  std::vector<double> constants{0.0, 0.0, std::numbers::pi / 2};
  std::vector<double> range;
  int samples = 100;
};

int dump_arc(const ManifoldSpec& spec, const ArcArgs& a, std::uint64_t seed, bool minus) {
  if (spec.dim != 3 && a.mode == "closed") throw ConfigError("--dump-arc closed mode needs a 3-dimensional config");
  Trial t(spec, 0, seed, name_salt("dump-arc"), 1, minus);
  GeodesicArc arc;
  if (a.mode == "closed") {
    if (a.constants.size() != 3) throw ConfigError("--arc-constants expects C s_tilde phi_tilde");
    const ArcConstants k{a.constants[0], a.constants[1], a.constants[2]};
    if (std::abs(t.f.h * k.C_tilde) > 1.0) throw ConfigError("invalid arc constants: |h C| > 1");
    std::vector<double> r = a.range;
    if (r.empty()) r = {k.s_tilde, k.s_tilde + std::numbers::pi / t.f.h};
    if (r.size() != 2 || !(r[1] > r[0])) throw ConfigError("--arc-range expects s0 < s1");
    arc = geodesic_closed_arc(t.f, k, r[0], r[1], a.samples);
  } else {
    BvpOptions opt;
    opt.sample_count = a.samples;
    arc = geodesic_numeric(t.f, t.arc_pair().first, t.arc_pair().second, opt);
  }
  emit(a.path, [&](std::ostream& os) { write_arc(os, t.f, arc); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Run Finsleroid identity suites and write residual reports"};
  std::string config_path, out_path = "-", format = "delimited", chart = "plus", break_check;
  std::vector<std::string> suites{"all"}, tols;
  int trials = 50;
  std::uint64_t seed = 1;
  bool fail_fast = false, list = false;
  ArcArgs arc;

  app.add_option("--config", config_path, "manifold config (JSON)")->required();
  app.add_option("--suite", suites, "suite name, or all")->take_all();
  app.add_option("--trials", trials, "random trials per suite")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "sample stream seed");
  app.add_option("--tol", tols, "tolerance override check=value")->take_all();
  app.add_option("--out", out_path, "output path, - for stdout");
  app.add_option("--format", format, "delimited or structured")->check(CLI::IsMember({"delimited", "structured"}));
  app.add_flag("--fail-fast", fail_fast, "stop at the first failing check");
  app.add_option("--chart", chart, "plus (default) or minus: sample directions in the south chart")
      ->check(CLI::IsMember({"plus", "minus"}));
  app.add_option("--break", break_check, "reverse the sign of D for this check (negative control)");
  app.add_flag("--list", list, "print the suite catalog and exit");
  app.add_option("--dump-arc", arc.path, "write indicatrix geodesic samples instead of running suites");
  app.add_option("--arc-mode", arc.mode, "closed or numeric")->check(CLI::IsMember({"closed", "numeric"}));
  app.add_option("--arc-constants", arc.constants, "C s_tilde phi_tilde")->expected(3);
  app.add_option("--arc-range", arc.range, "s0 s1")->expected(2);
  app.add_option("--samples", arc.samples, "arc samples")->check(CLI::Range(2, 1000000));

  // --list does not need a config
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--list") {
      for (const auto& s : suite_catalog()) {
        std::cout << s.name << '\n';
        for (const auto& c : s.checks) std::cout << "  " << c.id << "  [" << c.ref << "]  tol " << c.tol << '\n';
      }
      return 0;
    }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const std::string bytes = read_file(config_path);
    const ManifoldSpec spec = load_spec_text(bytes);
    const bool minus = chart == "minus";
    if (!arc.path.empty()) return dump_arc(spec, arc, seed, minus);

    RunOptions opt;
    opt.trials = trials;
    opt.seed = seed;
    opt.fail_fast = fail_fast;
    opt.chart_minus = minus;
    for (const auto& t : tols) opt.tol_overrides.insert(parse_tol(t));
    if (!break_check.empty() && !known_check(break_check)) throw ConfigError("--break: unknown check '" + break_check + "'");
    opt.break_check = break_check;

    std::vector<std::string> names;
    for (const auto& s : suites) {
      if (s == "all") {
        for (const auto& c : suite_catalog()) names.push_back(c.name);
      } else if (!find_suite(s)) {
        throw ConfigError("unknown suite '" + s + "'");
      } else {
        names.push_back(s);
      }
    }

    const auto reps = run_suites(spec, names, opt, sha256_hex(bytes));
    emit(out_path, [&](std::ostream& os) {
      if (format == "structured") os << to_json(reps).dump(2) << '\n';
      else write_delimited(os, reps);
    });
    int rows = 0, failed = 0;
    for (const auto& r : reps)
      for (const auto& c : r.per_check) {
        ++rows;
        if (!c.pass) {
          ++failed;
          std::cerr << "FAIL " << r.suite_name << '/' << c.check_id << "  residual " << format_residual(c.max_residual)
                    << "  tol " << c.tolerance << (c.reason.empty() ? "" : "  (" + c.reason + ")") << '\n';
        }
      }
    std::cerr << rows << " checks, " << failed << " failed\n";
    return failed ? 1 : 0;
  } catch (const SpecError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const EvalError& e) {
    // only reachable from --dump-arc; suites turn these into rows
    std::cerr << "evaluation error: " << e.what() << '\n';
    return 1;
  }
}
