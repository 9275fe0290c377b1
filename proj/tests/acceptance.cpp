// Acceptance runner: one pass/fail line per criterion, exit 1 if any fails.
// Library calls for the identity checks, the verify binary for the CLI ones.

#include "finsler/config.hpp"
#include "finsler/suites.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace finsler;
namespace fs = std::filesystem;

namespace {

constexpr int kTrials = 50;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [" << what << "]";
    }
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

ManifoldSpec load_with_g(const fs::path& file, std::optional<double> g = std::nullopt) {
  nlohmann::json j = nlohmann::json::parse(read_file(file.string()));
  if (g) j["g"] = *g;
  return load_spec_text(j.dump());
}

// runs the named checks of one suite; a row that never applied counts as a failure
void run_checks(Outcome& out, const ManifoldSpec& spec, const std::string& suite, const std::vector<std::string>& ids,
                const std::string& label = "") {
  const Suite* s = find_suite(suite);
  if (!s) throw std::logic_error("no suite " + suite);
  Suite sub{s->name, s->level, {}};
  for (const auto& id : ids) {
    auto it = std::find_if(s->checks.begin(), s->checks.end(), [&](const Check& c) { return c.id == id; });
    if (it == s->checks.end()) throw std::logic_error("no check " + id);
    sub.checks.push_back(*it);
  }
  RunOptions opt;
  opt.trials = kTrials;
  const SuiteReport rep = run_suite(spec, sub, opt, "acceptance");
  for (const auto& r : rep.per_check) {
    const std::string tag = label.empty() ? r.check_id : label + ":" + r.check_id;
    if (r.check_id == "l-tensor-negative-control" && r.max_residual > 0)
      out.detail << ' ' << tag << ": max|L|=" << fmt(1e-2 / r.max_residual) << " (need >= 0.01)";
    else
      out.detail << ' ' << tag << '=' << fmt(r.max_residual) << '/' << fmt(r.tolerance);
    out.require(r.pass, tag + " failed" + (r.reason.empty() ? "" : ": " + r.reason));
    out.require(r.reason != "not applicable", tag + " not applicable");
  }
}

int run_command(const std::string& cmd) {
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string quote(const std::string& s) {
  std::string r = "'";
  for (char c : s) r += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return r + "'";
}

// delimited report rows keyed by check id
std::map<std::string, std::vector<std::string>> read_rows(const fs::path& p) {
  std::map<std::string, std::vector<std::string>> rows;
  std::istringstream in(read_file(p.string()));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) f.push_back(cell);
    if (f.size() >= 2) rows[f[1]] = f;
  }
  return rows;
}

// drops the trailing wall_time column
std::string strip_timing(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) out << line.substr(0, line.rfind('\t')) << '\n';
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string verify, configs, workdir;
  std::vector<int> only;
  app.add_option("--verify", verify, "path to the verify binary")->required();
  app.add_option("--configs", configs, "config directory")->required();
  app.add_option("--workdir", workdir, "scratch directory for reports")->required();
  app.add_option("--only", only, "run these criteria only");
  CLI11_PARSE(app, argc, argv);

  const fs::path cfg(configs);
  const fs::path work = fs::path(workdir) / "acceptance_reports";
  fs::create_directories(work);
  const fs::path curved3 = cfg / "curved3_g1.json", curved2 = cfg / "curved2_gm0.9.json",
                 parallel3 = cfg / "parallel3_g1.2.json";

  struct Criterion {
    int id;
    std::string name;
    std::function<void(Outcome&)> fn;
  };
  const std::vector<Criterion> crit = {
      {1, "hessian consistency",
       [&](Outcome& o) {
         for (double g : {-1.5, -0.5, 0.5, 1.0, 1.5})
           run_checks(o, load_with_g(curved3, g), "core-identities", {"metric-hessian"}, "g" + fmt(g));
       }},
      {2, "determinant identity",
       [&](Outcome& o) {
         for (double g : {-1.5, 1.0}) run_checks(o, load_with_g(curved3, g), "core-identities", {"metric-determinant"}, "g" + fmt(g));
         run_checks(o, load_with_g(cfg / "curved4_g0.6.json"), "core-identities", {"metric-determinant"}, "N4");
       }},
      {3, "cartan contraction and closed form",
       [&](Outcome& o) {
         for (double g : {-1.5, 1.0})
           run_checks(o, load_with_g(curved3, g), "core-identities", {"cartan-contraction", "cartan-finite-difference"},
                      "g" + fmt(g));
       }},
      {4, "kappa isometry, norm, roundtrip, determinant",
       [&](Outcome& o) {
         run_checks(o, load_with_g(curved3), "kappa", {"kappa-isometry", "kappa-norm", "kappa-roundtrip", "kappa-determinant"});
       }},
      {5, "indicatrix curvature h^2 at 20 points",
       [&](Outcome& o) {
         for (double g : {0.0, 1.0, -1.0}) run_checks(o, load_with_g(curved3, g), "ratios", {"gauss-curvature"}, "g" + fmt(g));
       }},
      {6, "area and volume laws",
       [&](Outcome& o) {
         run_checks(o, load_with_g(curved3), "ratios", {"area-ratio", "volume-ratio", "area-over-volume"}, "N3");
         run_checks(o, load_with_g(curved2), "ratios", {"area-over-volume"}, "N2");
       }},
      {7, "angle laws",
       [&](Outcome& o) {
         run_checks(o, load_with_g(curved3), "angle",
                    {"angle-to-axis", "angle-opposed-axes", "angle-kappa-image", "angle-arc-length"});
       }},
      {8, "metricity through the CLI, with the broken-sign control",
       [&](Outcome& o) {
         const ManifoldSpec spec = load_with_g(curved3);
         SampleRng rng(7);
         double grad = 0;
         for (int i = 0; i < 10; ++i) grad = std::max(grad, max_abs(eval_point(spec, sample_point(rng, spec), 1).nabla_b));
         o.detail << " max|nabla b|=" << fmt(grad);
         o.require(grad > 1e-3, "config has a parallel axis");
         const fs::path good = work / "metricity.tsv", bad = work / "metricity_broken.tsv";
         const std::string base = quote(verify) + " --config " + quote(curved3.string()) +
                                  " --suite connection-metricity --trials " + std::to_string(kTrials);
         const int rc = run_command(base + " --out " + quote(good.string()) + " 2>/dev/null");
         o.require(rc == 0, "verify exit " + std::to_string(rc));
         const auto rows = read_rows(good);
         for (const char* id : {"metricity-metric", "metricity-norm", "metricity-support", "metricity-lowered-support"}) {
           auto it = rows.find(id);
           o.require(it != rows.end() && it->second.size() > 5 && it->second[5] == "pass", std::string(id) + " row");
           if (it != rows.end() && it->second.size() > 4) o.detail << ' ' << id << '=' << fmt(std::stod(it->second[3]));
         }
         const int rb = run_command(base + " --break metricity-metric --out " + quote(bad.string()) + " 2>/dev/null");
         o.require(rb == 1, "broken sign exit " + std::to_string(rb));
         const auto brows = read_rows(bad);
         auto it = brows.find("metricity-metric");
         const double r = it != brows.end() ? std::stod(it->second[3]) : 0.0;
         o.detail << " broken=" << fmt(r);
         o.require(it != brows.end() && it->second[5] == "FAIL" && r > 1e-3, "broken sign not detected");
       }},
      {9, "angle-preserving transport",
       [&](Outcome& o) {
         run_checks(o, load_with_g(curved3), "angle-transport", {"transport-analytic", "transport-rk4-angle", "transport-rk4-norm"});
       }},
      {10, "connection limits",
       [&](Outcome& o) {
         run_checks(o, load_with_g(parallel3), "connection-metricity", {"parallel-axis-limit"}, "parallel");
         run_checks(o, load_with_g(curved2), "connection-metricity", {"two-dim-linearity"}, "N2");
       }},
      {11, "curvature equalities",
       [&](Outcome& o) {
         run_checks(o, load_with_g(curved3), "curvature",
                    {"rho-commutator", "rho-contraction", "M-contraction", "E-contraction", "M-form-equivalence", "rho-form-equivalence",
                     "rho-skew",
                     "M-support-contraction", "E-support-contraction", "E-symmetrization", "auxiliary-identities",
                     "cyclic-M", "cyclic-rho"});
       }},
      {12, "conformal flatness with negative control",
       [&](Outcome& o) {
         run_checks(o, load_with_g(curved3), "conformal-flatness", {"l-tensor", "l-tensor-negative-control"});
       }},
      {13, "N=3 indicatrix geodesics",
       [&](Outcome& o) {
         run_checks(o, load_with_g(curved3), "geodesics",
                    {"closed-form-ode", "bvp-closed-form", "expansion-reconstruction", "meridian-expansion"});
       }},
      {14, "CLI determinism",
       [&](Outcome& o) {
         std::string text[2];
         for (int k = 0; k < 2; ++k) {
           const fs::path p = work / ("determinism_" + std::to_string(k) + ".tsv");
           const int rc = run_command(quote(verify) + " --config " + quote(curved3.string()) +
                                      " --suite all --seed 20261017 --out " + quote(p.string()) + " 2>/dev/null");
           o.require(rc == 0 || rc == 1, "verify exit " + std::to_string(rc));
           text[k] = strip_timing(read_file(p.string()));
         }
         const auto lines = std::count(text[0].begin(), text[0].end(), '\n');
         o.detail << " rows=" << lines - 1;
         o.require(lines > 1, "empty report");
         o.require(text[0] == text[1], "reports differ");
       }},
  };

  const auto t0 = std::chrono::steady_clock::now();
  int failed = 0;
  for (const auto& c : crit) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    const auto t1 = std::chrono::steady_clock::now();
    try {
      c.fn(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("error: ") + e.what());
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    if (!o.pass) ++failed;
    std::cout << "criterion " << std::setw(2) << c.id << "  " << (o.pass ? "PASS" : "FAIL") << "  " << c.name << " ("
              << std::fixed << std::setprecision(2) << dt << " s)" << std::defaultfloat << ":" << o.detail.str() << std::endl;
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << " in " << std::fixed
            << std::setprecision(1) << total << " s" << std::endl;
  return failed ? 1 : 0;
}
