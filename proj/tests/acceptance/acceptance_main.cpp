// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "phtp/experiment.hpp"

using namespace phtp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path kConfigs = PHTP_CONFIG_DIR;
const fs::path kOut = fs::current_path() / "acceptance_out";

/// Runs an experiment config into kOut / name and returns its report.
json run_experiment(const std::string& config, const std::string& name, int& exit_code) {
  const fs::path out = kOut / name;
  fs::remove_all(out);
  std::ostringstream log;
  exit_code = run(load_config(kConfigs / config), out, 1, log);
  return json::parse(slurp(out / "report.json"));
}

Vector sin_profile(const PHSystem& sys) { return (M_PI * sys.grid.positions.array()).sin().matrix(); }

Outcome structure() {
  Outcome o{true, ""};
  const PHSystem diff = build_diffusion(DiffusionConfig{});
  const PHSystem beam = build_timoshenko(TimoshenkoConfig{});
  for (const PHSystem* s : {&diff, &beam}) {
    const double skew = skew_defect(s->ops.J);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s->ops.R, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    const double nR = es.eigenvalues().cwiseAbs().maxCoeff();
    o.pass = o.pass && skew == 0.0 && lmin >= -1e-12 * nR;
    o.detail += fmt("|J+J^T|=%.1e ", skew) + fmt("lmin/|R|=%.1e; ", lmin / nR);
  }
  const double h = 1.0 / 21.0;
  const double closed = 2.0 * 0.1 * (1.0 - std::cos(M_PI * h)) / (h * h);
  const double rel = std::abs(eig_sym(diff.ops.R).require_sigma_plus() - closed) / closed;
  o.pass = o.pass && rel <= 1e-10;
  o.detail += fmt("sigma_+ rel err %.1e", rel);
  return o;
}

Outcome dissipation_equality() {
  const PHSystem sys = build_diffusion(DiffusionConfig{});
  const Vector x0 = sin_profile(sys);
  Outcome o{true, ""};
  double prev = 0.0;
  for (Index N : {501, 1001, 2001, 4001}) {
    const TimeGrid g(5.0, N);
    const ControlSignal u = ControlSignal::constant(g, Vector::Ones(1));
    const EnergyReport e = energy_report(sys, simulate(sys, x0, u), u);
    const double r = std::abs(e.residual);
    if (N == 1001) {
      const double rel = r / e.dissipated;
      o.pass = o.pass && rel <= 1e-5;
      o.detail += fmt("rel@1001=%.2e ratios", rel);
    }
    if (prev > 0.0) {
      o.pass = o.pass && prev / r >= 8.0;
      o.detail += fmt(" %.1f", prev / r);
    }
    prev = r;
  }
  return o;
}

Outcome oracle_equivalence() {
  const auto inst = oracle::small_instance();
  const auto fd = oracle::finite_difference_maps(inst.sys, inst.x0, inst.grid);
  const auto J = oracle::quadratic_from_maps(inst.sys, fd, inst.grid);
  const auto kkt = oracle::dense_kkt(J, fd.M, inst.xT - fd.xT0);
  const double box = 10.0 * kkt.u.cwiseAbs().maxCoeff();

  OCPProblem p{inst.sys, inst.x0, inst.xT, inst.grid, ControlSet::box(1, box), {}};
  p.options.terminal_tol = 1e-10;
  p.options.kkt_tol = 1e-9;
  const OCPResult r = solve(p);
  const double rel = std::abs(r.cost_equiv - kkt.cost) / kkt.cost;
  const bool inactive = r.u_star.values.cwiseAbs().maxCoeff() < box;

  const Matrix Z = oracle::null_space(fd.M);
  std::mt19937_64 rng(2024);
  const Vector us = r.u_star.stacked();
  int dominated = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Vector d = Z * oracle::random_vector(rng, Z.cols());
    const Vector u = us + d * (0.5 * us.cwiseAbs().maxCoeff() / d.cwiseAbs().maxCoeff());
    const ControlSignal uc = ControlSignal::from_stacked(p.grid, 1, u);
    const double Ju = energy_report(p.sys, simulate(p.sys, p.x0, uc), uc).dissipated;
    if (p.uset.contains(uc.at(0)) && r.cost_equiv <= Ju + 1e-8) ++dominated;
  }
  return {rel <= 1e-6 && inactive && dominated == 20,
          fmt("cost rel err %.2e", rel) + ", random feasible dominated " + std::to_string(dominated) + "/20"};
}

Outcome trivial_optimum() {
  const PHSystem sys = build_diffusion(DiffusionConfig{});
  const Vector two = Vector::Constant(21, 2.0);
  Outcome o{true, ""};
  for (auto [T, N] : {std::pair{1.0, Index{51}}, std::pair{5.0, Index{251}}}) {
    const OCPResult r = solve(OCPProblem{sys, two, two, TimeGrid(T, N), ControlSet::box(1, 10.0), {}});
    const double umax = r.u_star.values.cwiseAbs().maxCoeff();
    o.pass = o.pass && r.cost_equiv <= 1e-10 && umax <= 1e-8;
    o.detail += fmt("T=%g: ", T) + fmt("cost %.1e ", r.cost_equiv) + fmt("|u|max %.1e; ", umax);
  }
  return o;
}

json paper_report;
int paper_exit = -1;

Outcome turnpike_bound_check() {
  paper_report = run_experiment("diffusion_paper.ini", "diffusion_paper_1", paper_exit);
  const json& b = paper_report["bound"];
  if (b.is_null()) return {false, "no bound in report"};
  const double F = b["F"], G = b["G"], corr = b["correction"];
  Outcome o{paper_exit == 0 && corr <= 0.05 * G,
            fmt("F=%.4g", F) + fmt(" correction/G=%.1e metrics", corr / G)};
  for (const auto& h : paper_report["horizons"]) {
    const double m = h["integral_metric"];
    o.pass = o.pass && h["converged"].get<bool>() && m <= F;
    o.detail += fmt(" %.4g", m);
  }
  return o;
}

Outcome midpoint_decay() {
  if (paper_report.is_null()) return {false, "criterion 5 did not produce a report"};
  const auto& hs = paper_report["horizons"];
  Outcome o{true, "dist2(T/2):"};
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& h : hs) {
    const double d = h["midpoint_dist"];
    o.pass = o.pass && d <= 1.1 * prev;
    o.detail += fmt(" %.3g", d);
    prev = d;
  }
  const double u5 = hs.front()["mean_abs_u_coast"], u40 = hs.back()["mean_abs_u_coast"];
  o.pass = o.pass && u40 <= 0.25 * u5;
  o.detail += fmt("; coast |u| ratio %.3f", u40 / u5);
  return o;
}

Outcome timoshenko_split() {
  Outcome o{true, ""};
  for (const char* cfg : {"timoshenko_const.ini", "timoshenko_linear.ini"}) {
    int code = -1;
    const json rep = run_experiment(cfg, fs::path(cfg).stem().string(), code);
    const json& h = rep["horizons"].back();
    const json& f = h["fields"];
    const double coast24 = f[1]["coast_mean"].get<double>() + f[3]["coast_mean"].get<double>();
    const double full24 = f[1]["full_mean"].get<double>() + f[3]["full_mean"].get<double>();
    const double x3c = f[2]["coast_mean"], x3i = f[2]["initial"];
    o.pass = o.pass && code == 0 && coast24 <= 0.05 * full24 && x3c >= 0.1 * x3i;
    o.detail += std::string(fs::path(cfg).stem().string()) + fmt(": x2x4 coast/full %.3f", coast24 / full24) +
                fmt(", x3 coast/initial %.2f; ", x3c / x3i);
  }
  return o;
}

Outcome determinism() {
  if (paper_report.is_null()) return {false, "criterion 5 did not produce a report"};
  int code = -1;
  run_experiment("diffusion_paper.ini", "diffusion_paper_2", code);
  const std::string a = slurp(kOut / "diffusion_paper_1" / "report.json");
  const std::string b = slurp(kOut / "diffusion_paper_2" / "report.json");
  return {!a.empty() && a == b, a == b ? "report.json byte-identical" : "report.json differs"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria{
      {1, "structure", 5.0, structure},
      {2, "dissipation equality", 30.0, dissipation_equality},
      {3, "oracle equivalence", 10.0, oracle_equivalence},
      {4, "trivial optimum", 600.0, trivial_optimum},
      {5, "turnpike bound", 600.0, turnpike_bound_check},
      {6, "midpoint decay", 600.0, midpoint_decay},
      {7, "timoshenko subspace split", 600.0, timoshenko_split},
      {8, "determinism", 600.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs < c.limit_s;
    if (!pass) ++failed;
    std::printf("criterion %d %-26s %s  (%.1fs / %.0fs)  %s\n", c.id, c.name, pass ? "PASS" : "FAIL", secs,
                c.limit_s, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%s: %zu/%zu criteria passed\n", failed ? "FAILED" : "OK", criteria.size() - failed, criteria.size());
  return failed ? 1 : 0;
}
