#pragma once

// Experiment runner behind the `phtp` command line tool.
//
// Configs are INI-style text:
//
//   [model]     type = diffusion | timoshenko, model parameters
//   [problem]   x0, xT (profiles), horizons, intervals
//   [controls]  kind = box | ball, u_max, radius
//   [solver]    inner, max_outer, max_inner, rho0, rho_factor, terminal_tol, kkt_tol
//   [turnpike]  T0, T1, steer_iterations
//   [output]    dir, full_state
//   [debug]     inject = asymmetric_J | zero_dissipation
//
// Profiles: sin_pi, const:<c>, linear_mix (even fields z, odd fields 1 - z),
// file:<path> (numbers separated by commas or whitespace, relative to the
// config file).

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "phtp/ocp_solver.hpp"
#include "phtp/reference.hpp"
#include "phtp/turnpike.hpp"

namespace phtp {

struct ExperimentConfig {
  std::string model = "diffusion";
  DiffusionConfig diffusion;
  TimoshenkoConfig timoshenko;

  std::string x0 = "sin_pi";
  std::string xT = "const:2";
  std::vector<double> horizons{5.0};
  std::vector<Index> intervals{251};

  std::string control_kind = "box";
  std::vector<double> u_max{10.0};
  double radius = 10.0;

  SolverOptions solver;

  std::optional<double> T0, T1;
  int steer_iterations = SteerOptions{}.max_iter;

  std::string out_dir = "out";
  bool full_state = false;

  std::string inject;

  std::filesystem::path base_dir = ".";
  std::map<std::string, int> key_lines;  // "section.key" -> line number

  void validate() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

inline std::string line_context(int line) { return "line " + std::to_string(line) + ": "; }

inline double parse_double(const std::string& v, const std::string& field, int line) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(field, line_context(line) + "expected a number, got '" + v + "'");
  }
}

inline long long parse_int(const std::string& v, const std::string& field, int line) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(field, line_context(line) + "expected an integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& v, const std::string& field, int line) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(field, line_context(line) + "expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_doubles(const std::string& v, const std::string& field, int line) {
  std::vector<double> out;
  for (const auto& tok : split(v, ',')) out.push_back(parse_double(tok, field, line));
  return out;
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  auto ctx = [&](const std::string& key) {
    const auto it = key_lines.find(key);
    return it == key_lines.end() ? std::string() : detail::line_context(it->second);
  };
  auto rethrow_with_line = [&](const std::string& section, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      const std::string key = section + "." + e.field();
      if (key_lines.count(key) == 0) throw;
      throw ConfigError(e.field(), ctx(key) + std::string(e.what()).substr(e.field().size() + 2));
    }
  };

  if (model == "diffusion") {
    rethrow_with_line("model", [&] { diffusion.validate(); });
  } else if (model == "timoshenko") {
    rethrow_with_line("model", [&] { timoshenko.validate(); });
  } else {
    throw ConfigError("type", ctx("model.type") + "unknown model '" + model + "'");
  }
  if (horizons.empty()) throw ConfigError("horizons", ctx("problem.horizons") + "at least one horizon is required");
  if (horizons.size() != intervals.size()) {
    throw ConfigError("intervals", ctx("problem.intervals") + "need one interval count per horizon");
  }
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (!(horizons[i] > 0.0)) throw ConfigError("horizons", ctx("problem.horizons") + "horizons must be > 0");
    if (i > 0 && !(horizons[i] > horizons[i - 1])) {
      throw ConfigError("horizons", ctx("problem.horizons") + "horizons must be strictly ascending");
    }
    if (intervals[i] < 1) throw ConfigError("intervals", ctx("problem.intervals") + "interval counts must be >= 1");
  }
  if (control_kind != "box" && control_kind != "ball") {
    throw ConfigError("kind", ctx("controls.kind") + "expected box or ball");
  }
  if (control_kind == "box") {
    for (double w : u_max) {
      if (!(w > 0.0)) throw ConfigError("u_max", ctx("controls.u_max") + "box half-widths must be > 0");
    }
  } else if (!(radius > 0.0)) {
    throw ConfigError("radius", ctx("controls.radius") + "ball radius must be > 0");
  }
  if (solver.terminal_tol && !(*solver.terminal_tol > 0.0)) {
    throw ConfigError("terminal_tol", ctx("solver.terminal_tol") + "must be > 0");
  }
  if (!(solver.kkt_tol > 0.0)) throw ConfigError("kkt_tol", ctx("solver.kkt_tol") + "must be > 0");
  if (solver.max_outer < 1) throw ConfigError("max_outer", ctx("solver.max_outer") + "must be >= 1");
  if (solver.max_inner < 1) throw ConfigError("max_inner", ctx("solver.max_inner") + "must be >= 1");
  if (!(solver.rho0 > 0.0)) throw ConfigError("rho0", ctx("solver.rho0") + "must be > 0");
  if (!(solver.rho_factor >= 1.0)) throw ConfigError("rho_factor", ctx("solver.rho_factor") + "must be >= 1");
  if (T0 && !(*T0 >= 0.0)) throw ConfigError("T0", ctx("turnpike.T0") + "must be >= 0");
  if (T1 && !(*T1 >= 0.0)) throw ConfigError("T1", ctx("turnpike.T1") + "must be >= 0");
  if (steer_iterations < 1) {
    throw ConfigError("steer_iterations", ctx("turnpike.steer_iterations") + "must be >= 1");
  }
  if (!inject.empty() && inject != "asymmetric_J" && inject != "zero_dissipation") {
    throw ConfigError("inject", ctx("debug.inject") + "expected asymmetric_J or zero_dissipation");
  }
}

inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
  using detail::parse_double;
  using detail::parse_int;
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  std::istringstream is(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    const auto hash = s.find_first_of("#;");
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("", detail::line_context(line) + "malformed section header");
      section = detail::trim(s.substr(1, s.size() - 2));
      static const char* known[] = {"model", "problem", "controls", "solver", "turnpike", "output", "debug"};
      if (std::find(std::begin(known), std::end(known), section) == std::end(known)) {
        throw ConfigError("", detail::line_context(line) + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("", detail::line_context(line) + "expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string val = detail::trim(s.substr(eq + 1));
    if (section.empty()) throw ConfigError(key, detail::line_context(line) + "key outside of a section");
    if (val.empty()) throw ConfigError(key, detail::line_context(line) + "empty value");
    cfg.key_lines[section + "." + key] = line;
    auto unknown = [&] {
      return ConfigError(key, detail::line_context(line) + "unknown key in [" + section + "]");
    };

    if (section == "model") {
      if (key == "type") cfg.model = val;
      else if (key == "n_cells") cfg.diffusion.n_cells = static_cast<int>(parse_int(val, key, line));
      else if (key == "d") cfg.diffusion.d = parse_double(val, key, line);
      else if (key == "actuators") {
        cfg.diffusion.actuators.clear();
        for (const auto& tok : detail::split(val, ',')) {
          const auto parts = detail::split(tok, ':');
          if (parts.size() != 2) throw ConfigError(key, detail::line_context(line) + "expected a:b intervals");
          cfg.diffusion.actuators.push_back({parse_double(parts[0], key, line), parse_double(parts[1], key, line)});
        }
      } else if (key == "n_nodes") cfg.timoshenko.n_nodes = static_cast<int>(parse_int(val, key, line));
      else if (key == "R1") cfg.timoshenko.R1 = parse_double(val, key, line);
      else if (key == "R2") cfg.timoshenko.R2 = parse_double(val, key, line);
      else if (key == "nu") cfg.timoshenko.nu = parse_double(val, key, line);
      else throw unknown();
    } else if (section == "problem") {
      if (key == "x0") cfg.x0 = val;
      else if (key == "xT") cfg.xT = val;
      else if (key == "horizons") cfg.horizons = detail::parse_doubles(val, key, line);
      else if (key == "intervals") {
        cfg.intervals.clear();
        for (const auto& tok : detail::split(val, ',')) cfg.intervals.push_back(parse_int(tok, key, line));
      } else throw unknown();
    } else if (section == "controls") {
      if (key == "kind") cfg.control_kind = val;
      else if (key == "u_max") cfg.u_max = detail::parse_doubles(val, key, line);
      else if (key == "radius") cfg.radius = parse_double(val, key, line);
      else throw unknown();
    } else if (section == "solver") {
      if (key == "inner") {
        if (val == "newton") cfg.solver.inner = InnerSolver::ProjectedNewton;
        else if (val == "fista") cfg.solver.inner = InnerSolver::Fista;
        else throw ConfigError(key, detail::line_context(line) + "expected newton or fista");
      } else if (key == "max_outer") cfg.solver.max_outer = static_cast<int>(parse_int(val, key, line));
      else if (key == "max_inner") cfg.solver.max_inner = static_cast<int>(parse_int(val, key, line));
      else if (key == "rho0") cfg.solver.rho0 = parse_double(val, key, line);
      else if (key == "rho_factor") cfg.solver.rho_factor = parse_double(val, key, line);
      else if (key == "terminal_tol") cfg.solver.terminal_tol = parse_double(val, key, line);
      else if (key == "kkt_tol") cfg.solver.kkt_tol = parse_double(val, key, line);
      else throw unknown();
    } else if (section == "turnpike") {
      if (key == "T0") cfg.T0 = parse_double(val, key, line);
      else if (key == "T1") cfg.T1 = parse_double(val, key, line);
      else if (key == "steer_iterations") cfg.steer_iterations = static_cast<int>(parse_int(val, key, line));
      else throw unknown();
    } else if (section == "output") {
      if (key == "dir") cfg.out_dir = val;
      else if (key == "full_state") cfg.full_state = detail::parse_bool(val, key, line);
      else throw unknown();
    } else if (section == "debug") {
      if (key == "inject") cfg.inject = val;
      else throw unknown();
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

inline PHSystem build_system(const ExperimentConfig& cfg) {
  PHSystem sys = cfg.model == "timoshenko" ? build_timoshenko(cfg.timoshenko) : build_diffusion(cfg.diffusion);
  if (cfg.inject == "asymmetric_J") {
    sys.ops.J(0, 1) += 1e-3;
  } else if (cfg.inject == "zero_dissipation") {
    sys.ops.R.setZero();
  }
  return sys;
}

inline ControlSet build_control_set(const ExperimentConfig& cfg, Index m) {
  if (cfg.control_kind == "ball") return ControlSet::ball(m, cfg.radius);
  if (cfg.u_max.size() == 1) return ControlSet::box(m, cfg.u_max.front());
  if (static_cast<Index>(cfg.u_max.size()) != m) {
    throw ConfigError("u_max", "expected 1 or " + std::to_string(m) + " half-widths");
  }
  return ControlSet::box(Eigen::Map<const Vector>(cfg.u_max.data(), m));
}

/// Evaluates a named state profile on the grid of `sys`.
inline Vector make_profile(const PHSystem& sys, const std::string& spec,
                           const std::filesystem::path& base_dir = ".") {
  const Index n = sys.n();
  const Vector& z = sys.grid.positions;
  if (spec == "sin_pi") return (std::numbers::pi * z.array()).sin().matrix();
  if (spec.rfind("const:", 0) == 0) {
    return Vector::Constant(n, detail::parse_double(spec.substr(6), "profile", 0));
  }
  if (spec == "linear_mix") {
    Vector x(n);
    for (Index i = 0; i < n; ++i) {
      x(i) = sys.grid.field[static_cast<std::size_t>(i)] % 2 == 0 ? z(i) : 1.0 - z(i);
    }
    return x;
  }
  if (spec.rfind("file:", 0) == 0) {
    const std::filesystem::path p = base_dir / spec.substr(5);
    std::ifstream in(p);
    if (!in) throw ConfigError("profile", "cannot read state file " + p.string());
    std::vector<double> vals;
    std::string tok;
    while (in >> tok) {
      for (const auto& part : detail::split(tok, ',')) {
        if (!part.empty()) vals.push_back(detail::parse_double(part, "profile", 0));
      }
    }
    if (static_cast<Index>(vals.size()) != n) {
      throw ConfigError("profile", p.string() + " has " + std::to_string(vals.size()) +
                                       " values, the state has " + std::to_string(n));
    }
    return Eigen::Map<const Vector>(vals.data(), n);
  }
  throw ConfigError("profile", "unknown profile '" + spec + "'");
}

/// "%.16e": 17 significant digits.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

inline std::string horizon_tag(double T) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", T);
  return buf;
}

struct HorizonOutcome {
  double T = 0.0;
  Index N = 0;
  std::optional<OCPResult> result;
  TurnpikeReport turnpike;
  std::vector<FieldEnergy> fields;
  std::string error;
};

namespace detail {

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline void write_trajectory_csv(const std::filesystem::path& path, const PHSystem& sys, const OCPResult& res,
                                 const Matrix& P, bool full_state) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  const InnerProduct ip = sys.inner_product();
  const Index m = sys.m(), n = sys.n(), N = res.u_star.grid.N;
  out << "t,H,dissipation_rate,dist2";
  for (Index c = 0; c < m; ++c) out << ",abs_u" << c;
  if (full_state) {
    for (Index i = 0; i < n; ++i) out << ",x" << i;
  }
  out << '\n';
  for (Index k = 0; k <= N; ++k) {
    const Vector x = res.x_star.state(k);
    const double d = dist_to_kernel(x, P, ip);
    out << format_double(res.u_star.grid.t(k)) << ',' << format_double(hamiltonian(sys, x)) << ','
        << format_double(dissipation_rate(sys, x)) << ',' << format_double(d * d);
    const Index kk = std::min(k, N - 1);
    for (Index c = 0; c < m; ++c) out << ',' << format_double(std::abs(res.u_star.values(kk, c)));
    if (full_state) {
      for (Index i = 0; i < n; ++i) out << ',' << format_double(x(i));
    }
    out << '\n';
  }
}

}  // namespace detail

/// Solves every horizon of the experiment, writes traj_T<T>.csv per horizon and
/// report.json. Returns 0 when all solves converged, 2 otherwise, 1 on
/// configuration errors.
inline int run(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_override,
               unsigned jobs, std::ostream& log = std::cerr) {
  PHSystem sys;
  Vector x0, xT;
  ControlSet uset;
  std::optional<TurnpikeBound> bound;
  std::optional<ThreePhaseControl> phases;
  std::optional<double> sigma_plus;
  const std::filesystem::path out_dir = out_override ? *out_override : cfg.base_dir / cfg.out_dir;
  try {
    sys = build_system(cfg);
    x0 = make_profile(sys, cfg.x0, cfg.base_dir);
    xT = make_profile(sys, cfg.xT, cfg.base_dir);
    uset = build_control_set(cfg, sys.m());
    sigma_plus = eig_sym(sys.ops.R).sigma_plus;

    const double T_min = cfg.horizons.front();
    const double T0 = cfg.T0.value_or(std::min(2.0, 0.5 * T_min));
    const double T1 = cfg.T1.value_or(std::min(2.0, 0.5 * T_min));
    if (sigma_plus) {
      SteerOptions so;
      so.max_iter = cfg.steer_iterations;
      phases = three_phase_control(sys, x0, xT, T_min, T0, T1, cfg.intervals.front(), uset, so);
      bound = turnpike_bound(sys, x0, phases->u0, phases->T0, phases->T1, uset);
    }
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return 1;
  } catch (const HorizonTooShort& e) {
    log << "config error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    log << "model error: " << e.what() << '\n';
    return 1;
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    log << "cannot create output directory " << out_dir << ": " << ec.message() << '\n';
    return 1;
  }

  const SpectralData spec = eig_sym(sys.ops.R);
  const Matrix P = kernel_projector(spec);
  const std::size_t H = cfg.horizons.size();
  std::vector<HorizonOutcome> outcomes(H);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < H; i = next++) {
      HorizonOutcome& o = outcomes[i];
      o.T = cfg.horizons[i];
      o.N = cfg.intervals[i];
      try {
        OCPProblem prob{sys, x0, xT, TimeGrid(o.T, o.N), uset, cfg.solver};
        o.result = solve_best_effort(prob);
        o.turnpike = turnpike_report(sys, o.result->x_star, o.result->u_star, bound);
        for (int f = 0; f < static_cast<int>(sys.grid.field_labels.size()); ++f) {
          o.fields.push_back(field_energy(sys, o.result->x_star, {f}));
        }
        detail::write_trajectory_csv(out_dir / ("traj_T" + horizon_tag(o.T) + ".csv"), sys, *o.result, P,
                                     cfg.full_state);
      } catch (const Error& e) {
        o.error = e.what();
      }
      std::lock_guard<std::mutex> lock(log_mutex);
      if (!o.error.empty()) {
        log << "T = " << o.T << ": error: " << o.error << '\n';
      } else {
        log << "T = " << o.T << ": " << (o.result->converged ? "converged" : "NOT converged")
            << ", terminal_error = " << o.result->terminal_error << ", cost = " << o.result->cost_equiv
            << ", metric = " << o.turnpike.integral_metric << '\n';
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(H)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  using nlohmann::json;
  json report;
  report["model"] = {{"type", cfg.model}, {"n", sys.n()}, {"m", sys.m()}, {"h", sys.grid.h}};
  report["sigma_plus"] = detail::optional_json(sigma_plus);
  if (bound) {
    report["bound"] = {{"G", bound->G},
                       {"correction", bound->correction},
                       {"F", bound->F},
                       {"T0", bound->T0},
                       {"T1", bound->T1},
                       {"B_norm", bound->B_norm},
                       {"u_max", bound->u_max},
                       {"steer_error_0", phases->steer_error0},
                       {"steer_error_1", phases->steer_error1}};
  } else {
    report["bound"] = nullptr;
  }
  bool all_converged = true;
  json hs = json::array();
  for (const auto& o : outcomes) {
    json h;
    h["T"] = o.T;
    h["N"] = o.N;
    h["csv"] = "traj_T" + horizon_tag(o.T) + ".csv";
    if (!o.error.empty() || !o.result) {
      all_converged = false;
      h["converged"] = false;
      h["error"] = o.error;
      hs.push_back(h);
      continue;
    }
    const OCPResult& r = *o.result;
    all_converged = all_converged && r.converged;
    h["converged"] = r.converged;
    h["cost_supplied"] = r.cost_supplied;
    h["cost_equiv"] = r.cost_equiv;
    h["hamiltonian_delta"] = r.energy.hamiltonian_delta;
    h["energy_residual"] = r.energy.residual;
    h["terminal_error"] = r.terminal_error;
    h["kkt_residual"] = r.kkt_residual;
    h["outer_iterations"] = r.iterations;
    h["inner_iterations"] = r.inner_iterations;
    h["max_abs_u"] = r.u_star.values.size() ? r.u_star.values.cwiseAbs().maxCoeff() : 0.0;
    h["integral_metric"] = o.turnpike.integral_metric;
    h["midpoint_dist"] = o.turnpike.midpoint_dist;
    h["mean_abs_u_coast"] = o.turnpike.mean_abs_u_coast;
    h["bound_satisfied"] = bound ? json(o.turnpike.bound_satisfied) : json(nullptr);
    json fields = json::array();
    for (std::size_t f = 0; f < o.fields.size(); ++f) {
      fields.push_back({{"label", sys.grid.field_labels[f]},
                        {"initial", o.fields[f].initial},
                        {"full_mean", o.fields[f].full_mean},
                        {"coast_mean", o.fields[f].coast_mean}});
    }
    h["fields"] = fields;
    hs.push_back(h);
  }
  report["horizons"] = hs;
  report["all_converged"] = all_converged;

  std::ofstream rep(out_dir / "report.json");
  rep << report.dump(2) << '\n';
  if (!rep) {
    log << "cannot write " << (out_dir / "report.json") << '\n';
    return 1;
  }
  return all_converged ? 0 : 2;
}

// ---------------------------------------------------------------------------
// verify

enum class CheckStatus { Pass, Fail, NoGap };

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  std::string detail;
};

namespace detail {

inline std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

inline CheckResult check(std::string name, bool ok, std::string what) {
  return {std::move(name), ok ? CheckStatus::Pass : CheckStatus::Fail, std::move(what)};
}

/// Energy reports under u = 1 on N, 2N, 4N, ... intervals.
inline std::vector<EnergyReport> refinement_chain(const PHSystem& sys, const Vector& x0, double T, Index N0,
                                                  int levels) {
  std::vector<EnergyReport> out;
  Index N = N0;
  for (int l = 0; l < levels; ++l, N *= 2) {
    const TimeGrid g(T, N);
    const ControlSignal u = ControlSignal::constant(g, Vector::Ones(sys.m()));
    out.push_back(energy_report(sys, simulate(sys, x0, u), u));
  }
  return out;
}

}  // namespace detail

/// Small instance with a known-good dense oracle: 5 cells, actuator on the two
/// leftmost cells (controllable), sin profile to const 1 in T = 1.
inline CheckResult oracle_equivalence_check() {
  DiffusionConfig dc;
  dc.n_cells = 5;
  dc.d = 0.1;
  dc.actuators = {{0.0, 0.4}};
  const PHSystem sys = build_diffusion(dc);
  const Vector x0 = make_profile(sys, "sin_pi");
  const Vector xT = Vector::Constant(sys.n(), 1.0);
  const TimeGrid grid(1.0, 20);
  const ReferenceSolution ref = dense_kkt_reference(sys, x0, xT, grid);

  OCPProblem prob{sys, x0, xT, grid, ControlSet::box(sys.m(), 10.0 * ref.u.cwiseAbs().maxCoeff() + 1.0), {}};
  prob.options.terminal_tol = 1e-10;
  prob.options.kkt_tol = 1e-9;
  const OCPResult res = solve_best_effort(prob);
  const double rel = std::abs(res.cost_equiv - ref.cost) / std::max(std::abs(ref.cost), 1e-300);
  return detail::check("oracle equivalence", res.converged && rel <= 1e-6,
                       "cost " + detail::sci(res.cost_equiv) + " vs dense KKT " + detail::sci(ref.cost) +
                           ", rel " + detail::sci(rel));
}

inline std::vector<CheckResult> verify_checks(const ExperimentConfig& cfg) {
  std::vector<CheckResult> out;
  const PHSystem sys = build_system(cfg);
  const InnerProduct ip = sys.inner_product();
  const Index n = sys.n(), m = sys.m();
  const Matrix& J = sys.ops.J;
  const Matrix& R = sys.ops.R;
  const double normR = R.size() ? spectral_norm(R) : 0.0;

  const double skew = skew_defect(J);
  out.push_back(detail::check("J skew", skew == 0.0, "max |J + J^T| = " + detail::sci(skew)));

  const double sym = symmetry_defect(R);
  out.push_back(detail::check("R symmetric", sym <= 1e-12 * normR, "max |R - R^T| = " + detail::sci(sym)));

  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (R + R.transpose()), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().size() ? es.eigenvalues().minCoeff() : 0.0;
  out.push_back(detail::check("R positive semidefinite", lmin >= -1e-12 * normR,
                              "lambda_min = " + detail::sci(lmin)));

  std::optional<SpectralData> spec;
  try {
    spec = eig_sym(R);
  } catch (const Error& e) {
    out.push_back(detail::check("spectral decomposition", false, e.what()));
  }

  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> gauss;
  auto random_vector = [&](Index k) {
    Vector v(k);
    for (Index i = 0; i < k; ++i) v(i) = gauss(rng);
    return v;
  };

  if (spec) {
    const Matrix P = kernel_projector(*spec);
    double worst = 0.0;
    for (int s = 0; s < 8; ++s) {
      const Vector x = random_vector(n);
      const double d = dist_to_kernel(x, P, ip);
      worst = std::max(worst, std::abs(d * d + ip.norm_sq(P * x) - ip.norm_sq(x)) / ip.norm_sq(x));
    }
    const double idem = (P * P - P).cwiseAbs().maxCoeff();
    const double annihilates = (R * P).cwiseAbs().maxCoeff();
    out.push_back(detail::check("kernel projector", idem <= 1e-12 && worst <= 1e-12 && annihilates <= 1e-8 * std::max(normR, 1.0),
                                "|P^2 - P| = " + detail::sci(idem) + ", Pythagoras defect " + detail::sci(worst) +
                                    ", |R P| = " + detail::sci(annihilates)));

    if (spec->sigma_plus) {
      const double sp = *spec->sigma_plus;
      double worst_gap = 0.0;
      for (int s = 0; s < 8; ++s) {
        const Vector x = random_vector(n);
        const double d = dist_to_kernel(x, P, ip);
        const double lhs = dissipation_rate(sys, x);
        worst_gap = std::min(worst_gap, (lhs - sp * d * d) / std::max(lhs, 1e-300));
      }
      out.push_back(detail::check("spectral inequality", worst_gap >= -1e-9,
                                  "sigma_+ = " + detail::sci(sp) + ", worst relative slack " + detail::sci(worst_gap)));
    } else {
      out.push_back({"spectral inequality", CheckStatus::NoGap, "R has no positive eigenvalue; bound checks skipped"});
    }
  }

  {
    double worst = 0.0;
    for (int s = 0; s < 8; ++s) {
      const Vector x = random_vector(n);
      const Vector u = random_vector(m);
      const double a = ip.dot(sys.B * u, x);
      const double b = u.dot(output_map(sys, x));
      worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), 1e-300));
    }
    out.push_back(detail::check("output adjoint", worst <= 1e-12, "max relative defect " + detail::sci(worst)));
  }

  const TimeGrid first(cfg.horizons.front(), cfg.intervals.front());
  const Rk4Integrator rk(sys);
  {
    const Matrix Phi = rk.advance(Matrix::Identity(n, n), Matrix::Zero(m, n), first.dt());
    const double nrm = spectral_norm(Phi);
    out.push_back(detail::check("contraction", nrm <= 1.0 + 1e-12, "|Phi(dt)| = " + detail::sci(nrm)));
  }

  {
    const Vector x0 = make_profile(sys, cfg.x0, cfg.base_dir);
    const double rho = rk.stability_radius();
    const Index N0 = std::max<Index>(first.N, static_cast<Index>(std::ceil(first.T * rho / 1.5)));
    const auto chain = detail::refinement_chain(sys, x0, first.T, N0, 7);
    // Order >= 3 is required on three consecutive doublings; the coarse end of
    // the chain may be pre-asymptotic (the residual can change sign there).
    std::string what = "N = " + std::to_string(N0) + " x 2^k: rel";
    int run = 0, best_run = 0;
    double finest = 0.0;
    for (std::size_t l = 0; l < chain.size(); ++l) {
      const double scale = std::max({std::abs(chain[l].supplied), std::abs(chain[l].hamiltonian_delta),
                                     chain[l].dissipated, 1e-300});
      finest = std::abs(chain[l].residual) / scale;
      what += " " + detail::sci(finest);
      if (l == 0) continue;
      const double prev = std::abs(chain[l - 1].residual);
      const bool at_roundoff = prev <= 1e-12 * scale;
      run = (at_roundoff || prev >= 8.0 * std::abs(chain[l].residual)) ? run + 1 : 0;
      best_run = std::max(best_run, run);
    }
    const bool ok = finest <= 1e-5 && best_run >= 3;
    out.push_back(detail::check("energy refinement", ok, what));
  }

  try {
    out.push_back(oracle_equivalence_check());
  } catch (const Error& e) {
    out.push_back(detail::check("oracle equivalence", false, e.what()));
  }
  return out;
}

/// Prints the check table; 0 when nothing failed, 2 otherwise, 1 on config errors.
inline int verify(const ExperimentConfig& cfg, std::ostream& os = std::cout) {
  std::vector<CheckResult> checks;
  try {
    checks = verify_checks(cfg);
  } catch (const ConfigError& e) {
    os << "config error: " << e.what() << '\n';
    return 1;
  }
  bool ok = true;
  for (const auto& c : checks) {
    const char* tag = c.status == CheckStatus::Pass ? "PASS" : c.status == CheckStatus::Fail ? "FAIL" : "NOGAP";
    if (c.status == CheckStatus::Fail) ok = false;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-26s %-6s ", c.name.c_str(), tag);
    os << buf << c.detail << '\n';
  }
  os << (ok ? "all checks passed" : "some checks FAILED") << '\n';
  return ok ? 0 : 2;
}

}  // namespace phtp
