#pragma once

// Subspace turnpike diagnostics toward ker R.
//
// The comparison control of the bound is three-phase: steer x0 to 0 on
// [0, T0], coast with u = 0, steer 0 to xT on [T - T1, T]. Its dissipated
// energy is at most
//
//   G(x0) = H(x0) + |B| T0 u_max (|x0| + |B| T0 u_max) + |B|^2 T1^2 u_max^2,
//
// and ||R^{1/2} x||^2 >= sigma_+ dist^2(x, ker R) turns this into the
// horizon-independent bound F(x0) = G(x0) / sigma_+ on int dist^2(x*, ker R).
// When phase one only reaches e0 = x(T0) != 0, the coast and phase-three
// energy balance adds |B| u_max T1 |e0|.

#include <cmath>
#include <string>
#include <vector>

#include "phtp/box_qp.hpp"
#include "phtp/control_set.hpp"
#include "phtp/transcription.hpp"

namespace phtp {

struct SteerOptions {
  int max_iter = 20000;
  double tol = 1e-12;  // projected-gradient residual
};

struct SteerResult {
  ControlSignal u;
  double error = 0.0;       // |x(T_steer) - x_to| along the simulated trajectory
  double free_error = 0.0;  // same with u = 0
  int iterations = 0;
};

/// Best-effort minimizer of 1/2 |x(T_steer) - x_to|^2 over controls in U.
inline SteerResult steer(const PHSystem& sys, const Vector& x_from, const Vector& x_to, double T_steer,
                         Index N, const ControlSet& uset, const SteerOptions& opts = {}) {
  if (x_from.size() != sys.n() || x_to.size() != sys.n()) {
    throw DimensionMismatch("steer: states do not match the system");
  }
  if (uset.m() != sys.m()) throw DimensionMismatch("steer: control set does not match the system");
  const TimeGrid grid(T_steer, N);
  const Transcription tr(sys, x_from, grid);
  const InnerProduct ip = sys.inner_product();
  const double h = ip.weight;

  const Matrix M = tr.terminal_map();
  const Vector b = x_to - tr.free_terminal_state();
  const double smax = M.size() ? spectral_norm(M) : 0.0;
  const double lip = h * smax * smax;

  SteerResult out;
  out.free_error = ip.norm(b);
  Vector u = Vector::Zero(tr.num_controls());
  if (lip > 0.0 && out.free_error > 0.0) {
    FistaOptions fo;
    fo.max_iter = opts.max_iter;
    fo.tol = opts.tol;
    const Matrix hMt = h * M.transpose();
    auto fr = fista(
        u, [&](const Vector& v) { return Vector(hMt * (M * v - b)); },
        [&](const Vector& v) { return uset.project_stacked(v); }, lip, fo);
    u = std::move(fr.x);
    out.iterations = fr.iterations;
  }
  out.u = ControlSignal::from_stacked(grid, sys.m(), u);
  out.error = ip.norm(simulate(sys, x_from, out.u).final_state() - x_to);
  return out;
}

struct ThreePhaseControl {
  ControlSignal u0;       // [0, T0], steers x0 toward 0
  ControlSignal u1;       // [T - T1, T], steers 0 toward xT
  ControlSignal control;  // concatenation on the full grid, zero on the coast
  double T0 = 0.0;        // effective phase lengths (whole intervals)
  double T1 = 0.0;
  double coast = 0.0;
  double steer_error0 = 0.0;  // |x(T0)|
  double steer_error1 = 0.0;  // |x(T1; 0, u1) - xT|
};

inline ThreePhaseControl three_phase_control(const PHSystem& sys, const Vector& x0, const Vector& xT,
                                             double T, double T0, double T1, Index N,
                                             const ControlSet& uset, const SteerOptions& opts = {}) {
  if (!(T0 >= 0.0) || !(T1 >= 0.0)) throw ConfigError("T0", "phase lengths must be >= 0");
  const TimeGrid grid(T, N);
  if (T0 + T1 > T) {
    throw HorizonTooShort("horizon T = " + std::to_string(T) + " is shorter than T0 + T1 = " +
                          std::to_string(T0 + T1));
  }
  const double dt = grid.dt();
  const Index N0 = static_cast<Index>(std::llround(T0 / dt));
  const Index N1 = static_cast<Index>(std::llround(T1 / dt));
  if (N0 + N1 > N) throw HorizonTooShort("phases T0 and T1 do not fit into the time grid");

  ThreePhaseControl out;
  out.T0 = static_cast<double>(N0) * dt;
  out.T1 = static_cast<double>(N1) * dt;
  out.coast = T - out.T0 - out.T1;
  out.control = ControlSignal::zero(grid, sys.m());
  const Vector zero = Vector::Zero(sys.n());
  const InnerProduct ip = sys.inner_product();

  if (N0 > 0) {
    SteerResult s = steer(sys, x0, zero, out.T0, N0, uset, opts);
    out.u0 = std::move(s.u);
    out.steer_error0 = s.error;
    out.control.values.topRows(N0) = out.u0.values;
  } else {
    out.steer_error0 = ip.norm(x0);
  }
  if (N1 > 0) {
    SteerResult s = steer(sys, zero, xT, out.T1, N1, uset, opts);
    out.u1 = std::move(s.u);
    out.steer_error1 = s.error;
    out.control.values.bottomRows(N1) = out.u1.values;
  } else {
    out.steer_error1 = ip.norm(xT);
  }
  return out;
}

/// G(x0) for exact steering.
inline double intermediate_bound(double H_x0, double B_norm, double T0, double T1, double u_max,
                                 double x0_norm) {
  const double a = B_norm * T0 * u_max;
  const double b = B_norm * T1 * u_max;
  return H_x0 + a * (x0_norm + a) + b * b;
}

struct TurnpikeBound {
  double sigma_plus = 0.0;
  double B_norm = 0.0;
  double u_max = 0.0;
  double T0 = 0.0;
  double T1 = 0.0;
  double G = 0.0;
  double steer_error = 0.0;  // |x(T0)| reached by u0
  double correction = 0.0;   // |B| u_max T1 steer_error
  double F = 0.0;            // (G + correction) / sigma_plus
};

/// Throws NoGap when R has no positive eigenvalue.
inline TurnpikeBound turnpike_bound(const PHSystem& sys, const Vector& x0, const ControlSignal& u0,
                                    double T0, double T1, const ControlSet& uset) {
  if (x0.size() != sys.n()) throw DimensionMismatch("turnpike_bound: x0 has the wrong size");
  const InnerProduct ip = sys.inner_product();
  TurnpikeBound b;
  b.sigma_plus = eig_sym(sys.ops.R).require_sigma_plus();
  b.B_norm = input_operator_norm(sys.B, ip);
  b.u_max = uset.max_norm();
  b.T0 = T0;
  b.T1 = T1;
  b.G = intermediate_bound(hamiltonian(sys, x0), b.B_norm, T0, T1, b.u_max, ip.norm(x0));
  b.steer_error = u0.grid.N > 0 && u0.values.rows() > 0 ? ip.norm(simulate(sys, x0, u0).final_state())
                                                        : ip.norm(x0);
  b.correction = b.B_norm * b.u_max * T1 * b.steer_error;
  b.F = (b.G + b.correction) / b.sigma_plus;
  return b;
}

/// Simpson quadrature of dist^2(x(t), ker R) over the trajectory.
inline double turnpike_metric(const Trajectory& traj, const Matrix& P, const InnerProduct& ip) {
  if (P.rows() != traj.n() || P.cols() != traj.n()) {
    throw DimensionMismatch("turnpike_metric: projector does not match the state dimension");
  }
  return simpson_integral(traj, [&](Index, const Vector& x) {
    const double d = dist_to_kernel(x, P, ip);
    return d * d;
  });
}

/// dist^2(x(T/2), ker R).
inline double midpoint_dist(const Trajectory& traj, const Matrix& P, const InnerProduct& ip) {
  const double d = dist_to_kernel(traj.half_time_state(), P, ip);
  return d * d;
}

/// Intervals lying entirely inside [T/3, 2T/3].
inline std::vector<Index> coast_intervals(const TimeGrid& g) {
  std::vector<Index> out;
  const double lo = g.T / 3.0, hi = 2.0 * g.T / 3.0;
  const double eps = 1e-12 * g.T;
  for (Index k = 0; k < g.N; ++k) {
    if (g.t(k) >= lo - eps && g.t(k + 1) <= hi + eps) out.push_back(k);
  }
  return out;
}

/// Time average of |u(t)| over the intervals inside [T/3, 2T/3].
inline double coast_mean_abs_control(const ControlSignal& u) {
  const std::vector<Index> ks = coast_intervals(u.grid);
  if (ks.empty()) return 0.0;
  double acc = 0.0;
  for (Index k : ks) acc += u.values.row(k).norm();
  return acc / static_cast<double>(ks.size());
}

struct FieldEnergy {
  double initial = 0.0;     // at t = 0
  double full_mean = 0.0;   // over [0, T]
  double coast_mean = 0.0;  // over the intervals inside [T/3, 2T/3]
};

/// Time means of the squared weighted norm of the selected fields.
inline FieldEnergy field_energy(const PHSystem& sys, const Trajectory& traj, const std::vector<int>& fields) {
  if (traj.n() != sys.n()) throw DimensionMismatch("field_energy: trajectory does not match the system");
  Vector mask = Vector::Zero(sys.n());
  for (Index i = 0; i < sys.n(); ++i) {
    for (int f : fields) {
      if (sys.grid.field.at(static_cast<std::size_t>(i)) == f) mask(i) = 1.0;
    }
  }
  const double h = sys.grid.h;
  auto energy = [&](const Vector& x) { return h * x.cwiseProduct(mask).squaredNorm(); };

  FieldEnergy out;
  const TimeGrid& g = traj.grid;
  const double dt = g.dt();
  out.initial = energy(traj.state(0));
  out.full_mean = simpson_integral(traj, [&](Index, const Vector& x) { return energy(x); }) / g.T;
  const std::vector<Index> ks = coast_intervals(g);
  double acc = 0.0;
  for (Index k : ks) {
    acc += dt / 6.0 * (energy(traj.state(k)) + 4.0 * energy(traj.midpoint(k)) + energy(traj.state(k + 1)));
  }
  out.coast_mean = ks.empty() ? 0.0 : acc / (dt * static_cast<double>(ks.size()));
  return out;
}

struct TurnpikeReport {
  std::optional<double> sigma_plus;
  std::optional<double> G_x0;
  std::optional<double> correction;
  std::optional<double> F_x0;
  double integral_metric = 0.0;
  double midpoint_dist = 0.0;
  double mean_abs_u_coast = 0.0;
  bool bound_satisfied = false;
};

/// Diagnostics of one optimal trajectory; `bound` is absent when R has no gap.
inline TurnpikeReport turnpike_report(const PHSystem& sys, const Trajectory& traj, const ControlSignal& u,
                                      const std::optional<TurnpikeBound>& bound) {
  const SpectralData spec = eig_sym(sys.ops.R);
  const Matrix P = kernel_projector(spec);
  const InnerProduct ip = sys.inner_product();
  TurnpikeReport r;
  r.sigma_plus = spec.sigma_plus;
  r.integral_metric = turnpike_metric(traj, P, ip);
  r.midpoint_dist = midpoint_dist(traj, P, ip);
  r.mean_abs_u_coast = coast_mean_abs_control(u);
  if (bound) {
    r.G_x0 = bound->G;
    r.correction = bound->correction;
    r.F_x0 = bound->F;
    r.bound_satisfied = r.integral_metric <= bound->F;
  }
  return r;
}

}  // namespace phtp
