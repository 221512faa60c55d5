#pragma once

// Time integration of x' = (J - R) x + B u for piecewise-constant controls and
// evaluation of the energy functionals of the dissipation equality
//
//   int_0^T <u, y> dt = H(x(T)) - H(x(0)) + int_0^T ||R^{1/2} x||^2 dt.

#include <cmath>
#include <string>

#include "phtp/ph_models.hpp"

namespace phtp {

struct TimeGrid {
  double T = 1.0;
  Index N = 1;

  TimeGrid() = default;
  TimeGrid(double horizon, Index intervals) : T(horizon), N(intervals) {
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("T", "horizon must be > 0");
    if (N < 1) throw ConfigError("N", "need at least one interval");
  }

  double dt() const { return T / static_cast<double>(N); }
  double t(Index k) const { return static_cast<double>(k) * T / static_cast<double>(N); }
  double t_mid(Index k) const { return (static_cast<double>(k) + 0.5) * T / static_cast<double>(N); }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// u_k is held constant on [t_k, t_{k+1}). `values` is N x m.
struct ControlSignal {
  TimeGrid grid;
  Matrix values;

  Index m() const { return values.cols(); }
  Vector at(Index k) const { return values.row(k).transpose(); }

  static ControlSignal zero(const TimeGrid& g, Index m) { return {g, Matrix::Zero(g.N, m)}; }
  static ControlSignal constant(const TimeGrid& g, const Vector& u) {
    return {g, u.transpose().replicate(g.N, 1)};
  }

  /// Interval-major stacking: entry k * m + c is channel c on interval k.
  Vector stacked() const {
    Vector s(values.size());
    for (Index k = 0; k < values.rows(); ++k) s.segment(k * m(), m()) = values.row(k).transpose();
    return s;
  }
  static ControlSignal from_stacked(const TimeGrid& g, Index m, const Vector& s) {
    if (s.size() != g.N * m) throw DimensionMismatch("stacked control has the wrong length");
    ControlSignal u{g, Matrix(g.N, m)};
    for (Index k = 0; k < g.N; ++k) u.values.row(k) = s.segment(k * m, m).transpose();
    return u;
  }
};

/// States on the grid nodes plus one state per interval midpoint.
struct Trajectory {
  TimeGrid grid;
  Matrix nodes;      // (N + 1) x n
  Matrix midpoints;  // N x n

  Index n() const { return nodes.cols(); }
  Vector state(Index k) const { return nodes.row(k).transpose(); }
  Vector midpoint(Index k) const { return midpoints.row(k).transpose(); }
  Vector final_state() const { return state(grid.N); }

  /// State at t = T/2: a node when N is even, an interval midpoint otherwise.
  Vector half_time_state() const {
    return grid.N % 2 == 0 ? state(grid.N / 2) : midpoint(grid.N / 2);
  }
};

struct EnergyReport {
  double supplied = 0.0;           // int <u, y> dt
  double hamiltonian_delta = 0.0;  // H(x(T)) - H(x(0))
  double dissipated = 0.0;         // int ||R^{1/2} x||^2 dt
  double residual = 0.0;           // supplied - hamiltonian_delta - dissipated
};

/// H(x) = 1/2 ||x||^2.
inline double hamiltonian(const PHSystem& sys, const Vector& x) {
  return 0.5 * sys.inner_product().norm_sq(x);
}

/// ||R^{1/2} x||^2 = <R x, x>.
inline double dissipation_rate(const PHSystem& sys, const Vector& x) {
  return sys.grid.h * x.dot(sys.ops.R * x);
}

/// Classical RK4 for the affine flow with the input held constant over a step.
///
/// For J = 0 the spectrum of A is real and the stability bound is
/// dt * lambda_max(R) <= 2.78. Otherwise dt * ||J - R||_2 <= 2.6, the radius of
/// the largest left half-disc inside the RK4 stability region.
class Rk4Integrator {
 public:
  static constexpr double kRealAxisLimit = 2.78;
  static constexpr double kHalfDiscLimit = 2.6;
  static constexpr double kSubstepTarget = 2.5;

  explicit Rk4Integrator(const PHSystem& sys) : A_(sys.ops.generator()), B_(sys.B) {
    if (sys.ops.J.isZero(0.0)) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sys.ops.R + sys.ops.R.transpose()),
                                               Eigen::EigenvaluesOnly);
      radius_ = es.eigenvalues().size() ? es.eigenvalues().cwiseAbs().maxCoeff() : 0.0;
      limit_ = kRealAxisLimit;
    } else {
      radius_ = spectral_norm(A_);
      limit_ = kHalfDiscLimit;
    }
  }

  double stability_radius() const { return radius_; }
  double max_stable_dt() const {
    return radius_ > 0.0 ? limit_ / radius_ : std::numeric_limits<double>::infinity();
  }
  Index substeps_for(double dt) const {
    if (radius_ == 0.0) return 1;
    return std::max<Index>(1, static_cast<Index>(std::ceil(dt * radius_ / kSubstepTarget)));
  }

  /// One RK4 step on every column of X with inputs U (m x cols). No stability check.
  Matrix raw_step(const Matrix& X, const Matrix& U, double dt) const {
    const Matrix bu = B_ * U;
    const Matrix k1 = A_ * X + bu;
    const Matrix k2 = A_ * (X + 0.5 * dt * k1) + bu;
    const Matrix k3 = A_ * (X + 0.5 * dt * k2) + bu;
    const Matrix k4 = A_ * (X + dt * k3) + bu;
    return X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  Matrix step(const Matrix& X, const Matrix& U, double dt) const {
    if (dt > max_stable_dt()) {
      throw UnstableStep("RK4 step dt = " + std::to_string(dt) +
                             " exceeds the stability bound; max admissible dt = " +
                             std::to_string(max_stable_dt()),
                         max_stable_dt());
    }
    return raw_step(X, U, dt);
  }

  /// Advance over dt with as many equal substeps as stability requires.
  Matrix advance(const Matrix& X, const Matrix& U, double dt) const {
    const Index s = substeps_for(dt);
    const double h = dt / static_cast<double>(s);
    Matrix Y = X;
    for (Index i = 0; i < s; ++i) Y = raw_step(Y, U, h);
    return Y;
  }

 private:
  Matrix A_;
  Matrix B_;
  double radius_ = 0.0;
  double limit_ = kRealAxisLimit;
};

inline Vector step_rk4(const PHSystem& sys, const Vector& x, const Vector& u, double dt) {
  if (x.size() != sys.n() || u.size() != sys.m()) {
    throw DimensionMismatch("step_rk4: state/control sizes do not match the system");
  }
  return Rk4Integrator(sys).step(x, u, dt);
}

struct SimulateOptions {
  bool substepping = true;
};

inline Trajectory simulate(const PHSystem& sys, const Vector& x0, const ControlSignal& u,
                           const SimulateOptions& opts = {}) {
  if (x0.size() != sys.n()) throw DimensionMismatch("simulate: x0 has the wrong size");
  if (u.m() != sys.m() || u.values.rows() != u.grid.N) {
    throw DimensionMismatch("simulate: control signal does not match the system");
  }
  const Rk4Integrator rk(sys);
  const TimeGrid& g = u.grid;
  const double dt = g.dt();

  Trajectory traj{g, Matrix(g.N + 1, sys.n()), Matrix(g.N, sys.n())};
  traj.nodes.row(0) = x0.transpose();
  Vector x = x0;
  for (Index k = 0; k < g.N; ++k) {
    const Vector uk = u.at(k);
    if (opts.substepping) {
      traj.midpoints.row(k) = rk.advance(x, uk, 0.5 * dt).transpose();
      x = rk.advance(x, uk, dt);
    } else {
      traj.midpoints.row(k) = rk.step(x, uk, 0.5 * dt).transpose();
      x = rk.step(x, uk, dt);
    }
    traj.nodes.row(k + 1) = x.transpose();
  }
  return traj;
}

/// Composite Simpson over [t_k, t_{k+1}] using node and midpoint samples.
template <class Fn>
double simpson_integral(const Trajectory& traj, Fn&& per_interval_integrand) {
  const double dt = traj.grid.dt();
  double acc = 0.0;
  for (Index k = 0; k < traj.grid.N; ++k) {
    const double a = per_interval_integrand(k, traj.state(k));
    const double b = per_interval_integrand(k, traj.midpoint(k));
    const double c = per_interval_integrand(k, traj.state(k + 1));
    acc += dt / 6.0 * (a + 4.0 * b + c);
  }
  return acc;
}

inline EnergyReport energy_report(const PHSystem& sys, const Trajectory& traj,
                                  const ControlSignal& u) {
  if (!(traj.grid == u.grid)) throw GridMismatch("energy_report: trajectory and control grids differ");
  if (traj.n() != sys.n() || u.m() != sys.m()) {
    throw DimensionMismatch("energy_report: trajectory/control do not match the system");
  }
  EnergyReport e;
  e.supplied = simpson_integral(traj, [&](Index k, const Vector& x) {
    return u.values.row(k).dot(output_map(sys, x));
  });
  e.dissipated = simpson_integral(traj, [&](Index, const Vector& x) { return dissipation_rate(sys, x); });
  e.hamiltonian_delta = hamiltonian(sys, traj.final_state()) - hamiltonian(sys, traj.state(0));
  e.residual = e.supplied - e.hamiltonian_delta - e.dissipated;
  return e;
}

}  // namespace phtp
