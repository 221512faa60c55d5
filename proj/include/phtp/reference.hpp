#pragma once

// Brute-force reference for small instances: the transcription is rebuilt from
// one full simulation per control entry and the equality-constrained quadratic
// program is solved through its dense KKT system. Cost O((Nm)^3); meant for
// cross-checking the solver, not for production runs.

#include "phtp/simulate.hpp"

namespace phtp {

struct ReferenceSolution {
  Vector u;           // stacked, interval-major
  double cost = 0.0;  // J(u) of the quadratic model
  Matrix Q;
  Vector q;
  double J0 = 0.0;
  Matrix M;
  Vector x_free_T;
};

namespace detail {

/// Interleaved node/midpoint samples of a trajectory, one sample per row block.
inline Vector interleaved_samples(const Trajectory& traj) {
  const Index N = traj.grid.N, n = traj.n();
  Vector s((2 * N + 1) * n);
  for (Index j = 0; j <= N; ++j) s.segment(2 * j * n, n) = traj.state(j);
  for (Index j = 0; j < N; ++j) s.segment((2 * j + 1) * n, n) = traj.midpoint(j);
  return s;
}

}  // namespace detail

/// Unconstrained-control minimizer of int ||R^{1/2} x||^2 subject to x(T) = xT.
inline ReferenceSolution dense_kkt_reference(const PHSystem& sys, const Vector& x0, const Vector& xT,
                                             const TimeGrid& grid) {
  const Index n = sys.n(), m = sys.m(), N = grid.N, dim = N * m;
  const Index S = 2 * N + 1;
  const double h = sys.grid.h, dt = grid.dt();

  const Vector zero = Vector::Zero(n);
  const Trajectory free = simulate(sys, x0, ControlSignal::zero(grid, m));
  const Vector c = detail::interleaved_samples(free);

  Matrix L(S * n, dim);
  for (Index j = 0; j < dim; ++j) {
    Vector e = Vector::Zero(dim);
    e(j) = 1.0;
    L.col(j) = detail::interleaved_samples(simulate(sys, zero, ControlSignal::from_stacked(grid, m, e)));
  }

  Vector w(S);
  for (Index s = 0; s < S; ++s) w(s) = h * dt / 6.0 * ((s % 2 == 1) ? 4.0 : (s == 0 || s == S - 1 ? 1.0 : 2.0));

  ReferenceSolution out;
  out.Q = Matrix::Zero(dim, dim);
  out.q = Vector::Zero(dim);
  out.J0 = 0.0;
  for (Index s = 0; s < S; ++s) {
    const auto Ls = L.middleRows(s * n, n);
    const Matrix RLs = sys.ops.R * Ls;
    const Vector cs = c.segment(s * n, n);
    out.Q.noalias() += w(s) * Ls.transpose() * RLs;
    out.q.noalias() += w(s) * RLs.transpose() * cs;
    out.J0 += w(s) * cs.dot(sys.ops.R * cs);
  }
  out.M = L.bottomRows(n);
  out.x_free_T = free.final_state();

  Matrix K = Matrix::Zero(dim + n, dim + n);
  K.topLeftCorner(dim, dim) = 2.0 * out.Q;
  K.topRightCorner(dim, n) = out.M.transpose();
  K.bottomLeftCorner(n, dim) = out.M;
  Vector rhs(dim + n);
  rhs.head(dim) = -2.0 * out.q;
  rhs.tail(n) = xT - out.x_free_T;
  const Vector sol = K.fullPivLu().solve(rhs);
  out.u = sol.head(dim);
  out.cost = out.u.dot(out.Q * out.u) + 2.0 * out.q.dot(out.u) + out.J0;
  return out;
}

}  // namespace phtp
