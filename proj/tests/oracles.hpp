#pragma once

// Independent reference computations for the test suites. Nothing here uses
// the library's transcription or solver; the only library routine relied on
// is `simulate`, which the simulate tests validate separately.

#include <cmath>
#include <random>

#include "phtp/phtp.hpp"

namespace oracle {

using phtp::Index;
using phtp::Matrix;
using phtp::Vector;

/// k-th eigenvalue of d times the cell-centred Neumann Laplacian on n cells of [0, 1].
inline double neumann_eigenvalue(int k, int n, double d) {
  const double h = 1.0 / n;
  return 2.0 * d * (1.0 - std::cos(k * M_PI * h)) / (h * h);
}

/// Amplification factor of one classical RK4 step for x' = lambda x, z = lambda dt.
inline double rk4_factor(double z) { return 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0; }

/// Simpson weights on the interleaved node/midpoint samples, times the state weight h.
inline Vector simpson_sample_weights(Index N, double dt, double h) {
  Vector w(2 * N + 1);
  for (Index s = 0; s <= 2 * N; ++s) w(s) = (s % 2 == 1) ? 4.0 : 2.0;
  w(0) = w(2 * N) = 1.0;
  return w * (h * dt / 6.0);
}

/// Node 0, midpoint 0, node 1, midpoint 1, ..., node N, stacked.
inline Vector samples(const phtp::Trajectory& traj) {
  const Index N = traj.grid.N, n = traj.n();
  Vector s((2 * N + 1) * n);
  for (Index j = 0; j <= N; ++j) s.segment(2 * j * n, n) = traj.state(j);
  for (Index j = 0; j < N; ++j) s.segment((2 * j + 1) * n, n) = traj.midpoint(j);
  return s;
}

/// Central finite differences of u -> (state samples, x(T)) around u = 0.
struct FiniteDifferenceMaps {
  Matrix S;  // d samples / d u
  Matrix M;  // d x(T) / d u
  Vector s0;
  Vector xT0;
};

inline FiniteDifferenceMaps finite_difference_maps(const phtp::PHSystem& sys, const Vector& x0,
                                                   const phtp::TimeGrid& grid, double step = 1e-3) {
  const Index dim = grid.N * sys.m();
  FiniteDifferenceMaps out;
  const auto base = phtp::simulate(sys, x0, phtp::ControlSignal::zero(grid, sys.m()));
  out.s0 = samples(base);
  out.xT0 = base.final_state();
  out.S.resize(out.s0.size(), dim);
  out.M.resize(sys.n(), dim);
  for (Index j = 0; j < dim; ++j) {
    Vector e = Vector::Zero(dim);
    e(j) = step;
    const auto up = phtp::simulate(sys, x0, phtp::ControlSignal::from_stacked(grid, sys.m(), e));
    const auto dn = phtp::simulate(sys, x0, phtp::ControlSignal::from_stacked(grid, sys.m(), -e));
    out.S.col(j) = (samples(up) - samples(dn)) / (2.0 * step);
    out.M.col(j) = (up.final_state() - dn.final_state()) / (2.0 * step);
  }
  return out;
}

/// J(u) = u^T Q u + 2 q^T u + J0 from the finite-difference maps.
struct Quadratic {
  Matrix Q;
  Vector q;
  double J0 = 0.0;
  double operator()(const Vector& u) const { return u.dot(Q * u) + 2.0 * q.dot(u) + J0; }
};

inline Quadratic quadratic_from_maps(const phtp::PHSystem& sys, const FiniteDifferenceMaps& fd,
                                     const phtp::TimeGrid& grid) {
  const Index n = sys.n();
  const Vector w = simpson_sample_weights(grid.N, grid.dt(), sys.grid.h);
  Quadratic out;
  out.Q = Matrix::Zero(fd.S.cols(), fd.S.cols());
  out.q = Vector::Zero(fd.S.cols());
  for (Index s = 0; s < w.size(); ++s) {
    const Matrix Ss = fd.S.middleRows(s * n, n);
    const Vector cs = fd.s0.segment(s * n, n);
    out.Q += w(s) * Ss.transpose() * sys.ops.R * Ss;
    out.q += w(s) * Ss.transpose() * (sys.ops.R * cs);
    out.J0 += w(s) * cs.dot(sys.ops.R * cs);
  }
  return out;
}

/// min J(u) s.t. M u = b, solved through the dense KKT system [2Q M^T; M 0].
struct KktSolution {
  Vector u;
  Vector nu;
  double cost = 0.0;
};

inline KktSolution dense_kkt(const Quadratic& J, const Matrix& M, const Vector& b) {
  const Index dim = J.Q.rows(), c = M.rows();
  Matrix K = Matrix::Zero(dim + c, dim + c);
  K.topLeftCorner(dim, dim) = 2.0 * J.Q;
  K.topRightCorner(dim, c) = M.transpose();
  K.bottomLeftCorner(c, dim) = M;
  Vector rhs(dim + c);
  rhs << -2.0 * J.q, b;
  const Vector sol = K.fullPivLu().solve(rhs);
  KktSolution out;
  out.u = sol.head(dim);
  out.nu = sol.tail(c);
  out.cost = J(out.u);
  return out;
}

/// Orthonormal basis of ker M.
inline Matrix null_space(const Matrix& M) {
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > 1e-12 * sv(0)) ++rank;
  }
  return svd.matrixV().rightCols(M.cols() - rank);
}

/// The 5-cell diffusion instance used by the oracle-equivalence checks:
/// actuator on the two leftmost cells, sin(pi z) -> 1 in T = 1 on 20 intervals.
struct SmallInstance {
  phtp::PHSystem sys;
  Vector x0;
  Vector xT;
  phtp::TimeGrid grid{1.0, 20};
};

inline SmallInstance small_instance() {
  phtp::DiffusionConfig dc;
  dc.n_cells = 5;
  dc.d = 0.1;
  dc.actuators = {{0.0, 0.4}};
  SmallInstance s;
  s.sys = phtp::build_diffusion(dc);
  s.x0 = (M_PI * s.sys.grid.positions.array()).sin().matrix();
  s.xT = Vector::Ones(s.sys.n());
  return s;
}

inline Vector random_vector(std::mt19937_64& rng, Index n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

/// Random symmetric PSD matrix of the given rank.
inline Matrix random_psd(std::mt19937_64& rng, Index n, Index rank) {
  Matrix G(n, rank);
  for (Index j = 0; j < rank; ++j) G.col(j) = random_vector(rng, n);
  Matrix R = G * G.transpose();
  return 0.5 * (R + R.transpose());
}

}  // namespace oracle
