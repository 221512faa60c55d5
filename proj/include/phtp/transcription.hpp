#pragma once

// Direct transcription of the energy-supply OCP in the control variables.
//
// For piecewise-constant controls the discrete flow is linear time-invariant,
// so a single impulse simulation per channel gives the response of every
// interval by a shift. States are sampled at nodes and interval midpoints
// ("interleaved samples": sample 2j is node j, sample 2j+1 the midpoint of
// interval j) and the cost
//
//   J(u) = int_0^T ||R^{1/2} x||^2 dt ~= sum_s w_s ||R^{1/2} x_s||^2
//
// uses composite Simpson weights w_s (times the state quadrature weight h).

#include <vector>

#include "phtp/simulate.hpp"

namespace phtp {

/// x_{k+1} = Phi x_k + Gamma u_k and x_{k+1/2} = PhiHalf x_k + GammaHalf u_k.
struct IntervalMaps {
  Matrix Phi, Gamma, PhiHalf, GammaHalf;
};

inline IntervalMaps interval_maps(const PHSystem& sys, double dt) {
  const Rk4Integrator rk(sys);
  const Index n = sys.n(), m = sys.m();
  Matrix X = Matrix::Zero(n, n + m);
  Matrix U = Matrix::Zero(m, n + m);
  X.leftCols(n).setIdentity();
  U.rightCols(m).setIdentity();
  const Matrix full = rk.advance(X, U, dt);
  const Matrix half = rk.advance(X, U, 0.5 * dt);
  return {full.leftCols(n), full.rightCols(m), half.leftCols(n), half.rightCols(m)};
}

/// J(u) = u^T Q u + 2 q^T u + J0.
struct QuadraticCost {
  Matrix Q;
  Vector q;
  double J0 = 0.0;

  double value(const Vector& u) const { return u.dot(Q * u) + 2.0 * q.dot(u) + J0; }
  Vector gradient(const Vector& u) const { return 2.0 * (Q * u + q); }
};

class Transcription {
 public:
  Transcription(const PHSystem& sys, const Vector& x0, const TimeGrid& grid)
      : R_(sys.ops.R), grid_(grid), n_(sys.n()), m_(sys.m()), h_(sys.grid.h) {
    if (x0.size() != n_) throw DimensionMismatch("transcription: x0 has the wrong size");
    const IntervalMaps maps = interval_maps(sys, grid.dt());
    const Index N = grid.N;

    impulse_.resize(static_cast<std::size_t>(2 * N));
    impulse_[0] = maps.GammaHalf;
    impulse_[1] = maps.Gamma;
    for (Index p = 1; p < N; ++p) {
      const Matrix& prev_node = impulse_[static_cast<std::size_t>(2 * p - 1)];
      impulse_[static_cast<std::size_t>(2 * p)] = maps.PhiHalf * prev_node;
      impulse_[static_cast<std::size_t>(2 * p + 1)] = maps.Phi * prev_node;
    }

    free_.resize(2 * N + 1, n_);
    Vector x = x0;
    free_.row(0) = x.transpose();
    for (Index j = 0; j < N; ++j) {
      free_.row(2 * j + 1) = (maps.PhiHalf * x).transpose();
      x = maps.Phi * x;
      free_.row(2 * j + 2) = x.transpose();
    }

    const double dt = grid.dt();
    weights_.resize(2 * N + 1);
    for (Index s = 0; s <= 2 * N; ++s) weights_(s) = h_ * dt / 6.0 * (s % 2 == 1 ? 4.0 : 2.0);
    weights_(0) = weights_(2 * N) = h_ * dt / 6.0;
  }

  const TimeGrid& grid() const { return grid_; }
  Index n() const { return n_; }
  Index m() const { return m_; }
  Index num_controls() const { return grid_.N * m_; }
  Index num_samples() const { return 2 * grid_.N + 1; }

  /// Response (n x m) at sample 2k + 1 + tau to unit inputs on interval k.
  const Matrix& impulse(Index tau) const { return impulse_[static_cast<std::size_t>(tau)]; }
  /// Uncontrolled states at all samples, one row per sample.
  const Matrix& free_samples() const { return free_; }
  /// Simpson weights times h; J = sum_s w_s |R^{1/2} x_s|^2.
  const Vector& sample_weights() const { return weights_; }

  Vector free_terminal_state() const { return free_.row(2 * grid_.N).transpose(); }

  /// x(T) = M u + free_terminal_state().
  Matrix terminal_map() const {
    const Index N = grid_.N;
    Matrix M(n_, N * m_);
    for (Index k = 0; k < N; ++k) M.middleCols(k * m_, m_) = impulse(2 * (N - k) - 1);
    return M;
  }

  /// Dense L with stacked R^{1/2} x_s = L u + c. Size (2N+1) n x N m; small problems only.
  Matrix dense_cost_map(const Matrix& sqrtR) const {
    const Index N = grid_.N;
    Matrix L = Matrix::Zero(num_samples() * n_, N * m_);
    for (Index k = 0; k < N; ++k) {
      for (Index s = 2 * k + 1; s <= 2 * N; ++s) {
        L.block(s * n_, k * m_, n_, m_) = sqrtR * impulse(s - 2 * k - 1);
      }
    }
    return L;
  }

  Vector cost_offset(const Matrix& sqrtR) const {
    Vector c(num_samples() * n_);
    for (Index s = 0; s < num_samples(); ++s) c.segment(s * n_, n_) = sqrtR * free_.row(s).transpose();
    return c;
  }

  /// Assemble Q, q, J0 from the impulse responses.
  ///
  /// With uniform interior weights, Q_{k,l} (k <= l, d = l - k) only depends on
  /// d and on how many samples remain after interval l, so each diagonal of Q is
  /// a running sum. The final node carries half the interior node weight, which
  /// is removed afterwards as a rank-n correction M^T R M.
  QuadraticCost quadratic_cost() const {
    const Index N = grid_.N;
    const Index mm = m_;
    const double dt = grid_.dt();
    const double w_mid = h_ * 4.0 * dt / 6.0;
    const double w_node = h_ * 2.0 * dt / 6.0;

    Matrix stacked(n_, 2 * N * mm);
    for (Index t = 0; t < 2 * N; ++t) stacked.middleCols(t * mm, mm) = impulse(t);
    const Matrix Rstacked = R_ * stacked;

    QuadraticCost out;
    out.Q = Matrix::Zero(N * mm, N * mm);
    Matrix acc(mm, mm);
    for (Index d = 0; d < N; ++d) {
      acc.setZero();
      for (Index K = 1; K <= N - d; ++K) {
        const Index t0 = 2 * (K - 1);
        acc.noalias() += w_mid * stacked.middleCols((t0 + 2 * d) * mm, mm).transpose() *
                         Rstacked.middleCols(t0 * mm, mm);
        acc.noalias() += w_node * stacked.middleCols((t0 + 1 + 2 * d) * mm, mm).transpose() *
                         Rstacked.middleCols((t0 + 1) * mm, mm);
        const Index l = N - K;
        const Index k = l - d;
        out.Q.block(k * mm, l * mm, mm, mm) = acc;
        if (d > 0) out.Q.block(l * mm, k * mm, mm, mm) = acc.transpose();
      }
    }
    const Matrix M = terminal_map();
    out.Q.noalias() -= (h_ * dt / 6.0) * (M.transpose() * (R_ * M));
    out.Q = 0.5 * (out.Q + out.Q.transpose()).eval();

    const Matrix Rfree = free_ * R_;  // R symmetric: row s is (R x_s)^T
    out.q = Vector::Zero(N * mm);
    for (Index k = 0; k < N; ++k) {
      for (Index s = 2 * k + 1; s <= 2 * N; ++s) {
        out.q.segment(k * mm, mm).noalias() +=
            weights_(s) * impulse(s - 2 * k - 1).transpose() * Rfree.row(s).transpose();
      }
    }
    out.J0 = 0.0;
    for (Index s = 0; s <= 2 * N; ++s) out.J0 += weights_(s) * free_.row(s).dot(Rfree.row(s));
    return out;
  }

 private:
  Matrix R_;
  TimeGrid grid_;
  Index n_, m_;
  double h_;
  std::vector<Matrix> impulse_;
  Matrix free_;
  Vector weights_;
};

}  // namespace phtp
