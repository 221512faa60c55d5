#pragma once

// Minimum energy supply OCP
//
//   min_u int_0^T <u, y> dt   s.t.  x' = (J - R) x + B u,  y = B^* x,
//                                   x(0) = x0, x(T) = xT,  u(t) in U.
//
// By the dissipation equality the cost equals H(xT) - H(x0) + J(u) with
// J(u) = int ||R^{1/2} x||^2 dt, a convex quadratic in u. The terminal
// equality is handled by an augmented Lagrangian; each subproblem is a
// box-constrained QP in the stacked controls.

#include <optional>
#include <vector>

#include "phtp/box_qp.hpp"
#include "phtp/control_set.hpp"
#include "phtp/transcription.hpp"

namespace phtp {

enum class InnerSolver { ProjectedNewton, Fista };

struct SolverOptions {
  int max_outer = 12;
  int max_inner = 5000;
  double rho0 = 1.0;
  double rho_factor = 10.0;
  std::optional<double> terminal_tol;  // default 1e-6 * (1 + ||xT||)
  double kkt_tol = 1e-6;
  InnerSolver inner = InnerSolver::ProjectedNewton;
};

struct OCPProblem {
  PHSystem sys;
  Vector x0;
  Vector xT;
  TimeGrid grid;
  ControlSet uset;
  SolverOptions options;

  double terminal_tol() const {
    return options.terminal_tol.value_or(1e-6 * (1.0 + sys.inner_product().norm(xT)));
  }

  void validate() const {
    if (x0.size() != sys.n()) throw DimensionMismatch("x0 does not match the state dimension");
    if (xT.size() != sys.n()) throw DimensionMismatch("xT does not match the state dimension");
    if (uset.m() != sys.m()) throw DimensionMismatch("control set does not match the input dimension");
    if (!(terminal_tol() > 0.0)) throw ConfigError("terminal_tol", "must be > 0");
    if (!(options.kkt_tol > 0.0)) throw ConfigError("kkt_tol", "must be > 0");
    if (options.max_outer < 1 || options.max_inner < 1) {
      throw ConfigError("max_outer", "iteration limits must be >= 1");
    }
    if (!(options.rho0 > 0.0) || !(options.rho_factor >= 1.0)) {
      throw ConfigError("rho0", "penalty must be > 0 and grow by a factor >= 1");
    }
  }
};

struct OuterIterate {
  double rho = 0.0;
  double terminal_error = 0.0;
  double kkt_residual = 0.0;
  int inner_iterations = 0;
};

struct OCPResult {
  ControlSignal u_star;
  Trajectory x_star;
  EnergyReport energy;
  double cost_supplied = 0.0;  // int <u, y> dt
  double cost_equiv = 0.0;     // int ||R^{1/2} x||^2 dt
  double terminal_error = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;  // outer
  int inner_iterations = 0;
  bool converged = false;
  Vector multiplier;
  std::vector<OuterIterate> history;
};

class NotConverged : public Error {
 public:
  explicit NotConverged(OCPResult result)
      : Error("OCP solver did not converge: terminal_error = " +
              std::to_string(result.terminal_error) +
              ", kkt_residual = " + std::to_string(result.kkt_residual)),
        result_(std::move(result)) {}

  const OCPResult& result() const noexcept { return result_; }
  double terminal_error() const noexcept { return result_.terminal_error; }
  double kkt_residual() const noexcept { return result_.kkt_residual; }

 private:
  OCPResult result_;
};

inline Transcription transcribe(const OCPProblem& prob) {
  prob.validate();
  return Transcription(prob.sys, prob.x0, prob.grid);
}

namespace detail {

/// phi(u) = J(u) + h <lambda, r(u)> + (rho h / 2) |r(u)|^2 with r(u) = M u + shift.
class AugmentedLagrangianQP {
 public:
  AugmentedLagrangianQP(const QuadraticCost& cost, const Matrix& M, Vector shift, double h)
      : cost_(cost), M_(M), shift_(std::move(shift)), h_(h), lambda_(Vector::Zero(M.rows())) {}

  void set(const Vector& lambda, double rho) {
    lambda_ = lambda;
    rho_ = rho;
  }
  double rho() const { return rho_; }
  double h() const { return h_; }
  const Matrix& M() const { return M_; }
  const QuadraticCost& cost() const { return cost_; }

  Vector residual(const Vector& u) const { return M_ * u + shift_; }

  Vector gradient(const Vector& u) const {
    return cost_.gradient(u) + h_ * (M_.transpose() * (lambda_ + rho_ * residual(u)));
  }

  Vector hessian_apply(const Vector& v) const {
    return 2.0 * (cost_.Q * v) + (rho_ * h_) * (M_.transpose() * (M_ * v));
  }

  /// phi(u + s) - phi(u), exact for the quadratic.
  double change(const Vector& g, const Vector& s) const { return g.dot(s) + 0.5 * s.dot(hessian_apply(s)); }

 private:
  const QuadraticCost& cost_;
  const Matrix& M_;
  Vector shift_;
  double h_;
  Vector lambda_;
  double rho_ = 0.0;
};

struct InnerResult {
  int iterations = 0;
  double residual = 0.0;
};

/// Projected Newton for the box-constrained AL subproblem.
///
/// Newton systems on the free set F are (2 Q_FF + rho h M_F^T M_F) d = -g_F.
/// They are solved through a Cholesky factor of 2 Q_FF (cached per free set)
/// and the n x n capacitance I / (rho h) + M_F (2 Q_FF)^{-1} M_F^T, which stays
/// well defined as rho grows.
class ProjectedNewton {
 public:
  ProjectedNewton(double ridge) : ridge_(ridge) {}

  InnerResult minimize(const AugmentedLagrangianQP& qp, Vector& u, const ControlSet& box,
                       double lipschitz, int max_iter, double tol) {
    InnerResult out;
    const Index dim = u.size();
    const Index mm = box.m();
    auto proj = [&](const Vector& v) { return box.project_stacked(v); };
    std::vector<char> free_mask(static_cast<std::size_t>(dim));

    for (int it = 0; it < max_iter; ++it) {
      const Vector g = qp.gradient(u);
      out.residual = projected_gradient_residual(u, g, lipschitz, proj);
      if (out.residual <= tol) break;
      out.iterations = it + 1;

      for (Index i = 0; i < dim; ++i) {
        const double ub = box.u_max(i % mm);
        const bool at_lo = u(i) <= -ub && g(i) > 0.0;
        const bool at_hi = u(i) >= ub && g(i) < 0.0;
        free_mask[static_cast<std::size_t>(i)] = !(at_lo || at_hi);
      }
      const Vector d = newton_direction(qp, g, free_mask);

      Vector step;
      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
        step = proj(u + alpha * d) - u;
        const double slope = g.dot(step);
        if (slope < 0.0 && qp.change(g, step) <= 1e-4 * slope) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        step = proj(u - g / lipschitz) - u;
        if (qp.change(g, step) >= 0.0) break;  // no further progress in floating point
      }
      u = proj(u + step);
      if (step.norm() <= 1e-15 * (1.0 + u.norm())) break;
    }
    return out;
  }

 private:
  Vector newton_direction(const AugmentedLagrangianQP& qp, const Vector& g,
                          const std::vector<char>& free_mask) {
    const Index dim = g.size();
    if (!cached_ || free_mask != cached_mask_) factorize(qp, free_mask);
    Vector d = Vector::Zero(dim);
    if (free_.empty()) return d;

    const Vector b = -g(free_);
    const Vector y = llt_.solve(b);
    Vector dF = y;
    const double rh = qp.rho() * qp.h();
    if (rh > 0.0) {
      Matrix C = Mf_ * Z_;
      C.diagonal().array() += 1.0 / rh;
      dF -= Z_ * C.ldlt().solve(Mf_ * y);
    }
    d(free_) = dF;
    return d;
  }

  void factorize(const AugmentedLagrangianQP& qp, const std::vector<char>& free_mask) {
    free_.clear();
    for (Index i = 0; i < static_cast<Index>(free_mask.size()); ++i) {
      if (free_mask[static_cast<std::size_t>(i)]) free_.push_back(i);
    }
    cached_mask_ = free_mask;
    cached_ = true;
    if (free_.empty()) return;
    Matrix K = 2.0 * qp.cost().Q(free_, free_);
    double ridge = ridge_;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Matrix Kr = K;
      Kr.diagonal().array() += ridge;
      llt_.compute(Kr);
      if (llt_.info() == Eigen::Success) break;
      ridge = ridge > 0.0 ? ridge * 100.0 : 1e-14;
    }
    Mf_ = qp.M()(Eigen::all, free_);
    Z_ = llt_.solve(Matrix(Mf_.transpose()));
  }

  double ridge_;
  bool cached_ = false;
  std::vector<char> cached_mask_;
  std::vector<Index> free_;
  Eigen::LLT<Matrix> llt_;
  Matrix Mf_;
  Matrix Z_;
};

}  // namespace detail

/// Runs the augmented Lagrangian iteration and returns the last iterate,
/// converged or not.
inline OCPResult solve_best_effort(const OCPProblem& prob) {
  const Transcription tr = transcribe(prob);
  const PHSystem& sys = prob.sys;
  const SolverOptions& opt = prob.options;
  const double h = sys.grid.h;
  const InnerProduct ip = sys.inner_product();

  const QuadraticCost cost = tr.quadratic_cost();
  const Matrix M = tr.terminal_map();
  detail::AugmentedLagrangianQP qp(cost, M, tr.free_terminal_state() - prob.xT, h);

  const double lip_cost =
      1.01 * power_iteration([&](const Vector& v) { return Vector(2.0 * (cost.Q * v)); }, cost.Q.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> mm(M * M.transpose(), Eigen::EigenvaluesOnly);
  const double sigma_m_sq = mm.eigenvalues().size() ? mm.eigenvalues().maxCoeff() : 0.0;

  const bool use_newton =
      opt.inner == InnerSolver::ProjectedNewton && prob.uset.kind == ControlSet::Kind::Box;
  detail::ProjectedNewton newton(lip_cost > 0.0 ? 1e-13 * lip_cost : 1e-8);
  auto proj = [&](const Vector& v) { return prob.uset.project_stacked(v); };

  OCPResult res;
  Vector u = Vector::Zero(tr.num_controls());
  Vector lambda = Vector::Zero(sys.n());
  double rho = opt.rho0;
  const double tol = prob.terminal_tol();

  for (int outer = 1; outer <= opt.max_outer; ++outer) {
    qp.set(lambda, rho);
    const double lip = std::max(lip_cost + 1.01 * rho * h * sigma_m_sq, 1e-300);
    int inner_its = 0;
    if (use_newton) {
      inner_its = newton.minimize(qp, u, prob.uset, lip, opt.max_inner, opt.kkt_tol).iterations;
    } else {
      FistaOptions fo;
      fo.max_iter = opt.max_inner;
      fo.tol = opt.kkt_tol;
      auto fr = fista(u, [&](const Vector& v) { return qp.gradient(v); }, proj, lip, fo);
      u = std::move(fr.x);
      inner_its = fr.iterations;
    }
    const Vector r = qp.residual(u);
    const double te = ip.norm(r);
    const double kkt = projected_gradient_residual(u, qp.gradient(u), lip, proj);
    lambda += rho * r;

    res.history.push_back({rho, te, kkt, inner_its});
    res.iterations = outer;
    res.inner_iterations += inner_its;
    res.kkt_residual = kkt;
    if (te <= tol && kkt <= opt.kkt_tol) {
      res.converged = true;
      break;
    }
    rho *= opt.rho_factor;
  }

  res.u_star = ControlSignal::from_stacked(prob.grid, sys.m(), proj(u));
  res.x_star = simulate(sys, prob.x0, res.u_star);
  res.energy = energy_report(sys, res.x_star, res.u_star);
  res.cost_supplied = res.energy.supplied;
  res.cost_equiv = res.energy.dissipated;
  res.terminal_error = ip.norm(res.x_star.final_state() - prob.xT);
  res.multiplier = lambda;
  return res;
}

/// Throws NotConverged (carrying the last iterate) when the terminal or
/// stationarity tolerance is not met within max_outer iterations.
inline OCPResult solve(const OCPProblem& prob) {
  OCPResult res = solve_best_effort(prob);
  if (!res.converged) throw NotConverged(std::move(res));
  return res;
}

}  // namespace phtp
