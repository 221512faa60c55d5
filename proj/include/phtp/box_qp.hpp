#pragma once

// First-order machinery shared by the OCP solver and the steering problems:
// power iteration for Lipschitz constants and an accelerated projected
// gradient (FISTA) with gradient-based restart.

#include <cmath>
#include <utility>

#include "phtp/operator_core.hpp"

namespace phtp {

/// Largest eigenvalue of a symmetric PSD operator given by its action.
template <class Apply>
double power_iteration(Apply&& apply, Index dim, int max_iter = 500, double rel_tol = 1e-10) {
  if (dim == 0) return 0.0;
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = 1.0 + 0.25 * std::sin(1.0 + static_cast<double>(i));
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = apply(v);
    const double next = v.dot(w);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    if (std::abs(next - lambda) <= rel_tol * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

/// ||x - P(x - g / L)|| * L: zero exactly at a constrained stationary point.
template <class Proj>
double projected_gradient_residual(const Vector& x, const Vector& g, double lipschitz, Proj&& proj) {
  return (x - proj(x - g / lipschitz)).norm() * lipschitz;
}

struct FistaOptions {
  int max_iter = 5000;
  double tol = 1e-6;     // on the projected-gradient residual
  int check_every = 10;
};

struct FistaResult {
  Vector x;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Accelerated projected gradient with step 1/L and O'Donoghue-Candes restart.
/// Every iterate is the output of `proj`, so it is feasible.
template <class Grad, class Proj>
FistaResult fista(Vector x0, Grad&& grad, Proj&& proj, double lipschitz, const FistaOptions& opt = {}) {
  FistaResult res;
  if (!(lipschitz > 0.0)) {
    res.x = proj(x0);
    res.converged = true;
    return res;
  }
  Vector x = proj(x0);
  Vector y = x;
  double t = 1.0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    const Vector x_next = proj(y - grad(y) / lipschitz);
    if ((y - x_next).dot(x_next - x) > 0.0) {
      t = 1.0;
      y = x_next;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = x_next + ((t - 1.0) / t_next) * (x_next - x);
      t = t_next;
    }
    x = x_next;
    res.iterations = it;
    if (it % opt.check_every == 0 || it == opt.max_iter) {
      res.residual = projected_gradient_residual(x, grad(x), lipschitz, proj);
      if (res.residual <= opt.tol) {
        res.converged = true;
        break;
      }
    }
  }
  res.x = std::move(x);
  return res;
}

}  // namespace phtp
