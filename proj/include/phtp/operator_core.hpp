#pragma once

// Symmetric / skew-symmetric operator utilities: spectral decomposition of the
// dissipation R, its square root, the orthogonal projector onto ker R and the
// distance to that kernel in the discrete state inner product.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "phtp/errors.hpp"

namespace phtp {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative threshold below which an eigenvalue of R counts as zero.
inline constexpr double kRelativeKernelTol = 1e-9;

/// Uniform quadrature inner product <x, y> = w * sum_i x_i y_i.
///
/// With a uniform weight the Euclidean transpose is the adjoint, so J^T = -J
/// is exactly skew-adjointness in this inner product.
struct InnerProduct {
  double weight = 1.0;

  double dot(const Vector& a, const Vector& b) const {
    if (a.size() != b.size()) {
      throw DimensionMismatch("inner product of vectors with sizes " + std::to_string(a.size()) +
                              " and " + std::to_string(b.size()));
    }
    return weight * a.dot(b);
  }
  double norm_sq(const Vector& a) const { return weight * a.squaredNorm(); }
  double norm(const Vector& a) const { return std::sqrt(norm_sq(a)); }
};

/// The pair (J, R) of the generator A = J - R.
struct StructuredOperatorPair {
  Matrix J;
  Matrix R;

  Index n() const { return R.rows(); }
  Matrix generator() const { return J - R; }
};

/// max_ij |J + J^T|_ij. Zero for every operator assembled by the model builders.
inline double skew_defect(const Matrix& J) {
  if (J.size() == 0) return 0.0;
  return (J + J.transpose()).cwiseAbs().maxCoeff();
}

/// max_ij |R - R^T|_ij.
inline double symmetry_defect(const Matrix& R) {
  if (R.size() == 0) return 0.0;
  return (R - R.transpose()).cwiseAbs().maxCoeff();
}

inline double spectral_norm(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(A);
  return svd.singularValues()(0);
}

/// Operator norm of B : (R^m, Euclidean) -> (R^n, weighted).
inline double input_operator_norm(const Matrix& B, const InnerProduct& ip) {
  return std::sqrt(ip.weight) * spectral_norm(B);
}

struct SpectralData {
  Vector eigenvalues;   // ascending, clamped to >= 0
  Matrix eigenvectors;  // orthonormal columns
  double kernel_tol = 0.0;
  std::optional<double> sigma_plus;

  Index n() const { return eigenvalues.size(); }
  double max_eigenvalue() const { return n() == 0 ? 0.0 : eigenvalues(n() - 1); }

  Index kernel_dim() const {
    Index k = 0;
    while (k < n() && eigenvalues(k) <= kernel_tol) ++k;
    return k;
  }

  double require_sigma_plus() const {
    if (!sigma_plus) {
      throw NoGap("no eigenvalue of R exceeds kernel_tol = " + std::to_string(kernel_tol));
    }
    return *sigma_plus;
  }
};

/// Eigendecomposition of a symmetric PSD matrix.
///
/// kernel_tol defaults to 1e-9 * lambda_max(R). Eigenvalues in [-kernel_tol, 0)
/// are clamped to zero; anything more negative is a modelling error (NotPSD).
inline SpectralData eig_sym(const Matrix& R, std::optional<double> kernel_tol = std::nullopt) {
  if (R.rows() != R.cols()) {
    throw DimensionMismatch("eig_sym expects a square matrix");
  }
  const Matrix sym = 0.5 * (R + R.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) {
    throw Error("symmetric eigensolver did not converge");
  }
  Vector lambda = es.eigenvalues();
  const double norm = lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0;

  const double asym = symmetry_defect(R);
  if (asym > 1e-12 * norm) {
    throw NotSymmetric("R is not symmetric: max |R - R^T| = " + std::to_string(asym));
  }

  SpectralData out;
  out.kernel_tol = kernel_tol.value_or(
      std::max(kRelativeKernelTol * norm, std::numeric_limits<double>::min()));
  for (Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -out.kernel_tol) {
      throw NotPSD("R has eigenvalue " + std::to_string(lambda(i)) + " below -kernel_tol");
    }
    lambda(i) = std::max(lambda(i), 0.0);
  }
  out.eigenvalues = std::move(lambda);
  out.eigenvectors = es.eigenvectors();
  for (Index i = 0; i < out.n(); ++i) {
    if (out.eigenvalues(i) > out.kernel_tol) {
      out.sigma_plus = out.eigenvalues(i);
      break;
    }
  }
  return out;
}

/// R^{1/2} = V diag(sqrt(lambda)) V^T.
inline Matrix sqrt_psd(const SpectralData& spec) {
  const Matrix& V = spec.eigenvectors;
  return V * spec.eigenvalues.cwiseSqrt().asDiagonal() * V.transpose();
}

/// Orthogonal projector onto span{v_i : lambda_i <= kernel_tol}; zero when the kernel is empty.
inline Matrix kernel_projector(const SpectralData& spec) {
  const Index k = spec.kernel_dim();
  if (k == 0) return Matrix::Zero(spec.n(), spec.n());
  const auto Vk = spec.eigenvectors.leftCols(k);
  Matrix P = Vk * Vk.transpose();
  return 0.5 * (P + P.transpose());
}

/// ||x - P x|| in the state inner product.
inline double dist_to_kernel(const Vector& x, const Matrix& P, const InnerProduct& ip) {
  if (P.rows() != x.size() || P.cols() != x.size()) {
    throw DimensionMismatch("dist_to_kernel: projector is " + std::to_string(P.rows()) + "x" +
                            std::to_string(P.cols()) + ", state has size " +
                            std::to_string(x.size()));
  }
  return ip.norm(x - P * x);
}

}  // namespace phtp
