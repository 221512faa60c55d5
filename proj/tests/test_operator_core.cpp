#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace phtp;

namespace {

PHSystem paper_diffusion() { return build_diffusion(DiffusionConfig{}); }

}  // namespace

TEST(EigSym, ZeroOperatorHasNoGap) {
  const SpectralData s = eig_sym(Matrix::Zero(3, 3), 1e-10);
  EXPECT_EQ(s.kernel_dim(), 3);
  EXPECT_TRUE((s.eigenvalues.array() == 0.0).all());
  EXPECT_FALSE(s.sigma_plus.has_value());
  EXPECT_THROW(s.require_sigma_plus(), NoGap);
}

TEST(EigSym, BlockDiagonalDamping) {
  const Matrix R = Vector((Vector(4) << 0, 1, 0, 1).finished()).asDiagonal();
  const SpectralData s = eig_sym(R);
  EXPECT_EQ(s.kernel_dim(), 2);
  EXPECT_DOUBLE_EQ(s.require_sigma_plus(), 1.0);
  const Matrix P = kernel_projector(s);
  const Matrix expected = Vector((Vector(4) << 1, 0, 1, 0).finished()).asDiagonal();
  EXPECT_LE((P - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EigSym, NeumannSpectrumMatchesClosedForm) {
  const PHSystem sys = paper_diffusion();
  const SpectralData s = eig_sym(sys.ops.R);
  ASSERT_EQ(s.n(), 21);
  EXPECT_EQ(s.kernel_dim(), 1);
  for (int k = 1; k < 21; ++k) {
    const double exact = oracle::neumann_eigenvalue(k, 21, 0.1);
    EXPECT_NEAR(s.eigenvalues(k), exact, 1e-10 * exact) << "k = " << k;
  }
  const double h = 1.0 / 21.0;
  const double sigma = 2.0 * 0.1 * (1.0 - std::cos(M_PI * h)) / (h * h);
  EXPECT_NEAR(s.require_sigma_plus(), sigma, 1e-10 * sigma);
}

TEST(EigSym, RejectsAsymmetricAndIndefinite) {
  Matrix A(2, 2);
  A << 1, 0.5, 0, 1;
  EXPECT_THROW(eig_sym(A), NotSymmetric);
  Matrix B(2, 2);
  B << -1, 0, 0, 1;
  EXPECT_THROW(eig_sym(B), NotPSD);
  EXPECT_THROW(eig_sym(Matrix::Zero(2, 3)), DimensionMismatch);
}

TEST(EigSym, ClampsRoundoffNegatives) {
  Matrix R(2, 2);
  R << 1.0, 0.0, 0.0, -1e-12;
  const SpectralData s = eig_sym(R);
  EXPECT_EQ(s.eigenvalues(0), 0.0);
  EXPECT_EQ(s.kernel_dim(), 1);
}

TEST(SqrtPsd, Examples) {
  const Matrix D = Vector((Vector(2) << 0, 4).finished()).asDiagonal();
  const Matrix S = sqrt_psd(eig_sym(D));
  EXPECT_NEAR(S(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(S(1, 1), 2.0, 1e-15);
  EXPECT_NEAR(std::abs(S(0, 1)), 0.0, 1e-15);
  EXPECT_EQ(sqrt_psd(eig_sym(Matrix::Zero(3, 3))).cwiseAbs().maxCoeff(), 0.0);

  const Matrix R = paper_diffusion().ops.R;
  const Matrix Rh = sqrt_psd(eig_sym(R));
  EXPECT_LE(spectral_norm(Rh * Rh - R), 1e-8 * spectral_norm(R));
}

TEST(KernelProjector, DiffusionProjectsOntoConstants) {
  const PHSystem sys = paper_diffusion();
  const Matrix P = kernel_projector(eig_sym(sys.ops.R));
  const Matrix expected = Matrix::Constant(21, 21, 1.0 / 21.0);
  EXPECT_LE((P - expected).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((P * Vector::Ones(21) - Vector::Ones(21)).cwiseAbs().maxCoeff(), 1e-13);
  const Vector x = (M_PI * sys.grid.positions.array()).sin().matrix();
  EXPECT_LE((P * x - Vector::Constant(21, x.mean())).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(KernelProjector, EmptyKernelGivesZero) {
  const Matrix P = kernel_projector(eig_sym(Matrix::Identity(3, 3)));
  EXPECT_EQ(P.cwiseAbs().maxCoeff(), 0.0);
}

TEST(DistToKernel, DiffusionExamples) {
  const PHSystem sys = paper_diffusion();
  const InnerProduct ip = sys.inner_product();
  const Matrix P = kernel_projector(eig_sym(sys.ops.R));
  EXPECT_NEAR(dist_to_kernel(Vector::Constant(21, 3.0), P, ip), 0.0, 1e-13);

  Vector z = Vector::LinSpaced(21, -1.0, 1.0);  // mean zero
  EXPECT_NEAR(dist_to_kernel(z, P, ip), ip.norm(z), 1e-13);

  const Vector x = (M_PI * sys.grid.positions.array()).sin().matrix();
  const double oracle = ip.norm((x.array() - x.mean()).matrix());
  EXPECT_NEAR(dist_to_kernel(x, P, ip), oracle, 1e-13);

  EXPECT_THROW(dist_to_kernel(Vector::Zero(3), P, ip), DimensionMismatch);
}

TEST(InnerProduct, WeightedAndChecked) {
  const InnerProduct ip{0.5};
  const Vector a = Vector::Ones(4);
  EXPECT_DOUBLE_EQ(ip.dot(a, a), 2.0);
  EXPECT_DOUBLE_EQ(ip.norm(a), std::sqrt(2.0));
  EXPECT_THROW(ip.dot(a, Vector::Ones(3)), DimensionMismatch);
}

TEST(InputOperatorNorm, WeightedSingularValue) {
  const PHSystem sys = paper_diffusion();
  // B is an indicator of 5 cells: ||B u||_h = sqrt(5 h) |u|.
  EXPECT_NEAR(input_operator_norm(sys.B, sys.inner_product()), std::sqrt(5.0 / 21.0), 1e-14);
}

// Property suites over the two model operators and random rank-deficient PSD matrices.
class SpectralProperties : public ::testing::TestWithParam<int> {
 protected:
  Matrix R() const {
    std::mt19937_64 rng(1000 + GetParam());
    switch (GetParam()) {
      case 0: return paper_diffusion().ops.R;
      case 1: return build_timoshenko(TimoshenkoConfig{}).ops.R;
      default: return oracle::random_psd(rng, 12, 4 + GetParam());
    }
  }
};

TEST_P(SpectralProperties, ReconstructionAndProjectorAlgebra) {
  const Matrix R = this->R();
  const SpectralData s = eig_sym(R);
  const double nR = spectral_norm(R);
  EXPECT_TRUE((s.eigenvalues.array() >= 0.0).all());
  const Matrix rec = s.eigenvectors * s.eigenvalues.asDiagonal() * s.eigenvectors.transpose();
  EXPECT_LE(spectral_norm(rec - R), 1e-8 * nR);

  const Matrix P = kernel_projector(s);
  EXPECT_LE((P * P - P).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_EQ((P - P.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE(spectral_norm(R * P), 10.0 * s.kernel_tol);
  EXPECT_LE(spectral_norm(sqrt_psd(s) * P), 10.0 * std::sqrt(s.kernel_tol));
}

TEST_P(SpectralProperties, PythagorasAndSpectralBound) {
  const Matrix R = this->R();
  const SpectralData s = eig_sym(R);
  const Matrix P = kernel_projector(s);
  const Matrix Rh = sqrt_psd(s);
  const InnerProduct ip{0.1};
  const double sigma = s.require_sigma_plus();
  std::mt19937_64 rng(77 + GetParam());
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector z = oracle::random_vector(rng, R.rows());
    const double d = dist_to_kernel(z, P, ip);
    EXPECT_NEAR(d * d + ip.norm_sq(P * z), ip.norm_sq(z), 1e-10 * ip.norm_sq(z));
    EXPECT_GE(ip.norm_sq(Rh * z), sigma * d * d - 1e-9 * std::max(1.0, ip.norm_sq(Rh * z)));
  }
}

INSTANTIATE_TEST_SUITE_P(Operators, SpectralProperties, ::testing::Values(0, 1, 2, 3, 4));
