#pragma once

// Finite-dimensional port-Hamiltonian models x' = (J - R) x + B u.
//
//  * 1-D diffusion on [0, 1] with zero-flux (Neumann) ends, cell-centred grid.
//  * Timoshenko beam on [0, 1], clamped left end, damped momenta.

#include <string>
#include <vector>

#include "phtp/operator_core.hpp"

namespace phtp {

struct SpatialGrid {
  Index points = 0;  // grid points per field
  double h = 0.0;    // mesh width, also the quadrature weight
  std::string domain;
  Vector positions;         // spatial coordinate of each state entry
  std::vector<int> field;   // field index of each state entry
  std::vector<std::string> field_labels;
};

struct PHSystem {
  StructuredOperatorPair ops;
  Matrix B;  // n x m
  SpatialGrid grid;

  Index n() const { return ops.n(); }
  Index m() const { return B.cols(); }
  InnerProduct inner_product() const { return InnerProduct{grid.h}; }
  const std::string& label(Index i) const { return grid.field_labels.at(grid.field.at(i)); }

  Index input_rank() const {
    if (B.size() == 0) return 0;
    Eigen::ColPivHouseholderQR<Matrix> qr(B);
    return qr.rank();
  }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct DiffusionConfig {
  int n_cells = 21;
  double d = 0.1;
  std::vector<Interval> actuators{{0.4, 0.6}};

  void validate() const {
    if (n_cells < 2) throw ConfigError("n_cells", "must be >= 2");
    if (!(d > 0.0)) throw ConfigError("d", "diffusivity must be > 0");
    if (actuators.empty()) throw ConfigError("actuators", "at least one actuator is required");
    for (const auto& a : actuators) {
      if (!(0.0 <= a.lo && a.lo < a.hi && a.hi <= 1.0)) {
        throw ConfigError("actuators", "each interval must satisfy 0 <= a < b <= 1");
      }
    }
  }
};

struct TimoshenkoConfig {
  int n_nodes = 50;
  double R1 = 1.0;
  double R2 = 1.0;
  double nu = 0.5;  // torque patches [0, nu] and [1 - nu, 1]

  void validate() const {
    if (n_nodes < 2) throw ConfigError("n_nodes", "must be >= 2");
    if (!(R1 > 0.0)) throw ConfigError("R1", "damping must be > 0");
    if (!(R2 > 0.0)) throw ConfigError("R2", "damping must be > 0");
    if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("nu", "must lie in (0, 1]");
  }
};

namespace detail {

inline bool in_interval(double z, double lo, double hi) {
  constexpr double eps = 1e-12;
  return z >= lo - eps && z <= hi + eps;
}

}  // namespace detail

/// Diffusion x' = d x_zz, J = 0, R = -d Lap_h.
///
/// Unknowns sit at cell centres (i + 1/2) h, h = 1 / n_cells. The Neumann
/// condition is "no flux through the end faces", so every row of R sums to
/// exactly zero and the constants span ker R.
inline PHSystem build_diffusion(const DiffusionConfig& cfg) {
  cfg.validate();
  const Index n = cfg.n_cells;
  const double h = 1.0 / static_cast<double>(n);
  const double c = cfg.d / (h * h);

  PHSystem sys;
  sys.ops.J = Matrix::Zero(n, n);
  sys.ops.R = Matrix::Zero(n, n);
  for (Index i = 0; i + 1 < n; ++i) {
    sys.ops.R(i, i) += c;
    sys.ops.R(i + 1, i + 1) += c;
    sys.ops.R(i, i + 1) -= c;
    sys.ops.R(i + 1, i) -= c;
  }

  sys.grid.points = n;
  sys.grid.h = h;
  sys.grid.domain = "[0,1], cell-centred, zero-flux ends";
  sys.grid.positions.resize(n);
  sys.grid.field.assign(static_cast<std::size_t>(n), 0);
  sys.grid.field_labels = {"concentration"};
  for (Index i = 0; i < n; ++i) sys.grid.positions(i) = (static_cast<double>(i) + 0.5) * h;

  const Index m = static_cast<Index>(cfg.actuators.size());
  sys.B = Matrix::Zero(n, m);
  for (Index j = 0; j < m; ++j) {
    const auto& a = cfg.actuators[static_cast<std::size_t>(j)];
    for (Index i = 0; i < n; ++i) {
      if (detail::in_interval(sys.grid.positions(i), a.lo, a.hi)) sys.B(i, j) = 1.0;
    }
  }
  return sys;
}

/// Timoshenko beam, state (x1, x2, x3, x4) = (shear displacement, transverse
/// momentum, angular displacement, angular momentum), each on n_nodes points.
///
/// x2, x4 live on the nodes z_j = j h, j = 1..n (x2(0) = x4(0) = 0 eliminated);
/// x1, x3 live on the midpoints (i + 1/2) h, i = 0..n-1, and the conditions
/// x1(1) = x3(1) = 0 enter through -D^T. With D the forward difference acting
/// on node values, J = [[0, D, 0, -I], [-D^T, 0, 0, 0], [0, 0, 0, D], [I, 0, -D^T, 0]]
/// is skew by construction.
inline PHSystem build_timoshenko(const TimoshenkoConfig& cfg) {
  cfg.validate();
  const Index p = cfg.n_nodes;
  const double h = 1.0 / static_cast<double>(p);
  const Index n = 4 * p;

  Matrix D = Matrix::Zero(p, p);
  for (Index i = 0; i < p; ++i) {
    D(i, i) = 1.0 / h;
    if (i >= 1) D(i, i - 1) = -1.0 / h;
  }
  const Matrix Dt = D.transpose();
  const Matrix I = Matrix::Identity(p, p);

  PHSystem sys;
  sys.ops.J = Matrix::Zero(n, n);
  auto blk = [&](Index r, Index c) { return sys.ops.J.block(r * p, c * p, p, p); };
  blk(0, 1) = D;
  blk(1, 0) = -Dt;
  blk(2, 3) = D;
  blk(3, 2) = -Dt;
  blk(0, 3) = -I;
  blk(3, 0) = I;

  sys.ops.R = Matrix::Zero(n, n);
  sys.ops.R.block(p, p, p, p) = cfg.R1 * I;
  sys.ops.R.block(3 * p, 3 * p, p, p) = cfg.R2 * I;

  sys.grid.points = p;
  sys.grid.h = h;
  sys.grid.domain = "[0,1], staggered; clamped at z=0";
  sys.grid.positions.resize(n);
  sys.grid.field.resize(static_cast<std::size_t>(n));
  sys.grid.field_labels = {"shear displacement", "transverse momentum", "angular displacement",
                           "angular momentum"};
  for (int f = 0; f < 4; ++f) {
    const bool on_nodes = (f == 1 || f == 3);
    for (Index i = 0; i < p; ++i) {
      const Index k = f * p + i;
      sys.grid.positions(k) =
          on_nodes ? static_cast<double>(i + 1) * h : (static_cast<double>(i) + 0.5) * h;
      sys.grid.field[static_cast<std::size_t>(k)] = f;
    }
  }

  // Node j of x4 carries the cell [(j-1)h, jh]; it belongs to a patch when the
  // cell centre does.
  sys.B = Matrix::Zero(n, 2);
  for (Index i = 0; i < p; ++i) {
    const double centre = (static_cast<double>(i) + 0.5) * h;
    if (detail::in_interval(centre, 0.0, cfg.nu)) sys.B(3 * p + i, 0) = 1.0;
    if (detail::in_interval(centre, 1.0 - cfg.nu, 1.0)) sys.B(3 * p + i, 1) = 1.0;
  }
  return sys;
}

/// Conjugate output y = B^* x = B^T W x with W = h I.
inline Vector output_map(const PHSystem& sys, const Vector& x) {
  if (x.size() != sys.n()) {
    throw DimensionMismatch("output_map: state has size " + std::to_string(x.size()) +
                            ", system has n = " + std::to_string(sys.n()));
  }
  return sys.grid.h * (sys.B.transpose() * x);
}

}  // namespace phtp
