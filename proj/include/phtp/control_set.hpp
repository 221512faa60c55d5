#pragma once

#include <cmath>
#include <string>

#include "phtp/operator_core.hpp"

namespace phtp {

/// Compact convex admissible set U with 0 in its interior: a box or a ball.
struct ControlSet {
  enum class Kind { Box, Ball };

  Kind kind = Kind::Box;
  Vector u_max;       // Box: half-width per channel
  double radius = 0;  // Ball

  static ControlSet box(const Vector& half_widths) {
    for (Index i = 0; i < half_widths.size(); ++i) {
      if (!(half_widths(i) > 0.0)) throw ConfigError("u_max", "box half-widths must be > 0");
    }
    return ControlSet{Kind::Box, half_widths, 0.0};
  }
  static ControlSet box(Index m, double half_width) {
    return box(Vector::Constant(m, half_width));
  }
  static ControlSet ball(Index m, double r) {
    if (!(r > 0.0)) throw ConfigError("radius", "ball radius must be > 0");
    return ControlSet{Kind::Ball, Vector::Constant(m, r), r};
  }

  Index m() const { return u_max.size(); }

  /// max_{v in U} ||v||.
  double max_norm() const { return kind == Kind::Box ? u_max.norm() : radius; }

  Vector project(const Vector& v) const {
    if (v.size() != m()) throw DimensionMismatch("control has " + std::to_string(v.size()) +
                                                 " channels, control set has " + std::to_string(m()));
    if (kind == Kind::Box) return v.cwiseMax(-u_max).cwiseMin(u_max);
    const double nv = v.norm();
    return nv <= radius ? v : Vector(v * (radius / nv));
  }

  bool contains(const Vector& v, double tol = 0.0) const {
    if (kind == Kind::Box) return (v.cwiseAbs() - u_max).maxCoeff() <= tol;
    return v.norm() <= radius + tol;
  }

  /// Projection of an interval-major stacked control (N * m entries).
  Vector project_stacked(const Vector& s) const {
    Vector out(s.size());
    const Index mm = m();
    for (Index k = 0; k < s.size() / mm; ++k) out.segment(k * mm, mm) = project(s.segment(k * mm, mm));
    return out;
  }
};

inline Vector project_uset(const Vector& v, const ControlSet& uset) { return uset.project(v); }

}  // namespace phtp
