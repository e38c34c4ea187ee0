#pragma once

// Points of the unit sphere S^n in R^{n+1}, tangent-plane charts, and the
// squared-distance cost in extrinsic and chart coordinates.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>

#include "sphereot/errors.hpp"

namespace sphereot {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Pairs with x.y at or below this value are treated as outside N; charts
/// blow up at the equator of their base.
inline constexpr double kBoundaryGuard = 1e-10;
inline constexpr double kUnitTolerance = 1e-12;

/// Unit vector of R^{n+1}.
class SpherePoint {
 public:
  SpherePoint() = default;

  /// Throws DomainError unless |coords| = 1 within kUnitTolerance.
  explicit SpherePoint(Vector coords) : coords_(std::move(coords)) {
    if (coords_.size() < 2) throw DomainError("SpherePoint needs at least 2 coordinates");
    const double norm = coords_.norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitTolerance)
      throw DomainError("SpherePoint is not unit length (|p| = " + std::to_string(norm) + ")");
  }

  /// Projects a nonzero vector radially onto the sphere.
  static SpherePoint normalized(const Vector& v) {
    const double norm = v.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw DomainError("cannot normalize a zero vector");
    SpherePoint p;
    p.coords_ = v / norm;
    return p;
  }

  static SpherePoint axis(int ambient_dim, int k) {
    Vector v = Vector::Zero(ambient_dim);
    v(k) = 1.0;
    return SpherePoint(std::move(v));
  }

  const Vector& coords() const noexcept { return coords_; }
  double operator()(Eigen::Index k) const { return coords_(k); }
  /// Intrinsic dimension n of the sphere S^n.
  int dim() const noexcept { return static_cast<int>(coords_.size()) - 1; }
  Eigen::Index ambient_dim() const noexcept { return coords_.size(); }

  double dot(const SpherePoint& other) const { return coords_.dot(other.coords_); }

 private:
  Vector coords_;
};

/// Uniformly distributed point of S^n.
template <class Rng>
SpherePoint random_sphere_point(int n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(n + 1);
  do {
    for (int k = 0; k <= n; ++k) v(k) = gauss(rng);
  } while (v.norm() < 1e-8);
  return SpherePoint::normalized(v);
}

/// Coordinates of a point of the open hemisphere around a chart base,
/// expressed in the chart's tangent frame.
struct LocalCoords {
  Vector values;

  LocalCoords() = default;
  explicit LocalCoords(Vector v) : values(std::move(v)) {}
  static LocalCoords zero(int n) { return LocalCoords(Vector::Zero(n)); }

  Eigen::Index size() const noexcept { return values.size(); }
  double norm() const { return values.norm(); }
};

/// Orthogonal projection onto the tangent hyperplane of `base`, restricted to
/// the open hemisphere {p : base.p > 0}.
class Chart {
 public:
  Chart() = default;

  /// Frame built by Gram-Schmidt on the standard basis with the axis of
  /// largest |base_k| dropped, so the same base always yields the same frame.
  explicit Chart(SpherePoint base) : base_(std::move(base)) {
    const auto dim = base_.ambient_dim();
    const int n = base_.dim();
    Eigen::Index drop = 0;
    base_.coords().cwiseAbs().maxCoeff(&drop);
    frame_.resize(dim, n);
    int col = 0;
    for (Eigen::Index k = 0; k < dim; ++k) {
      if (k == drop) continue;
      Vector v = Vector::Unit(dim, k);
      v -= v.dot(base_.coords()) * base_.coords();
      for (int c = 0; c < col; ++c) v -= v.dot(frame_.col(c)) * frame_.col(c);
      // Second pass keeps the frame orthonormal to ~1e-16 even for nearly
      // aligned inputs.
      v -= v.dot(base_.coords()) * base_.coords();
      for (int c = 0; c < col; ++c) v -= v.dot(frame_.col(c)) * frame_.col(c);
      frame_.col(col++) = v.normalized();
    }
  }

  const SpherePoint& base() const noexcept { return base_; }
  /// (n+1) x n matrix whose columns are the orthonormal tangent frame.
  const Matrix& frame() const noexcept { return frame_; }
  int dim() const noexcept { return base_.dim(); }

  /// Tangent vector of R^{n+1} with the given frame components.
  Vector tangent(const Vector& components) const { return frame_ * components; }

 private:
  SpherePoint base_;
  Matrix frame_;
};

inline LocalCoords chart_project(const Chart& chart, const SpherePoint& p) {
  if (p.ambient_dim() != chart.base().ambient_dim()) throw DomainError("dimension mismatch in chart_project");
  if (chart.base().dot(p) <= kBoundaryGuard)
    throw DomainError("chart_project: point is not in the open hemisphere of the chart base");
  return LocalCoords(chart.frame().transpose() * p.coords());
}

inline SpherePoint chart_lift(const Chart& chart, const LocalCoords& y) {
  if (y.size() != chart.dim()) throw DomainError("dimension mismatch in chart_lift");
  const double r2 = y.values.squaredNorm();
  if (!(r2 < 1.0)) throw DomainError("chart_lift: local coordinates must satisfy |Y| < 1");
  Vector v = chart.frame() * y.values + std::sqrt(1.0 - r2) * chart.base().coords();
  // Renormalize away the O(eps) drift of the frame; the round trip stays
  // within 1e-15.
  return SpherePoint::normalized(v);
}

inline double cost_extrinsic(const SpherePoint& x, const SpherePoint& y) {
  return (x.coords() - y.coords()).squaredNorm();
}

/// Cost on raw vectors, for callers that already hold unit coordinates.
inline double cost_extrinsic(const Vector& x, const Vector& y) { return (x - y).squaredNorm(); }

namespace detail {
inline double height(const LocalCoords& z, const char* what) {
  const double r2 = z.values.squaredNorm();
  if (!(r2 < 1.0)) throw DomainError(std::string(what) + ": local coordinates must satisfy |X| < 1");
  return std::sqrt(1.0 - r2);
}
}  // namespace detail

/// Squared distance of the lifts of X and Y from the same chart:
/// |X-Y|^2 + (sqrt(1-|X|^2) - sqrt(1-|Y|^2))^2.
inline double cost_local(const LocalCoords& x, const LocalCoords& y) {
  if (x.size() != y.size()) throw DomainError("cost_local: dimension mismatch");
  const double hx = detail::height(x, "cost_local");
  const double hy = detail::height(y, "cost_local");
  const double dh = hx - hy;
  return (x.values - y.values).squaredNorm() + dh * dh;
}

/// Gradient of cost_local in its first argument. At X = 0 this is exactly -2Y.
inline Vector grad_cost_local(const LocalCoords& x, const LocalCoords& y) {
  if (x.size() != y.size()) throw DomainError("grad_cost_local: dimension mismatch");
  const double hx = detail::height(x, "grad_cost_local");
  const double hy = detail::height(y, "grad_cost_local");
  return 2.0 * (x.values - y.values) - (2.0 * (hx - hy) / hx) * x.values;
}

inline bool in_N(const SpherePoint& x, const SpherePoint& y) { return x.dot(y) > 0.0; }

namespace detail {
inline Matrix mixed_difference(const Chart& cx, const Chart& cy, double h) {
  const int n = cx.dim();
  Matrix m(n, n);
  auto lift = [](const Chart& c, int axis, double s) {
    Vector v = Vector::Zero(c.dim());
    v(axis) = s;
    return chart_lift(c, LocalCoords(std::move(v)));
  };
  for (int a = 0; a < n; ++a) {
    const SpherePoint xp = lift(cx, a, h), xm = lift(cx, a, -h);
    for (int b = 0; b < n; ++b) {
      const SpherePoint yp = lift(cy, b, h), ym = lift(cy, b, -h);
      m(a, b) = (cost_extrinsic(xp, yp) - cost_extrinsic(xp, ym) - cost_extrinsic(xm, yp) +
                 cost_extrinsic(xm, ym)) /
                (4.0 * h * h);
    }
  }
  return m;
}
}  // namespace detail

/// Matrix of the mixed second derivative of c, with the source index in the
/// frame of Chart(x) and the target index in the frame of Chart(y), by
/// central differences of step h. With `richardson`, the h and h/2 results
/// are combined to cancel the O(h^2) term.
inline Matrix cross_derivative_frame(const SpherePoint& x, const SpherePoint& y, double h = 1e-4,
                                     bool richardson = false) {
  if (x.ambient_dim() != y.ambient_dim()) throw DomainError("cross_derivative_frame: dimension mismatch");
  if (x.dot(y) <= kBoundaryGuard)
    throw DomainError("cross_derivative_frame: (x, y) is not in N (x.y <= 0)");
  if (!(h > 0.0) || h >= 0.5) throw DomainError("cross_derivative_frame: step must lie in (0, 0.5)");
  const Chart cx(x), cy(y);
  Matrix coarse = detail::mixed_difference(cx, cy, h);
  if (!richardson) return coarse;
  Matrix fine = detail::mixed_difference(cx, cy, 0.5 * h);
  return (4.0 * fine - coarse) / 3.0;
}

/// Point at geodesic angle `angle` from x in the direction of the unit
/// tangent `direction` (which must be orthogonal to x).
inline SpherePoint geodesic_point(const SpherePoint& x, const Vector& direction, double angle) {
  return SpherePoint::normalized(std::cos(angle) * x.coords() + std::sin(angle) * direction);
}

/// Surface measure of S^n.
inline double sphere_area(int n) {
  const double half = 0.5 * (n + 1);
  return 2.0 * std::pow(M_PI, half) / std::tgamma(half);
}

}  // namespace sphereot
