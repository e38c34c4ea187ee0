#pragma once

// Discrete measures on S^n: quasi-uniform meshes, density sampling and the
// resolution-level check of the two-sided density bounds.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sphereot/errors.hpp"
#include "sphereot/sphere_geometry.hpp"

namespace sphereot {

inline constexpr double kMassTolerance = 1e-10;

struct Mesh {
  int n = 0;
  std::vector<SpherePoint> points;
  /// Surface-measure weight attached to each point; sums to area(S^n).
  std::vector<double> cell_areas;
  /// Mean nearest-neighbour chord distance.
  double spacing = 0.0;

  std::size_t size() const noexcept { return points.size(); }
};

namespace detail {

inline double mean_nearest_neighbour(const std::vector<SpherePoint>& pts) {
  if (pts.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) best = std::min(best, (pts[i].coords() - pts[j].coords()).squaredNorm());
    total += std::sqrt(best);
  }
  return total / static_cast<double>(pts.size());
}

/// Haar-random rotation of R^d.
template <class Rng>
Matrix random_rotation(int d, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) g(r, c) = gauss(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix rdiag = qr.matrixQR().diagonal().asDiagonal();
  for (int c = 0; c < d; ++c)
    if (rdiag(c, c) < 0) q.col(c) *= -1.0;
  if (q.determinant() < 0) q.col(0) *= -1.0;
  return q;
}

/// Monte Carlo estimate of the Voronoi cell areas of `pts`; every cell gets
/// one pseudo-count so no area is zero.
template <class Rng>
std::vector<double> monte_carlo_cell_areas(int n, const std::vector<SpherePoint>& pts, std::size_t samples,
                                           Rng& rng) {
  std::vector<double> counts(pts.size(), 1.0);
  Matrix p(n + 1, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) p.col(static_cast<Eigen::Index>(i)) = pts[i].coords();
  for (std::size_t s = 0; s < samples; ++s) {
    const SpherePoint q = random_sphere_point(n, rng);
    Eigen::Index best = 0;
    (p.transpose() * q.coords()).maxCoeff(&best);
    counts[static_cast<std::size_t>(best)] += 1.0;
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  const double area = sphere_area(n);
  for (double& c : counts) c *= area / total;
  return counts;
}

}  // namespace detail

/// Deterministic quasi-uniform point set on S^n.
///
/// n = 1: equally spaced angles with a seeded phase (exact arc lengths).
/// n = 2: Fibonacci spiral under a seeded rotation; the spiral is an
///        equal-area construction, so every cell gets area 4*pi/count.
/// n >= 3: seeded random points relaxed by pairwise repulsion, with
///        Monte Carlo Voronoi areas.
inline Mesh quasi_uniform_mesh(int n, int count, std::uint64_t seed) {
  if (n < 1) throw ConfigError("mesh dimension must be >= 1");
  if (count < n + 2) throw ConfigError("mesh needs at least n+2 points (got " + std::to_string(count) + ")");
  std::mt19937_64 rng(seed);
  Mesh mesh;
  mesh.n = n;
  mesh.points.reserve(static_cast<std::size_t>(count));
  const double area = sphere_area(n);

  if (n == 1) {
    const double step = 2.0 * M_PI / count;
    const double phase = std::uniform_real_distribution<double>(0.0, step)(rng);
    for (int k = 0; k < count; ++k) {
      const double a = phase + k * step;
      Vector v(2);
      v << std::cos(a), std::sin(a);
      mesh.points.push_back(SpherePoint::normalized(v));
    }
    mesh.cell_areas.assign(static_cast<std::size_t>(count), step);
  } else if (n == 2) {
    const Matrix rot = detail::random_rotation(3, rng);
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      const double z = 1.0 - (2.0 * k + 1.0) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double a = golden * k;
      Vector v(3);
      v << r * std::cos(a), r * std::sin(a), z;
      mesh.points.push_back(SpherePoint::normalized(rot * v));
    }
    mesh.cell_areas.assign(static_cast<std::size_t>(count), area / count);
  } else {
    for (int k = 0; k < count; ++k) mesh.points.push_back(random_sphere_point(n, rng));
    // Repulsion with a step proportional to the target spacing.
    const double target = std::pow(area / count, 1.0 / n);
    for (int iter = 0; iter < 60; ++iter) {
      std::vector<Vector> next;
      next.reserve(mesh.points.size());
      for (std::size_t i = 0; i < mesh.points.size(); ++i) {
        const Vector& pi = mesh.points[i].coords();
        Vector force = Vector::Zero(n + 1);
        for (std::size_t j = 0; j < mesh.points.size(); ++j) {
          if (j == i) continue;
          const Vector d = pi - mesh.points[j].coords();
          const double r2 = std::max(d.squaredNorm(), 1e-12);
          force += d / std::pow(r2, 0.5 * (n + 2));
        }
        force -= force.dot(pi) * pi;
        const double fn = force.norm();
        Vector moved = pi;
        if (fn > 0) moved += (0.1 * target) * force / fn;
        next.push_back(moved);
      }
      for (std::size_t i = 0; i < next.size(); ++i) mesh.points[i] = SpherePoint::normalized(next[i]);
    }
    const std::size_t samples = std::max<std::size_t>(20000, 200 * static_cast<std::size_t>(count));
    mesh.cell_areas = detail::monte_carlo_cell_areas(n, mesh.points, samples, rng);
  }
  mesh.spacing = detail::mean_nearest_neighbour(mesh.points);
  return mesh;
}

/// Weighted atoms on S^n with their quadrature cell areas.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  /// Validates: equal lengths, matching point dimension, weights >= 0,
  /// areas > 0 and total mass 1 within kMassTolerance.
  DiscreteMeasure(int n, std::vector<SpherePoint> points, std::vector<double> weights,
                  std::vector<double> cell_areas)
      : n_(n), points_(std::move(points)), weights_(std::move(weights)), cell_areas_(std::move(cell_areas)) {
    if (n_ < 1) throw DomainError("measure dimension must be >= 1");
    if (points_.empty()) throw DomainError("measure has no atoms");
    if (weights_.size() != points_.size() || cell_areas_.size() != points_.size())
      throw DomainError("measure arrays have mismatched lengths");
    double total = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (points_[i].dim() != n_) throw DomainError("measure atom " + std::to_string(i) + " has wrong dimension");
      if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i]))
        throw DomainError("measure atom " + std::to_string(i) + " has negative weight");
      if (!(cell_areas_[i] > 0.0) || !std::isfinite(cell_areas_[i]))
        throw DomainError("measure atom " + std::to_string(i) + " has non-positive cell area");
      total += weights_[i];
    }
    if (std::abs(total - 1.0) > kMassTolerance)
      throw DomainError("measure mass is " + std::to_string(total) + ", expected 1");
  }

  int dim() const noexcept { return n_; }
  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<SpherePoint>& points() const noexcept { return points_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<double>& cell_areas() const noexcept { return cell_areas_; }
  const SpherePoint& point(std::size_t i) const { return points_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  /// Density estimate weight / cell_area of atom i.
  double density(std::size_t i) const { return weights_[i] / cell_areas_[i]; }
  double total_mass() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

 private:
  int n_ = 0;
  std::vector<SpherePoint> points_;
  std::vector<double> weights_;
  std::vector<double> cell_areas_;
};

using Density = std::function<double(const SpherePoint&)>;

/// Atoms of `mesh` with weights proportional to density(p_i) * cell_area_i.
inline DiscreteMeasure sample_density(const Density& density, const Mesh& mesh) {
  std::vector<double> w(mesh.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double d = density(mesh.points[i]);
    if (!(d > 0.0) || !std::isfinite(d))
      throw DomainError("sample_density: density must be strictly positive (atom " + std::to_string(i) + ")");
    w[i] = d * mesh.cell_areas[i];
    total += w[i];
  }
  for (double& x : w) x /= total;
  return DiscreteMeasure(mesh.n, mesh.points, std::move(w), mesh.cell_areas);
}

/// Measure with explicit weights that are renormalized to mass 1.
inline DiscreteMeasure make_measure(int n, std::vector<SpherePoint> points, std::vector<double> weights,
                                    std::vector<double> cell_areas = {}) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw DomainError("make_measure: weights must have positive total");
  for (double& w : weights) w /= total;
  if (cell_areas.empty()) cell_areas.assign(points.size(), sphere_area(n) / static_cast<double>(points.size()));
  return DiscreteMeasure(n, std::move(points), std::move(weights), std::move(cell_areas));
}

enum class Side { Source, Target };

struct AtomRef {
  Side side;
  std::size_t index;
  friend bool operator==(const AtomRef&, const AtomRef&) = default;
};

struct SuitabilityCertificate {
  double epsilon = 0.0;
  bool upper_ok = true;
  bool lower_ok = true;
  /// Atoms whose density estimate violates a checked bound.
  std::vector<AtomRef> worst_atoms;

  bool ok() const noexcept { return upper_ok && lower_ok; }
};

/// Checks mu <= (1/epsilon) H^n on the source and nu >= epsilon H^n on the
/// target, using the per-atom density estimates. With `symmetric`, both
/// bounds are checked on both measures.
inline SuitabilityCertificate check_suitable(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double epsilon,
                                             bool symmetric) {
  if (mu.dim() != nu.dim()) throw DomainError("check_suitable: measures live on different spheres");
  if (!(epsilon > 0.0)) throw DomainError("check_suitable: epsilon must be positive");
  SuitabilityCertificate cert;
  cert.epsilon = epsilon;
  const double upper = 1.0 / epsilon;
  auto check = [&](const DiscreteMeasure& m, Side side, bool check_upper, bool check_lower) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double d = m.density(i);
      const bool bad_upper = check_upper && d > upper;
      const bool bad_lower = check_lower && d < epsilon;
      if (bad_upper) cert.upper_ok = false;
      if (bad_lower) cert.lower_ok = false;
      if (bad_upper || bad_lower) cert.worst_atoms.push_back({side, i});
    }
  };
  check(mu, Side::Source, true, symmetric);
  check(nu, Side::Target, symmetric, true);
  return cert;
}

/// Default suitability constant 0.05 / area(S^n).
inline double default_epsilon(int n) { return 0.05 / sphere_area(n); }

namespace detail {
inline double parse_parameter(std::string_view text, std::string_view name) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("density '" + std::string(name) + "' has a malformed parameter '" + std::string(text) + "'");
  return value;
}
}  // namespace detail

/// Built-in densities, all with a strictly positive floor:
///   "uniform"
///   "cap:k"  -> (1-k) + 10 k max(0, p.e)^4, concentrated at the pole e
///   "band:k" -> (1-k) + 3 k (1 - (p.e)^2)^4, concentrated at the equator
/// where e is the last coordinate axis and k in [0, 1).
inline Density builtin_density(const std::string& spec) {
  if (spec == "uniform") return [](const SpherePoint&) { return 1.0; };
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  if (colon == std::string::npos || (name != "cap" && name != "band"))
    throw ConfigError("unknown density '" + spec + "' (expected uniform, cap:k or band:k)");
  const double k = detail::parse_parameter(std::string_view(spec).substr(colon + 1), spec);
  if (!(k >= 0.0 && k < 1.0)) throw ConfigError("density parameter must lie in [0, 1): " + spec);
  if (name == "cap") {
    return [k](const SpherePoint& p) {
      const double z = std::max(0.0, p(p.ambient_dim() - 1));
      return (1.0 - k) + 10.0 * k * z * z * z * z;
    };
  }
  return [k](const SpherePoint& p) {
    const double z = p(p.ambient_dim() - 1);
    const double s = 1.0 - z * z;
    return (1.0 - k) + 3.0 * k * s * s * s * s;
  };
}

}  // namespace sphereot
