#pragma once

// Numerical checks of the structural conditions of the squared-distance cost
// on the sphere: twist, nondegeneracy, cross-curvature on null pairs and
// bi-convexity of the chart images.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sphereot/errors.hpp"
#include "sphereot/sphere_geometry.hpp"

namespace sphereot {

enum class Condition { Twist, Nondegeneracy, CrossCurvature, Biconvexity };

inline const char* to_string(Condition c) {
  switch (c) {
    case Condition::Twist: return "A1";
    case Condition::Nondegeneracy: return "A2";
    case Condition::CrossCurvature: return "A3s";
    case Condition::Biconvexity: return "biconvex";
  }
  return "?";
}

struct ConditionReport {
  Condition condition = Condition::Twist;
  std::size_t sample_count = 0;
  /// Smallest signed slack observed.
  double min_margin = std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  std::pair<SpherePoint, SpherePoint> worst_pair;
  bool flagged = false;
  /// Nothing to check (e.g. no null pairs exist in dimension 1).
  bool vacuous = false;
  std::string note;
  /// Raw samples for plotting; one row per sample, columns named below.
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  bool pass() const { return vacuous || (!flagged && min_margin > -tolerance); }
};

/// Images -Dc(x, y) = 2Y in the chart at x, for each sample y.
inline std::vector<Vector> twist_images(const SpherePoint& x, const std::vector<SpherePoint>& ys) {
  const Chart chart(x);
  const LocalCoords origin = LocalCoords::zero(x.dim());
  std::vector<Vector> out;
  out.reserve(ys.size());
  for (const auto& y : ys) {
    if (!(x.dot(y) > 0.0)) throw DomainError("twist_margin: sample lies outside N(x) (x.y <= 0)");
    out.push_back(-grad_cost_local(origin, chart_project(chart, y)));
  }
  return out;
}

/// min pairwise image distance / min pairwise chart-preimage distance. The
/// map Y -> 2Y gives exactly 2; coincident samples give 0 and are flagged.
inline ConditionReport twist_margin(const SpherePoint& x, const std::vector<SpherePoint>& ys) {
  if (ys.size() < 2) throw InsufficientData("twist_margin: need at least 2 samples");
  const Chart chart(x);
  const auto images = twist_images(x, ys);
  std::vector<Vector> pre;
  pre.reserve(ys.size());
  for (const auto& y : ys) pre.push_back(chart_project(chart, y).values);

  ConditionReport rep;
  rep.condition = Condition::Twist;
  rep.sample_count = ys.size();
  rep.columns = {"x_dot_y", "image_over_preimage"};
  double min_pre = std::numeric_limits<double>::infinity();
  double min_img = std::numeric_limits<double>::infinity();
  std::size_t wa = 0, wb = 1;
  for (std::size_t a = 0; a < ys.size(); ++a)
    for (std::size_t b = a + 1; b < ys.size(); ++b) {
      const double dp = (pre[a] - pre[b]).norm();
      const double di = (images[a] - images[b]).norm();
      if (dp < min_pre) {
        min_pre = dp;
        wa = a;
        wb = b;
      }
      min_img = std::min(min_img, di);
    }
  for (std::size_t a = 0; a < ys.size(); ++a) {
    const double r = pre[a].norm();
    rep.rows.push_back({x.dot(ys[a]), r > 0.0 ? images[a].norm() / r : 2.0});
  }
  rep.worst_pair = {ys[wa], ys[wb]};
  if (!(min_pre > 0.0)) {
    rep.min_margin = 0.0;
    rep.flagged = true;
    rep.note = "duplicate samples";
  } else {
    rep.min_margin = min_img / min_pre;
  }
  return rep;
}

/// |det D-bar D c(x, y)| for y at each angle from x along the first chart
/// direction. Returns (x.y, |det|) per angle.
inline std::vector<std::pair<double, double>> nondegeneracy_profile(const SpherePoint& x,
                                                                    const std::vector<double>& angles,
                                                                    double h = 1e-4) {
  const Vector dir = Chart(x).frame().col(0);
  std::vector<std::pair<double, double>> out;
  out.reserve(angles.size());
  for (double a : angles) {
    if (!(a > 0.0) || !(a < 0.5 * M_PI)) throw DomainError("nondegeneracy_profile: angles must lie in (0, pi/2)");
    const SpherePoint y = geodesic_point(x, dir, a);
    out.emplace_back(x.dot(y), std::abs(cross_derivative_frame(x, y, h).determinant()));
  }
  return out;
}

inline constexpr double kNullTolerance = 1e-8;
inline constexpr double kCrossCurvatureMinAlignment = 0.1;
/// Step for the nullity test: the central mixed difference of this cost is
/// exact up to rounding, and a larger step keeps rounding below 1e-10.
inline constexpr double kNullityStep = 1e-3;

/// <p, D-bar D c(x, y) pbar> with p, pbar given as chart-frame components.
inline double null_form(const SpherePoint& x, const SpherePoint& y, const Vector& p, const Vector& pbar) {
  return p.dot(cross_derivative_frame(x, y, kNullityStep) * pbar);
}

/// Unit pbar with <p, D-bar D c pbar> = 0, drawn at random from the
/// orthogonal complement of (D-bar D c)^T p.
template <class Rng>
Vector null_partner(const SpherePoint& x, const SpherePoint& y, const Vector& p, Rng& rng) {
  const int n = x.dim();
  if (n < 2) throw DomainError("null_partner: no nonzero null pairs in dimension 1");
  const Vector w = cross_derivative_frame(x, y, kNullityStep).transpose() * p;
  const double wn = w.norm();
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Vector v(n);
    for (int k = 0; k < n; ++k) v(k) = gauss(rng);
    if (wn > 0.0) v -= v.dot(w) / (wn * wn) * w;
    const double vn = v.norm();
    if (vn > 1e-6) {
      v /= vn;
      if (wn > 0.0) v -= v.dot(w) / (wn * wn) * w;
      return v.normalized();
    }
  }
  throw DomainError("null_partner: could not draw a complement direction");
}

/// -d^2/ds^2 d^2/dt^2 c(x(s), y(t)) at 0, along chart lines x(s) = lift_x(s p)
/// and y(t) = lift_y(t pbar), by a 4 x 4 stencil at offsets +-h/2, +-3h/2.
/// With `require_null`, throws NullityError unless <p, D-bar D c pbar> is
/// zero within 1e-8.
inline double cross_curvature(const SpherePoint& x, const SpherePoint& y, const Vector& p, const Vector& pbar,
                              double h = 1e-2, bool require_null = true) {
  if (x.ambient_dim() != y.ambient_dim()) throw DomainError("cross_curvature: dimension mismatch");
  if (!(x.dot(y) > kCrossCurvatureMinAlignment))
    throw DomainError("cross_curvature: needs x.y > 0.1 (interior of N)");
  if (p.size() != x.dim() || pbar.size() != y.dim()) throw DomainError("cross_curvature: direction size mismatch");
  if (!(h > 0.0) || 1.5 * h * std::max(p.norm(), pbar.norm()) >= 0.5)
    throw DomainError("cross_curvature: step too large");
  if (p.norm() == 0.0 || pbar.norm() == 0.0) return 0.0;
  if (require_null) {
    const double form = null_form(x, y, p, pbar);
    if (std::abs(form) > kNullTolerance)
      throw NullityError("cross_curvature: pair is not null (<p, DDc pbar> = " + std::to_string(form) + ")");
  }
  const Chart cx(x), cy(y);
  static constexpr std::array<double, 4> offset{-1.5, -0.5, 0.5, 1.5};
  static constexpr std::array<double, 4> weight{1.0, -1.0, -1.0, 1.0};
  std::array<Vector, 4> xs, ys;
  for (int k = 0; k < 4; ++k) {
    xs[k] = chart_lift(cx, LocalCoords(offset[k] * h * p)).coords();
    ys[k] = chart_lift(cy, LocalCoords(offset[k] * h * pbar)).coords();
  }
  double acc = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) acc += weight[a] * weight[b] * cost_extrinsic(xs[a], ys[b]);
  return -acc / (4.0 * h * h * h * h);
}

struct BiconvexityWitness {
  SpherePoint point;
  /// |Dc(x0, w) - (theta Dc(x0, y1) + (1 - theta) Dc(x0, y0))|.
  double residual = 0.0;
};

inline constexpr double kBiconvexityTolerance = 1e-10;

/// Lift of theta Y1 + (1 - theta) Y0 from the chart at x0: the point whose
/// Dc(x0, .) image is the convex combination of the images of y0 and y1.
inline BiconvexityWitness biconvexity_witness(const SpherePoint& x0, const SpherePoint& y0, const SpherePoint& y1,
                                              double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError("biconvexity_witness: theta must lie in [0, 1]");
  if (!(x0.dot(y0) > kBoundaryGuard) || !(x0.dot(y1) > kBoundaryGuard))
    throw DomainError("biconvexity_witness: y0 and y1 must lie in N(x0)");
  const Chart chart(x0);
  const LocalCoords origin = LocalCoords::zero(x0.dim());
  const LocalCoords Y0 = chart_project(chart, y0), Y1 = chart_project(chart, y1);
  const LocalCoords W(theta * Y1.values + (1.0 - theta) * Y0.values);
  BiconvexityWitness out{chart_lift(chart, W), 0.0};
  if (!(x0.dot(out.point) > kBoundaryGuard)) throw DomainError("biconvexity_witness: witness left N(x0)");
  const Vector target = theta * grad_cost_local(origin, Y1) + (1.0 - theta) * grad_cost_local(origin, Y0);
  out.residual = (grad_cost_local(origin, chart_project(chart, out.point)) - target).norm();
  return out;
}

/// The horizontal statement: convexity of the images of x0, x1 under
/// Dc(., y0) in the chart at y0. The cost is symmetric, so this is the
/// vertical witness with the roles of the two spheres exchanged.
inline BiconvexityWitness horizontal_biconvexity_witness(const SpherePoint& y0, const SpherePoint& x0,
                                                         const SpherePoint& x1, double theta) {
  return biconvexity_witness(y0, x0, x1, theta);
}

/// Random y with x.y uniform in [lo, hi).
template <class Rng>
SpherePoint random_partner(const SpherePoint& x, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> align(lo, hi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Chart chart(x);
  Vector d(x.dim());
  for (int k = 0; k < x.dim(); ++k) d(k) = gauss(rng);
  if (d.norm() < 1e-12) d(0) = 1.0;
  const Vector t = chart.tangent(d.normalized());
  return geodesic_point(x, t, std::acos(align(rng)));
}

template <class Rng>
Vector random_unit(int n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(n);
  do {
    for (int k = 0; k < n; ++k) v(k) = gauss(rng);
  } while (v.norm() < 1e-8);
  return v.normalized();
}

struct MtwSuiteConfig {
  int n = 2;
  unsigned seed = 0;
  int twist_samples = 200;
  int nondegeneracy_pairs = 200;
  int null_pairs = 1000;
  int biconvex_trials = 200;
  double min_alignment_a2 = 0.05;
  double min_alignment_a3s = 0.3;
};

/// Runs all four checks on random samples and returns one report each.
inline std::vector<ConditionReport> run_mtw_suite(const MtwSuiteConfig& cfg) {
  if (cfg.n < 1) throw ConfigError("mtw suite: n must be at least 1");
  std::mt19937_64 rng(cfg.seed);
  std::vector<ConditionReport> out;

  {
    const SpherePoint x = random_sphere_point(cfg.n, rng);
    std::vector<SpherePoint> ys;
    for (int k = 0; k < cfg.twist_samples; ++k) ys.push_back(random_partner(x, 0.01, 1.0, rng));
    out.push_back(twist_margin(x, ys));
  }

  {
    ConditionReport rep;
    rep.condition = Condition::Nondegeneracy;
    rep.columns = {"x_dot_y", "abs_det"};
    for (int k = 0; k < cfg.nondegeneracy_pairs; ++k) {
      const SpherePoint x = random_sphere_point(cfg.n, rng);
      const SpherePoint y = random_partner(x, cfg.min_alignment_a2, 1.0, rng);
      const double det = std::abs(cross_derivative_frame(x, y).determinant());
      rep.rows.push_back({x.dot(y), det});
      if (det < rep.min_margin) {
        rep.min_margin = det;
        rep.worst_pair = {x, y};
      }
    }
    rep.sample_count = rep.rows.size();
    rep.flagged = !(rep.min_margin > 0.0);
    out.push_back(std::move(rep));
  }

  {
    ConditionReport rep;
    rep.condition = Condition::CrossCurvature;
    rep.columns = {"x_dot_y", "cross_curvature"};
    if (cfg.n < 2) {
      rep.note = "no nonzero null pairs in dimension 1";
      rep.vacuous = true;
      rep.min_margin = 0.0;
    } else {
      for (int k = 0; k < cfg.null_pairs; ++k) {
        const SpherePoint x = random_sphere_point(cfg.n, rng);
        const SpherePoint y = random_partner(x, cfg.min_alignment_a3s, 1.0, rng);
        const Vector p = random_unit(cfg.n, rng);
        const Vector pbar = null_partner(x, y, p, rng);
        const double v = cross_curvature(x, y, p, pbar);
        rep.rows.push_back({x.dot(y), v});
        if (v < rep.min_margin) {
          rep.min_margin = v;
          rep.worst_pair = {x, y};
        }
      }
    }
    rep.sample_count = rep.rows.size();
    out.push_back(std::move(rep));
  }

  {
    ConditionReport rep;
    rep.condition = Condition::Biconvexity;
    rep.tolerance = kBiconvexityTolerance;
    rep.columns = {"theta", "vertical_residual", "horizontal_residual"};
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < cfg.biconvex_trials; ++k) {
      const SpherePoint x0 = random_sphere_point(cfg.n, rng);
      const SpherePoint y0 = random_partner(x0, 0.05, 1.0, rng);
      const SpherePoint y1 = random_partner(x0, 0.05, 1.0, rng);
      const SpherePoint x1 = random_partner(y0, 0.05, 1.0, rng);
      const double theta = unit(rng);
      const double rv = biconvexity_witness(x0, y0, y1, theta).residual;
      const double rh = horizontal_biconvexity_witness(y0, x0, x1, theta).residual;
      rep.rows.push_back({theta, rv, rh});
      if (-std::max(rv, rh) < rep.min_margin) {
        rep.min_margin = -std::max(rv, rh);
        rep.worst_pair = {x0, y0};
      }
    }
    rep.sample_count = rep.rows.size();
    out.push_back(std::move(rep));
  }
  return out;
}

}  // namespace sphereot
