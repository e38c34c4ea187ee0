#include <gtest/gtest.h>

#include <random>

#include "sphereot/sphere_geometry.hpp"

using namespace sphereot;

namespace {

SpherePoint pt(std::initializer_list<double> v) {
  Vector c(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) c(k++) = x;
  return SpherePoint(c);
}

Vector vec(std::initializer_list<double> v) {
  Vector c(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) c(k++) = x;
  return c;
}

// Random point within angle < pi/2 - margin of base.
SpherePoint near(const SpherePoint& base, double max_angle, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, max_angle);
  Vector d = random_sphere_point(base.dim(), rng).coords();
  d -= d.dot(base.coords()) * base.coords();
  return geodesic_point(base, d.normalized(), u(rng));
}

}  // namespace

TEST(SpherePoint, RejectsNonUnitVectors) {
  EXPECT_THROW(SpherePoint(vec({1.0, 1.0, 0.0})), DomainError);
  EXPECT_THROW(SpherePoint(vec({1.0})), DomainError);
  EXPECT_NO_THROW(SpherePoint(vec({0.6, 0.0, 0.8})));
  EXPECT_THROW(SpherePoint::normalized(Vector::Zero(3)), DomainError);
}

TEST(Chart, FrameIsOrthonormalAndTangent) {
  std::mt19937_64 rng(3);
  for (int n : {1, 2, 3, 5}) {
    for (int t = 0; t < 50; ++t) {
      const Chart c(random_sphere_point(n, rng));
      const Matrix& f = c.frame();
      EXPECT_LE((f.transpose() * f - Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LE((f.transpose() * c.base().coords()).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Chart, ProjectExamples) {
  const Chart c(pt({0, 0, 1}));
  const auto y = chart_project(c, pt({0.6, 0, 0.8}));
  EXPECT_NEAR(y.values(0), 0.6, 1e-15);
  EXPECT_NEAR(y.values(1), 0.0, 1e-15);
  EXPECT_LE(chart_project(c, c.base()).norm(), 1e-15);
  EXPECT_THROW(chart_project(c, pt({0, 1, 0})), DomainError);
  EXPECT_THROW(chart_project(c, pt({0, 0, -1})), DomainError);
}

TEST(Chart, LiftExamples) {
  const Chart c(pt({0, 0, 1}));
  const auto p = chart_lift(c, LocalCoords(vec({0.6, 0.0})));
  EXPECT_LE((p.coords() - vec({0.6, 0, 0.8})).norm(), 1e-15);
  EXPECT_LE((chart_lift(c, LocalCoords::zero(2)).coords() - c.base().coords()).norm(), 1e-15);
  EXPECT_THROW(chart_lift(c, LocalCoords(vec({1.0, 0.0}))), DomainError);
  EXPECT_THROW(chart_lift(c, LocalCoords(vec({0.8, 0.7}))), DomainError);
}

TEST(Chart, RoundTrips) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n : {1, 2, 3, 4}) {
    for (int t = 0; t < 200; ++t) {
      const Chart c(random_sphere_point(n, rng));
      Vector y(n);
      do {
        for (int k = 0; k < n; ++k) y(k) = u(rng);
      } while (y.norm() >= 0.999);
      const LocalCoords Y(y);
      EXPECT_LE((chart_project(c, chart_lift(c, Y)).values - y).norm(), 1e-12);
      const SpherePoint p = near(c.base(), 1.5, rng);
      EXPECT_LE((chart_lift(c, chart_project(c, p)).coords() - p.coords()).norm(), 1e-12);
    }
  }
}

TEST(Cost, ExtrinsicExamples) {
  const auto x = pt({1, 0, 0});
  EXPECT_EQ(cost_extrinsic(x, x), 0.0);
  EXPECT_DOUBLE_EQ(cost_extrinsic(x, pt({0, 1, 0})), 2.0);
  EXPECT_DOUBLE_EQ(cost_extrinsic(x, pt({-1, 0, 0})), 4.0);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_sphere_point(3, rng), b = random_sphere_point(3, rng);
    EXPECT_EQ(cost_extrinsic(a, b), cost_extrinsic(b, a));
    EXPECT_NEAR(cost_extrinsic(a, b), 2.0 - 2.0 * a.dot(b), 1e-14);
    EXPECT_GE(cost_extrinsic(a, b), 0.0);
    EXPECT_LE(cost_extrinsic(a, b), 4.0);
  }
}

TEST(Cost, LocalExamples) {
  EXPECT_EQ(cost_local(LocalCoords::zero(2), LocalCoords::zero(2)), 0.0);
  EXPECT_NEAR(cost_local(LocalCoords::zero(2), LocalCoords(vec({0.6, 0.0}))), 0.4, 1e-15);
  EXPECT_NEAR(cost_local(LocalCoords::zero(2), LocalCoords(vec({1.0 - 1e-12, 0.0}))), 2.0, 1e-5);
  EXPECT_THROW(cost_local(LocalCoords(vec({1.0, 0.0})), LocalCoords::zero(2)), DomainError);
}

TEST(Cost, LocalMatchesExtrinsic) {
  std::mt19937_64 rng(7);
  for (int n : {1, 2, 3}) {
    for (int t = 0; t < 300; ++t) {
      const Chart c(random_sphere_point(n, rng));
      const auto a = near(c.base(), 1.5, rng), b = near(c.base(), 1.5, rng);
      EXPECT_NEAR(cost_local(chart_project(c, a), chart_project(c, b)), cost_extrinsic(a, b), 1e-12);
    }
  }
}

TEST(Cost, GradientAtOriginIsMinusTwoY) {
  const auto g = grad_cost_local(LocalCoords::zero(2), LocalCoords(vec({0.3, 0.4})));
  EXPECT_DOUBLE_EQ(g(0), -0.6);
  EXPECT_DOUBLE_EQ(g(1), -0.8);
  EXPECT_EQ(grad_cost_local(LocalCoords::zero(2), LocalCoords::zero(2)).norm(), 0.0);
  EXPECT_THROW(grad_cost_local(LocalCoords::zero(2), LocalCoords(vec({0.0, 1.0}))), DomainError);
}

TEST(Cost, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int t = 0; t < 100; ++t) {
    const int n = 3;
    Vector x(n), y(n);
    for (int k = 0; k < n; ++k) {
      x(k) = u(rng);
      y(k) = u(rng);
    }
    const Vector g = grad_cost_local(LocalCoords(x), LocalCoords(y));
    // Generic case, step 1e-5.
    for (int k = 0; k < n; ++k) {
      const double h = 1e-5;
      Vector xp = x, xm = x;
      xp(k) += h;
      xm(k) -= h;
      const double fd = (cost_local(LocalCoords(xp), LocalCoords(y)) - cost_local(LocalCoords(xm), LocalCoords(y))) / (2 * h);
      EXPECT_NEAR(g(k), fd, 1e-6);
    }
    // O(h^2) agreement for h in {1e-3, 1e-4}.
    for (double h : {1e-3, 1e-4}) {
      for (int k = 0; k < n; ++k) {
        Vector xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        const double fd =
            (cost_local(LocalCoords(xp), LocalCoords(y)) - cost_local(LocalCoords(xm), LocalCoords(y))) / (2 * h);
        EXPECT_LE(std::abs(g(k) - fd), 10 * h * h);
      }
    }
  }
}

TEST(CrossDerivative, CoincidenceGivesMinusTwoIdentity) {
  std::mt19937_64 rng(13);
  for (int n : {1, 2, 3}) {
    const auto x = random_sphere_point(n, rng);
    const Matrix m = cross_derivative_frame(x, x, 1e-3);
    EXPECT_LE((m + 2.0 * Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_NEAR(std::abs(m.determinant()), std::pow(2.0, n), 1e-4);
    const Matrix r = cross_derivative_frame(x, x, 1e-3, true);
    EXPECT_LE((r + 2.0 * Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(CrossDerivative, DeterminantDecaysTowardBoundary) {
  std::mt19937_64 rng(17);
  const auto x = random_sphere_point(2, rng);
  const Vector dir = Chart(x).frame().col(0);
  double prev = std::numeric_limits<double>::infinity();
  for (int deg = 1; deg < 90; deg += 4) {
    const auto y = geodesic_point(x, dir, deg * M_PI / 180.0);
    const double det = std::abs(cross_derivative_frame(x, y).determinant());
    EXPECT_LT(det, prev);
    // |det| = 2^n x.y for this cost.
    EXPECT_NEAR(det, 4.0 * x.dot(y), 1e-6);
    prev = det;
  }
  const auto y = geodesic_point(x, dir, std::acos(0.01));
  EXPECT_LT(std::abs(cross_derivative_frame(x, y).determinant()), 0.1 * 4.0);
}

TEST(CrossDerivative, RejectsPairsOutsideN) {
  const auto x = pt({0, 0, 1});
  EXPECT_THROW(cross_derivative_frame(x, pt({1, 0, 0})), DomainError);
  EXPECT_THROW(cross_derivative_frame(x, pt({0.6, 0, -0.8})), DomainError);
  EXPECT_THROW(cross_derivative_frame(x, x, 0.0), DomainError);
  EXPECT_THROW(cross_derivative_frame(x, x, 0.7), DomainError);
}

TEST(InN, Examples) {
  const auto x = pt({1, 0, 0});
  EXPECT_TRUE(in_N(x, x));
  EXPECT_FALSE(in_N(x, pt({0, 1, 0})));
  EXPECT_FALSE(in_N(x, pt({-1, 0, 0})));
}

TEST(SphereArea, KnownValues) {
  EXPECT_NEAR(sphere_area(1), 2 * M_PI, 1e-12);
  EXPECT_NEAR(sphere_area(2), 4 * M_PI, 1e-12);
  EXPECT_NEAR(sphere_area(3), 2 * M_PI * M_PI, 1e-12);
}
