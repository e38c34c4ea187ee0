#include <gtest/gtest.h>

#include <random>

#include "sphereot/mtw.hpp"

using namespace sphereot;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector c(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) c(k++) = x;
  return c;
}

SpherePoint pt(std::initializer_list<double> v) { return SpherePoint::normalized(vec(v)); }

double deg(double d) { return d * M_PI / 180.0; }

}  // namespace

TEST(Twist, ImagesAreTwiceChartCoordinates) {
  std::mt19937_64 rng(1);
  const auto x = random_sphere_point(2, rng);
  std::vector<SpherePoint> ys;
  for (int k = 0; k < 50; ++k) ys.push_back(random_partner(x, 0.01, 1.0, rng));
  const auto images = twist_images(x, ys);
  const Chart chart(x);
  for (std::size_t k = 0; k < ys.size(); ++k)
    EXPECT_LE((images[k] - 2.0 * chart_project(chart, ys[k]).values).norm(), 1e-10);
}

TEST(Twist, MarginExamples) {
  const auto x = pt({0, 0, 1});
  const auto two = twist_margin(x, {pt({0.6, 0, 0.8}), pt({0, 0.6, 0.8})});
  EXPECT_GT(two.min_margin, 0.0);
  EXPECT_FALSE(two.flagged);
  EXPECT_NEAR(two.min_margin, 2.0, 1e-10);
  EXPECT_TRUE(two.pass());

  const auto dup = twist_margin(x, {pt({0.6, 0, 0.8}), pt({0.6, 0, 0.8}), pt({0, 0.6, 0.8})});
  EXPECT_EQ(dup.min_margin, 0.0);
  EXPECT_TRUE(dup.flagged);
  EXPECT_FALSE(dup.pass());

  EXPECT_THROW(twist_margin(x, {pt({0.6, 0, 0.8}), pt({1, 0, 0})}), DomainError);
  EXPECT_THROW(twist_margin(x, {pt({0.6, 0, 0.8})}), InsufficientData);
}

TEST(Twist, RatioIsTwoInEveryDimension) {
  std::mt19937_64 rng(2);
  for (int n : {1, 2, 3, 4}) {
    const auto x = random_sphere_point(n, rng);
    std::vector<SpherePoint> ys;
    for (int k = 0; k < 100; ++k) ys.push_back(random_partner(x, 0.01, 1.0, rng));
    EXPECT_NEAR(twist_margin(x, ys).min_margin, 2.0, 1e-10) << "n = " << n;
  }
}

TEST(Nondegeneracy, ProfileExamples) {
  std::mt19937_64 rng(3);
  const auto x = random_sphere_point(2, rng);
  const auto near0 = nondegeneracy_profile(x, {deg(0.01)});
  EXPECT_NEAR(near0[0].second, 4.0, 0.01);

  const auto prof = nondegeneracy_profile(x, {deg(10), deg(30), deg(50), deg(70), deg(85)});
  for (std::size_t k = 1; k < prof.size(); ++k) EXPECT_LT(prof[k].second, prof[k - 1].second);
  for (const auto& [a, d] : prof) EXPECT_NEAR(d, 4.0 * a, 1e-6);

  const auto edge = nondegeneracy_profile(x, {deg(89.9)});
  EXPECT_LT(edge[0].second, 0.05 * 4.0);
  EXPECT_GT(edge[0].second, 0.0);

  EXPECT_THROW(nondegeneracy_profile(x, {deg(90)}), DomainError);
  EXPECT_THROW(nondegeneracy_profile(x, {0.0}), DomainError);
}

TEST(Nondegeneracy, DecayAlongRays) {
  std::mt19937_64 rng(4);
  for (int n : {1, 2, 3}) {
    const auto x = random_sphere_point(n, rng);
    const auto prof = nondegeneracy_profile(x, {std::acos(0.5), std::acos(0.01)});
    EXPECT_LT(prof[1].second, prof[0].second);
    EXPECT_NEAR(prof[0].second, std::pow(2.0, n) * 0.5, 1e-6);
  }
}

TEST(CrossCurvature, DegenerateDirectionsGiveZero) {
  const auto x = pt({0, 0, 1});
  const auto y = pt({0.6, 0, 0.8});
  EXPECT_EQ(cross_curvature(x, y, Vector::Zero(2), vec({1, 0})), 0.0);
  EXPECT_EQ(cross_curvature(x, y, vec({1, 0}), Vector::Zero(2)), 0.0);
}

TEST(CrossCurvature, NonNullPairIsRejected) {
  const auto x = pt({0, 0, 1});
  const auto y = pt({0.6, 0, 0.8});
  EXPECT_THROW(cross_curvature(x, y, vec({1, 0}), vec({1, 0})), NullityError);
  EXPECT_NO_THROW(cross_curvature(x, y, vec({1, 0}), vec({1, 0}), 1e-2, false));
  EXPECT_THROW(cross_curvature(x, pt({1, 0, 0.05}), vec({1, 0}), vec({0, 1})), DomainError);
}

TEST(CrossCurvature, NullPartnerIsNull) {
  std::mt19937_64 rng(5);
  for (int n : {2, 3}) {
    for (int t = 0; t < 100; ++t) {
      const auto x = random_sphere_point(n, rng);
      const auto y = random_partner(x, 0.1, 1.0, rng);
      const Vector p = random_unit(n, rng);
      const Vector pbar = null_partner(x, y, p, rng);
      EXPECT_NEAR(pbar.norm(), 1.0, 1e-12);
      EXPECT_LE(std::abs(null_form(x, y, p, pbar)), kNullTolerance);
    }
  }
  const auto x1 = pt({1, 0});
  EXPECT_THROW(null_partner(x1, x1, vec({1}), rng), DomainError);
}

TEST(CrossCurvature, PositiveOnRandomNullPairs) {
  std::mt19937_64 rng(6);
  for (int n : {2, 3}) {
    double worst = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 1000; ++t) {
      const auto x = random_sphere_point(n, rng);
      const auto y = random_partner(x, 0.3, 1.0, rng);
      const Vector p = random_unit(n, rng);
      worst = std::min(worst, cross_curvature(x, y, p, null_partner(x, y, p, rng)));
    }
    EXPECT_GT(worst, 0.0) << "n = " << n;
  }
}

// Positive down to x.y = 0.1 and smaller near the boundary than at the centre.
TEST(CrossCurvature, ShrinksTowardBoundary) {
  std::mt19937_64 rng(7);
  double low_max = 0.0, high_min = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 400; ++t) {
    const auto x = random_sphere_point(2, rng);
    const bool low = t % 2 == 0;
    const auto y = low ? random_partner(x, 0.11, 0.2, rng) : random_partner(x, 0.8, 1.0, rng);
    const Vector p = random_unit(2, rng);
    const double v = cross_curvature(x, y, p, null_partner(x, y, p, rng));
    EXPECT_GT(v, 0.0);
    if (low)
      low_max = std::max(low_max, v);
    else
      high_min = std::min(high_min, v);
  }
  EXPECT_LT(low_max, high_min);
}

TEST(CrossCurvature, StencilConvergesAtSecondOrder) {
  std::mt19937_64 rng(8);
  const auto x = random_sphere_point(2, rng);
  const auto y = random_partner(x, 0.6, 0.7, rng);
  const Vector p = random_unit(2, rng);
  const Vector pbar = null_partner(x, y, p, rng);
  const double a = cross_curvature(x, y, p, pbar, 4e-2);
  const double b = cross_curvature(x, y, p, pbar, 2e-2);
  const double c = cross_curvature(x, y, p, pbar, 1e-2);
  // Successive differences shrink by about 4 when h is halved.
  const double ratio = std::abs(a - b) / std::abs(b - c);
  EXPECT_GT(ratio, 3.0);
  EXPECT_LT(ratio, 5.0);
  EXPECT_LT(std::abs(b - c), 1e-2 * std::abs(c));
}

TEST(Biconvexity, Examples) {
  const auto x0 = pt({0, 0, 1});
  const auto y0 = pt({0.6, 0, 0.8});
  const auto y1 = pt({-0.6, 0, 0.8});
  const auto w0 = biconvexity_witness(x0, y0, y1, 0.0);
  EXPECT_LE((w0.point.coords() - y0.coords()).norm(), 1e-12);
  const auto mid = biconvexity_witness(x0, y0, y1, 0.5);
  EXPECT_LE((mid.point.coords() - x0.coords()).norm(), 1e-12);
  EXPECT_LE(mid.residual, kBiconvexityTolerance);
  EXPECT_THROW(biconvexity_witness(x0, y0, pt({1, 0, 0}), 0.5), DomainError);
  EXPECT_THROW(biconvexity_witness(x0, y0, y1, 1.5), DomainError);
}

TEST(Biconvexity, RandomWitnessesAreExact) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int n : {1, 2, 3}) {
    for (int t = 0; t < 200; ++t) {
      const auto x0 = random_sphere_point(n, rng);
      const auto y0 = random_partner(x0, 0.05, 1.0, rng);
      const auto y1 = random_partner(x0, 0.05, 1.0, rng);
      const auto x1 = random_partner(y0, 0.05, 1.0, rng);
      const double theta = unit(rng);
      const auto v = biconvexity_witness(x0, y0, y1, theta);
      EXPECT_LE(v.residual, kBiconvexityTolerance);
      EXPECT_GT(x0.dot(v.point), 0.0);
      EXPECT_LE(horizontal_biconvexity_witness(y0, x0, x1, theta).residual, kBiconvexityTolerance);
    }
  }
}

TEST(Suite, AllConditionsPass) {
  for (int n : {1, 2, 3}) {
    MtwSuiteConfig cfg;
    cfg.n = n;
    cfg.null_pairs = 300;
    const auto reports = run_mtw_suite(cfg);
    ASSERT_EQ(reports.size(), 4u);
    for (const auto& r : reports) EXPECT_TRUE(r.pass()) << to_string(r.condition) << " n = " << n;
    EXPECT_NEAR(reports[0].min_margin, 2.0, 1e-10);
    EXPECT_EQ(reports[2].vacuous, n == 1);
    if (n > 1) EXPECT_EQ(reports[2].rows.size(), 300u);
  }
  MtwSuiteConfig bad;
  bad.n = 0;
  EXPECT_THROW(run_mtw_suite(bad), ConfigError);
}
