#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "sphereot/measure.hpp"

using namespace sphereot;

namespace {
double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }
}  // namespace

TEST(Mesh, CircleExample) {
  const Mesh m = quasi_uniform_mesh(1, 4, 0);
  ASSERT_EQ(m.size(), 4u);
  for (double a : m.cell_areas) EXPECT_NEAR(a, M_PI / 2, 1e-12);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(m.points[i].dot(m.points[(i + 1) % 4]), 0.0, 1e-12);
}

TEST(Mesh, TooFewPointsIsConfigError) {
  EXPECT_THROW(quasi_uniform_mesh(2, 2, 0), ConfigError);
  EXPECT_THROW(quasi_uniform_mesh(2, 3, 0), ConfigError);
  EXPECT_THROW(quasi_uniform_mesh(0, 10, 0), ConfigError);
  EXPECT_NO_THROW(quasi_uniform_mesh(2, 4, 0));
}

TEST(Mesh, AreasSumToSphereArea) {
  for (int n : {1, 2, 3}) {
    const Mesh m = quasi_uniform_mesh(n, 120, 1);
    EXPECT_NEAR(sum(m.cell_areas), sphere_area(n), 0.01 * sphere_area(n));
    for (const auto& p : m.points) EXPECT_NEAR(p.coords().norm(), 1.0, 1e-12);
    EXPECT_GT(m.spacing, 0.0);
  }
}

TEST(Mesh, IsDeterministicPerSeed) {
  for (int n : {1, 2, 3}) {
    const Mesh a = quasi_uniform_mesh(n, 60, 42), b = quasi_uniform_mesh(n, 60, 42), c = quasi_uniform_mesh(n, 60, 43);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a.points[i].coords(), b.points[i].coords());
      EXPECT_EQ(a.cell_areas[i], b.cell_areas[i]);
    }
    EXPECT_NE(a.points[0].coords(), c.points[0].coords());
  }
}

// Voronoi cells of the n = 2 spiral, estimated independently by Monte Carlo,
// stay within +-25% of 4 pi / 500.
TEST(Mesh, SpiralVoronoiCellsAreNearlyEqual) {
  const Mesh m = quasi_uniform_mesh(2, 500, 0);
  std::mt19937_64 rng(99);
  const auto areas = detail::monte_carlo_cell_areas(2, m.points, 1'000'000, rng);
  const double nominal = 4 * M_PI / 500;
  const auto [lo, hi] = std::minmax_element(areas.begin(), areas.end());
  EXPECT_GE(*lo, 0.75 * nominal);
  EXPECT_LE(*hi, 1.25 * nominal);
  for (double a : m.cell_areas) EXPECT_NEAR(a, nominal, 1e-15);
}

TEST(Mesh, HigherDimensionCellsAreReasonable) {
  const Mesh m = quasi_uniform_mesh(3, 200, 2);
  const double nominal = sphere_area(3) / 200;
  for (double a : m.cell_areas) {
    EXPECT_GT(a, 0.3 * nominal);
    EXPECT_LT(a, 3.0 * nominal);
  }
}

TEST(DiscreteMeasure, ValidatesInvariants) {
  const auto p = SpherePoint::axis(3, 0), q = SpherePoint::axis(3, 1);
  EXPECT_NO_THROW(DiscreteMeasure(2, {p, q}, {0.5, 0.5}, {1.0, 1.0}));
  EXPECT_THROW(DiscreteMeasure(2, {p, q}, {0.5, 0.6}, {1.0, 1.0}), DomainError);
  EXPECT_THROW(DiscreteMeasure(2, {p, q}, {1.5, -0.5}, {1.0, 1.0}), DomainError);
  EXPECT_THROW(DiscreteMeasure(2, {p, q}, {0.5, 0.5}, {1.0, 0.0}), DomainError);
  EXPECT_THROW(DiscreteMeasure(2, {p, q}, {1.0}, {1.0, 1.0}), DomainError);
  EXPECT_THROW(DiscreteMeasure(1, {p, q}, {0.5, 0.5}, {1.0, 1.0}), DomainError);
  EXPECT_THROW(DiscreteMeasure(2, {}, {}, {}), DomainError);
  EXPECT_NEAR(make_measure(2, {p, q}, {3.0, 1.0}).weight(0), 0.75, 1e-15);
}

TEST(SampleDensity, ConstantDensityFollowsCellAreas) {
  const Mesh m = quasi_uniform_mesh(3, 80, 5);
  const auto mu = sample_density(builtin_density("uniform"), m);
  const double total = sum(m.cell_areas);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(mu.weight(i), m.cell_areas[i] / total, 1e-15);
  EXPECT_NEAR(mu.total_mass(), 1.0, 1e-12);
}

TEST(SampleDensity, ScaleInvariant) {
  const Mesh m = quasi_uniform_mesh(2, 200, 1);
  const Density d = builtin_density("cap:0.7");
  const auto a = sample_density(d, m);
  const auto b = sample_density([&](const SpherePoint& p) { return 2.0 * d(p); }, m);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(a.weight(i), b.weight(i), 1e-16);
}

TEST(SampleDensity, CapDensityRatio) {
  const Mesh m = quasi_uniform_mesh(2, 500, 0);
  const Density d = [](const SpherePoint& p) { return 0.2 + 3.0 * std::pow(std::max(0.0, p(2)), 4); };
  const auto mu = sample_density(d, m);
  EXPECT_NEAR(mu.total_mass(), 1.0, 1e-12);
  std::size_t imax = 0, imin = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu.weight(i) > mu.weight(imax)) imax = i;
    if (mu.weight(i) < mu.weight(imin)) imin = i;
  }
  const double expected = d(m.points[imax]) * m.cell_areas[imax] / (d(m.points[imin]) * m.cell_areas[imin]);
  EXPECT_NEAR(mu.weight(imax) / mu.weight(imin), expected, 0.05 * expected);
}

TEST(SampleDensity, RejectsNonPositiveDensity) {
  const Mesh m = quasi_uniform_mesh(2, 50, 0);
  EXPECT_THROW(sample_density([](const SpherePoint& p) { return p(2); }, m), DomainError);
  EXPECT_THROW(sample_density([](const SpherePoint&) { return 0.0; }, m), DomainError);
}

TEST(BuiltinDensity, ParsesSpecs) {
  const auto pole = SpherePoint::axis(3, 2), eq = SpherePoint::axis(3, 0);
  EXPECT_DOUBLE_EQ(builtin_density("cap:0.5")(pole), 0.5 + 5.0);
  EXPECT_DOUBLE_EQ(builtin_density("cap:0.5")(eq), 0.5);
  EXPECT_DOUBLE_EQ(builtin_density("band:0.5")(eq), 0.5 + 1.5);
  EXPECT_DOUBLE_EQ(builtin_density("band:0.5")(pole), 0.5);
  EXPECT_THROW(builtin_density("cap:1"), ConfigError);
  EXPECT_THROW(builtin_density("cap:-0.1"), ConfigError);
  EXPECT_THROW(builtin_density("cap:x"), ConfigError);
  EXPECT_THROW(builtin_density("ring:0.5"), ConfigError);
  EXPECT_THROW(builtin_density("cap"), ConfigError);
}

TEST(Suitability, UniformPairPasses) {
  const Mesh m = quasi_uniform_mesh(2, 200, 0);
  const auto mu = sample_density(builtin_density("uniform"), m);
  const auto cert = check_suitable(mu, mu, 0.5 / sphere_area(2), true);
  EXPECT_TRUE(cert.ok());
  EXPECT_TRUE(cert.worst_atoms.empty());
}

TEST(Suitability, ZeroWeightTargetAtomFailsLowerBound) {
  const Mesh m = quasi_uniform_mesh(2, 50, 0);
  std::vector<double> w(50, 1.0);
  w[7] = 0.0;
  const auto nu = make_measure(2, m.points, w, m.cell_areas);
  const auto mu = sample_density(builtin_density("uniform"), m);
  const auto cert = check_suitable(mu, nu, default_epsilon(2), false);
  EXPECT_TRUE(cert.upper_ok);
  EXPECT_FALSE(cert.lower_ok);
  ASSERT_EQ(cert.worst_atoms.size(), 1u);
  EXPECT_EQ(cert.worst_atoms[0], (AtomRef{Side::Target, 7}));
}

// One atom with half of the mass on a 500-atom mesh has density
// 0.5 / (4 pi / 500) ~ 19.9: within 1/eps at eps = 0.01, out of bounds at 0.1.
TEST(Suitability, HeavyAtomUpperBound) {
  const Mesh m = quasi_uniform_mesh(2, 500, 0);
  std::vector<double> w(500, 0.5 / 499);
  w[0] = 0.5;
  const auto mu = make_measure(2, m.points, w, m.cell_areas);
  const auto nu = sample_density(builtin_density("uniform"), m);
  EXPECT_NEAR(mu.density(0), 0.5 / (4 * M_PI / 500), 1e-9);
  EXPECT_TRUE(check_suitable(mu, nu, 0.01, false).upper_ok);
  const auto cert = check_suitable(mu, nu, 0.1, false);
  EXPECT_FALSE(cert.upper_ok);
  EXPECT_EQ(cert.worst_atoms[0], (AtomRef{Side::Source, 0}));
}

TEST(Suitability, MonotoneInEpsilon) {
  const Mesh m = quasi_uniform_mesh(2, 300, 3);
  const auto mu = sample_density(builtin_density("cap:0.9"), m);
  const auto nu = sample_density(builtin_density("band:0.8"), m);
  double first_ok = 0.0;
  for (double eps = 1.0; eps > 1e-4 && first_ok == 0.0; eps *= 0.7)
    if (check_suitable(mu, nu, eps, true).ok()) first_ok = eps;
  ASSERT_GT(first_ok, 0.0);
  for (double smaller = first_ok; smaller > 1e-4; smaller *= 0.5) EXPECT_TRUE(check_suitable(mu, nu, smaller, true).ok());
  EXPECT_TRUE(check_suitable(mu, nu, default_epsilon(2), true).ok());
}

TEST(Suitability, DimensionMismatchAndBadEpsilon) {
  const auto a = sample_density(builtin_density("uniform"), quasi_uniform_mesh(2, 20, 0));
  const auto b = sample_density(builtin_density("uniform"), quasi_uniform_mesh(1, 20, 0));
  EXPECT_THROW(check_suitable(a, b, 0.01, false), DomainError);
  EXPECT_THROW(check_suitable(a, a, 0.0, false), DomainError);
}
