#include "equiorb/errors.hpp"
#include "equiorb/nbody.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace equiorb;

namespace {

Configuration config(std::initializer_list<std::initializer_list<double>> bodies) {
  const auto n = static_cast<Eigen::Index>(bodies.size());
  const auto d = static_cast<Eigen::Index>(bodies.begin()->size());
  Configuration q(d, n);
  Eigen::Index j = 0;
  for (const auto& b : bodies) {
    Eigen::Index c = 0;
    for (double x : b) q(c++, j) = x;
    ++j;
  }
  return q;
}

Configuration random_config(int n, int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Configuration q(d, n);
  for (int j = 0; j < n; ++j)
    for (int c = 0; c < d; ++c) q(c, j) = u(rng) + 3.0 * j;
  return q;
}

}  // namespace

TEST(MassSystem, NormalizesMasses) {
  MassSystem sys(3, 2, {2.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(sys.mass(0), 0.5);
  EXPECT_DOUBLE_EQ(sys.mass(1), 0.25);
  EXPECT_EQ(sys.raw_masses()[0], 2.0);
  EXPECT_EQ(sys.dim(), 6);
}

TEST(MassSystem, RejectsBadInput) {
  EXPECT_THROW(MassSystem(2, 2, {1.0}), ShapeError);
  EXPECT_THROW(MassSystem(2, 2, {1.0, -1.0}), Error);
  EXPECT_THROW(MassSystem(2, 2, {1.0, 1.0}, 0.0), Error);
}

TEST(MassInner, Examples) {
  const auto sys1 = MassSystem::equal_masses(2, 1);
  EXPECT_DOUBLE_EQ(mass_inner(config({{1}, {1}}), config({{1}, {1}}), sys1), 1.0);
  EXPECT_DOUBLE_EQ(mass_inner(Configuration::Zero(1, 2), config({{1}, {1}}), sys1), 0.0);
  const auto sys2 = MassSystem::equal_masses(2, 2);
  EXPECT_DOUBLE_EQ(mass_inner(config({{2, 0}, {0, 0}}), config({{3, 0}, {5, 7}}), sys2), 3.0);
}

TEST(MassInner, ShapeMismatchThrows) {
  const auto sys = MassSystem::equal_masses(2, 2);
  EXPECT_THROW(mass_inner(Configuration::Zero(2, 3), Configuration::Zero(2, 3), sys), ShapeError);
}

TEST(Potential, Examples) {
  const auto sys2 = MassSystem::equal_masses(2, 2);
  EXPECT_DOUBLE_EQ(potential(config({{1, 0}, {-1, 0}}), sys2), 0.125);
  const auto sys3 = MassSystem::equal_masses(3, 1);
  EXPECT_NEAR(potential(config({{-1}, {0}, {1}}), sys3), 5.0 / 18.0, 1e-15);
}

TEST(Potential, CollisionThrows) {
  const auto sys = MassSystem::equal_masses(2, 2);
  EXPECT_THROW(potential(config({{1, 1}, {1, 1}}), sys), CollisionError);
}

TEST(GradPotential, TwoBodyExample) {
  const auto sys = MassSystem::equal_masses(2, 2);
  const TangentVector g = grad_potential_mass(config({{1, 0}, {-1, 0}}), sys);
  EXPECT_NEAR(g(0, 0), -0.125, 1e-15);
  EXPECT_NEAR(g(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(g(0, 1), 0.125, 1e-15);
  EXPECT_NEAR(g(1, 1), 0.0, 1e-15);
}

// dU[v] = <grad_M U, v>_M, so (grad_M U)_j = (1/m_j) dU/dq_j.
TEST(GradPotential, MatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 3;
    const int d = 1 + trial % 3;
    std::vector<double> m(static_cast<std::size_t>(n));
    for (auto& x : m) x = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
    const double alpha = trial % 2 ? 1.0 : 1.7;
    MassSystem sys(n, d, m, alpha);
    const Configuration q = random_config(n, d, rng);
    const TangentVector g = grad_potential_mass(q, sys);
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < d; ++c) {
        Configuration qp = q, qm = q;
        qp(c, j) += h;
        qm(c, j) -= h;
        const double fd = (potential(qp, sys) - potential(qm, sys)) / (2 * h) / sys.mass(j);
        EXPECT_NEAR(g(c, j), fd, 1e-5 * std::max(1.0, std::abs(fd)));
      }
  }
}

TEST(GradPotential, TranslationInvarianceAndHomogeneity) {
  std::mt19937_64 rng(11);
  for (double alpha : {1.0, 2.0}) {
    MassSystem sys(4, 3, {1, 2, 3, 4}, alpha);
    const Configuration q = random_config(4, 3, rng);
    const TangentVector g = grad_potential_mass(q, sys);
    Eigen::Vector3d total = Eigen::Vector3d::Zero();
    for (int j = 0; j < 4; ++j) total += sys.mass(j) * g.col(j);
    EXPECT_LT(total.norm(), 1e-14);
    const double lambda = 1.7;
    const TangentVector gs = grad_potential_mass(lambda * q, sys);
    EXPECT_LT((gs - std::pow(lambda, -alpha - 1) * g).norm(), 1e-13 * g.norm());
  }
}

TEST(NewtonResidual, ZeroForExactAcceleration) {
  const auto sys = MassSystem::equal_masses(3, 2);
  std::mt19937_64 rng(3);
  const Configuration q = random_config(3, 2, rng);
  EXPECT_EQ(newton_residual(q, grad_potential_mass(q, sys), sys), 0.0);
}

// Circular orbit of two equal masses 1/2 at distance 2R: each body moves on
// radius R with |q''| = omega^2 R and the attraction is m / (2R)^2.
TEST(NewtonResidual, AnalyticCircularOrbit) {
  const auto sys = MassSystem::equal_masses(2, 2);
  const double R = 0.7;
  const double omega = std::sqrt(0.5 / (4 * R * R * R));
  for (double t : {0.0, 0.3, 1.1, 2.5}) {
    const double c = std::cos(omega * t), s = std::sin(omega * t);
    const Configuration q = config({{R * c, R * s}, {-R * c, -R * s}});
    const Configuration acc = -omega * omega * q;
    EXPECT_LT(newton_residual(q, acc, sys), 1e-8);
  }
}

TEST(NewtonResidual, ZeroAccelerationGivesGradientNorm) {
  const auto sys = MassSystem::equal_masses(2, 2);
  const Configuration q = config({{1, 0}, {-1, 0}});
  const double r = newton_residual(q, Configuration::Zero(2, 2), sys);
  EXPECT_NEAR(r, 0.125, 1e-15);  // sqrt(1/2 (1/8)^2 + 1/2 (1/8)^2)
  EXPECT_GT(r, 0.0);
}

TEST(Distances, MinAndMean) {
  const Configuration q = config({{0, 0}, {3, 4}, {0, 1}});
  EXPECT_DOUBLE_EQ(min_mutual_distance(q), 1.0);
  EXPECT_NEAR(mean_mutual_distance(q), (5.0 + 1.0 + std::sqrt(18.0)) / 3.0, 1e-15);
}
