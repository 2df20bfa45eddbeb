#include "equiorb/errors.hpp"
#include "equiorb/kernels.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace equiorb;

namespace {

void expect_close(const kernels::PotentialSums& a, const kernels::PotentialSums& b) {
  EXPECT_NEAR(static_cast<double>(a.value), static_cast<double>(b.value),
              1e-13 * std::abs(static_cast<double>(a.value)));
  EXPECT_EQ(a.min_distance, b.min_distance);
  ASSERT_EQ(a.gradient.size(), b.gradient.size());
  EXPECT_LT((a.gradient - b.gradient).norm(), 1e-13 * (1.0 + a.gradient.norm()));
}

}  // namespace

TEST(Kernels, ParallelMatchesSerial) {
  std::mt19937_64 rng(21);
  for (const char* name : {"figure_eight", "choreography3", "brake"}) {
    const auto g = test_support::bundled(name).group;
    const FourierPath p = test_support::smooth_symmetric_path(g, 12, rng);
    const auto table = TrigTable::get(12, 256);
    expect_close(kernels::potential_serial(p, *table, true),
                 kernels::potential_omp(p, *table, true));
    const auto no_grad = kernels::potential_omp(p, *table, false);
    EXPECT_EQ(no_grad.gradient.size(), 0);
  }
}

TEST(Kernels, NonNewtonianExponent) {
  std::mt19937_64 rng(22);
  auto g = std::make_shared<const SymmetryGroup>(
      close_group(MassSystem(3, 3, {1, 2, 3}, 2.0), {}));
  FourierPath p(g, 5);
  p.coeffs() = test_support::uniform_vector(p.coeffs().size(), rng, 0.2);
  for (int j = 0; j < 3; ++j) {
    p.block(0)(0, j) += j;
    p.block(6)(1, j) += j;
  }
  const auto table = TrigTable::get(5, 40);
  expect_close(kernels::potential_serial(p, *table, true),
               kernels::potential_omp(p, *table, true));
}

TEST(Kernels, BitIdenticalAcrossThreadCounts) {
  std::mt19937_64 rng(23);
  const auto g = test_support::bundled("figure_eight").group;
  const FourierPath p = test_support::smooth_symmetric_path(g, 12, rng);
  const auto table = TrigTable::get(12, 256);
  const int saved = kernels::num_threads();
  kernels::set_num_threads(1);
  const auto one = kernels::potential_omp(p, *table, true);
  kernels::set_num_threads(4);
  const auto four = kernels::potential_omp(p, *table, true);
  kernels::set_num_threads(saved);
  EXPECT_EQ(one.value, four.value);
  EXPECT_EQ(one.min_distance, four.min_distance);
  EXPECT_EQ(one.gradient, four.gradient);
}

TEST(Kernels, CollisionReportsFirstSample) {
  auto g = std::make_shared<const SymmetryGroup>(close_group(MassSystem::equal_masses(2, 1), {}));
  FourierPath p(g, 1);
  p.block(0) << -1, 1;
  p.block(2) << 1, -1;
  const auto table = TrigTable::get(1, 8);
  for (auto* fn : {&kernels::potential_serial, &kernels::potential_omp}) {
    try {
      fn(p, *table, true);
      FAIL();
    } catch (const CollisionError& e) {
      EXPECT_EQ(e.sample(), std::optional<std::size_t>(4));
    }
  }
}
