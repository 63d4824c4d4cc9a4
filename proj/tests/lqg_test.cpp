#include "ratecost/lqg.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ratecost/error.hpp"
#include "ratecost/rng.hpp"

namespace ratecost {
namespace {

ScalarLqgSpec Spec(double a, double b, double q, double r, double noise = 1.0) {
  return {a, b, noise, q, r};
}

// The closed form written out independently of the library.
double RateOracle(double a, double noise, double m, double d_min, double level) {
  if (a == 0.0) return 0.0;
  const double v = std::log(std::abs(a)) / std::log(2.0) +
                   0.5 * std::log(1.0 + noise * m / (level - d_min)) / std::log(2.0);
  return std::max(0.0, v);
}

TEST(RiccatiSolve, MemorylessPlant) {
  for (double q : {0.0, 0.5, 2.0}) {
    for (double r : {0.0, 1.0}) {
      const auto spec = Spec(0.0, 1.5, q, r, 3.0);
      const auto d = riccati_solve(spec);
      EXPECT_EQ(d.s, q);
      EXPECT_NEAR(d.m, q == 0.0 ? 0.0 : 2.25 * q * q / (r + 2.25 * q), 1e-15);
      EXPECT_EQ(d.d_min, 3.0 * q);
    }
  }
}

TEST(RiccatiSolve, WorkedUnstablePlant) {
  const auto spec = Spec(2.0, 1.0, 1.0, 0.0, 1.0);
  const auto d = riccati_solve(spec);
  EXPECT_DOUBLE_EQ(oracle::riccati_fixed_point(2.0, 1.0, 1.0, 0.0), 1.0);
  EXPECT_NEAR(d.s, 1.0, 1e-15);
  EXPECT_NEAR(d.m, 1.0, 1e-15);
  EXPECT_NEAR(d.d_min, 1.0, 1e-15);
  EXPECT_LE(d.residual, 1e-15);
  const auto noisy = riccati_solve(Spec(2.0, 1.0, 1.0, 0.0, 2.5));
  EXPECT_NEAR(noisy.d_min, 2.5, 1e-15);
}

TEST(RiccatiSolve, ZeroStateCostOnAStablePlant) {
  for (double a : {-0.9, -0.3, 0.0, 0.5, 0.99}) {
    const auto d = riccati_solve(Spec(a, 0.7, 0.0, 2.0));
    EXPECT_EQ(d.s, 0.0) << a;
    EXPECT_EQ(d.d_min, 0.0);
  }
  // Unstable plants still pay to hold the state when control is costly.
  const auto d = riccati_solve(Spec(2.0, 1.0, 0.0, 1.0));
  EXPECT_NEAR(d.s, 3.0, 1e-12);
  EXPECT_LE(riccati_residual(Spec(2.0, 1.0, 0.0, 1.0), d.s), 1e-12);
}

TEST(RiccatiSolve, RandomSpecsHaveTinyResiduals) {
  Rng rng(70);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto spec = Spec(-3.0 + 6.0 * rng.uniform(), 0.1 + 2.9 * rng.uniform(),
                           5.0 * rng.uniform(), 5.0 * rng.uniform(),
                           0.1 + 3.9 * rng.uniform());
    const auto d = riccati_solve(spec);
    ASSERT_LE(d.residual, 1e-10) << "trial " << trial;
    EXPECT_EQ(d.residual, riccati_residual(spec, d.s));
    EXPECT_GE(d.s, 0.0);
    EXPECT_GE(d.d_min, 0.0);
    const double fixed = oracle::riccati_fixed_point(spec.a, spec.b, spec.q, spec.r);
    EXPECT_NEAR(d.s, fixed, 1e-8 * std::max(1.0, fixed)) << "trial " << trial;
  }
}

TEST(RiccatiSolve, UncontrolledPlant) {
  const auto d = riccati_solve(Spec(0.5, 0.0, 3.0, 1.0, 2.0));
  EXPECT_NEAR(d.s, 4.0, 1e-15);
  EXPECT_EQ(d.m, 0.0);
  EXPECT_NEAR(d.d_min, 8.0, 1e-14);
  EXPECT_THROW(riccati_solve(Spec(1.5, 0.0, 3.0, 1.0)), SpecError);
}

TEST(RiccatiSolve, RejectsInvalidSpecs) {
  EXPECT_THROW(riccati_solve(Spec(1.0, 1.0, 1.0, 0.0, 0.0)), SpecError);
  EXPECT_THROW(riccati_solve(Spec(1.0, 1.0, -1.0, 0.0)), SpecError);
  EXPECT_THROW(riccati_solve(Spec(1.0, 1.0, 1.0, -1.0)), SpecError);
  EXPECT_THROW(riccati_solve(Spec(1.0, 0.0, 1.0, 0.0)), SpecError);
  EXPECT_THROW(riccati_solve(Spec(NAN, 1.0, 1.0, 0.0)), SpecError);
}

TEST(LqgRate, WorkedPointIsOneAndAHalfBits) {
  const auto spec = Spec(2.0, 1.0, 1.0, 0.0, 1.0);
  const auto d = riccati_solve(spec);
  EXPECT_NEAR(lqg_rate(spec, d, 2.0), 1.5, 1e-12);
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(1.0 + 0.37 * i);
  const auto curve = f_curve(spec, d, grid);
  ASSERT_EQ(curve.size(), grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(curve[i].first, grid[i]);
    EXPECT_NEAR(curve[i].second, RateOracle(2.0, 1.0, 1.0, 1.0, grid[i]), 1e-12);
  }
}

TEST(LqgRate, MemorylessPlantNeedsNoBits) {
  const auto spec = Spec(0.0, 1.0, 1.0, 0.5);
  const auto d = riccati_solve(spec);
  for (double level : {1.0001, 2.0, 1e3}) EXPECT_EQ(lqg_rate(spec, d, level), 0.0);
}

TEST(LqgRate, CurveIsMonotoneConvexAndTendsToTheInstabilityFloor) {
  Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    const auto spec = Spec(-3.0 + 6.0 * rng.uniform(), 0.1 + 2.9 * rng.uniform(),
                           5.0 * rng.uniform(), 5.0 * rng.uniform(),
                           0.1 + 3.9 * rng.uniform());
    const auto d = riccati_solve(spec);
    std::vector<double> grid;
    for (int i = 0; i < 200; ++i) grid.push_back(d.d_min + 1e-3 * std::pow(1.08, i));
    const auto curve = f_curve(spec, d, grid);
    for (std::size_t i = 1; i < curve.size(); ++i) {
      EXPECT_LE(curve[i].second, curve[i - 1].second + 1e-12);
    }
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
      // Divided-difference convexity on the nonuniform grid.
      const double left = (curve[i].second - curve[i - 1].second) / (grid[i] - grid[i - 1]);
      const double right = (curve[i + 1].second - curve[i].second) / (grid[i + 1] - grid[i]);
      EXPECT_GE(right - left, -1e-9) << "trial " << trial << " i " << i;
    }
    const double floor = std::max(0.0, std::log2(std::abs(spec.a)));
    // At a large budget the excess over the floor is the vanishing log term.
    const double excess = 0.5 * std::log2(1.0 + spec.noise_variance * d.m / 1e6);
    EXPECT_GE(lqg_rate(spec, d, d.d_min + 1e6), floor);
    EXPECT_LE(lqg_rate(spec, d, d.d_min + 1e6), floor + excess + 1e-12);
    EXPECT_NEAR(lqg_rate(spec, d, d.d_min + 1e12), floor, 1e-9);
    if (std::abs(spec.a) >= 1.0 && d.m > 0.0) {
      EXPECT_GT(lqg_rate(spec, d, d.d_min + 1e-12), 10.0);
    }
  }
}

TEST(LqgRate, LargeBudgetApproachesLogA) {
  const auto spec = Spec(2.0, 1.0, 1.0, 0.0, 1.0);
  const auto d = riccati_solve(spec);
  EXPECT_NEAR(lqg_rate(spec, d, 1e6), 1.0, 1e-5);
  const auto stable = Spec(0.5, 1.0, 1.0, 0.0, 1.0);
  EXPECT_NEAR(lqg_rate(stable, riccati_solve(stable), 1e6), 0.0, 1e-5);
}

TEST(LqgRate, RejectsLevelsAtOrBelowTheFloor) {
  const auto spec = Spec(2.0, 1.0, 1.0, 0.0, 1.0);
  const auto d = riccati_solve(spec);
  EXPECT_THROW(lqg_rate(spec, d, 1.0), SpecError);
  EXPECT_THROW(lqg_rate(spec, d, 0.5), SpecError);
  const std::vector<double> grid = {2.0, 1.0};
  try {
    f_curve(spec, d, grid);
    FAIL() << "expected SpecError";
  } catch (const SpecError& e) {
    EXPECT_NE(std::string(e.what()).find("D_min"), std::string::npos);
  }
}

}  // namespace
}  // namespace ratecost
