#pragma once

// Scalar linear-quadratic-Gaussian rate-cost analytics for
// x' = a x + b u + w, w ~ N(0, noise_variance), stage cost q x^2 + r u^2.

#include <span>
#include <utility>
#include <vector>

namespace ratecost {

struct ScalarLqgSpec {
  double a = 0.0;
  double b = 1.0;
  double noise_variance = 1.0;
  double q = 1.0;
  double r = 0.0;
};

struct LqgDerived {
  double s = 0.0;      // stabilizing Riccati solution
  double m = 0.0;      // b^2 s^2 / (r + b^2 s)
  double d_min = 0.0;  // noise_variance * s
  double residual = 0.0;
};

/// Throws SpecError on invalid weights and when no nonnegative root exists.
LqgDerived riccati_solve(const ScalarLqgSpec& spec);

/// |q + a^2 s - a^2 m(s) - s|.
double riccati_residual(const ScalarLqgSpec& spec, double s);

/// [log2|a| + 0.5 log2(1 + noise_variance m / (D - D_min))]^+ in bits.
/// Throws SpecError when D <= D_min.
double lqg_rate(const ScalarLqgSpec& spec, const LqgDerived& derived, double cost_level);

std::vector<std::pair<double, double>> f_curve(const ScalarLqgSpec& spec,
                                               const LqgDerived& derived,
                                               std::span<const double> cost_levels);

}  // namespace ratecost
