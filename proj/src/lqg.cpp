#include "ratecost/lqg.hpp"

#include <cmath>
#include <sstream>

#include "ratecost/error.hpp"

namespace ratecost {

namespace {

double sensitivity(const ScalarLqgSpec& spec, double s) {
  const double bs = spec.b * spec.b * s;
  const double den = spec.r + bs;
  if (den == 0.0) return 0.0;  // s = 0 with r = 0
  return bs * s / den;
}

}  // namespace

double riccati_residual(const ScalarLqgSpec& spec, double s) {
  const double a2 = spec.a * spec.a;
  return std::abs(spec.q + a2 * s - a2 * sensitivity(spec, s) - s);
}

LqgDerived riccati_solve(const ScalarLqgSpec& spec) {
  if (!(spec.noise_variance > 0.0) || !std::isfinite(spec.noise_variance)) {
    throw SpecError("noise variance must be positive");
  }
  if (!(spec.q >= 0.0) || !(spec.r >= 0.0)) throw SpecError("cost weights must be nonnegative");
  if (spec.r == 0.0 && spec.b == 0.0) throw SpecError("b must be nonzero when r = 0");
  if (!std::isfinite(spec.a) || !std::isfinite(spec.b)) throw SpecError("non-finite dynamics");

  const double a2 = spec.a * spec.a;
  const double b2 = spec.b * spec.b;
  double s;
  if (b2 == 0.0) {
    // Uncontrollable: s = q + a^2 s has a finite solution only when |a| < 1.
    if (a2 >= 1.0) {
      throw SpecError("uncontrollable unstable system: no nonnegative Riccati root");
    }
    s = spec.q / (1.0 - a2);
  } else {
    // Multiplying s = q + a^2 s - a^2 m by (r + b^2 s) gives
    // b^2 s^2 + (r - q b^2 - a^2 r) s - q r = 0.
    const double A = b2;
    const double B = spec.r - spec.q * b2 - a2 * spec.r;
    const double C = -spec.q * spec.r;
    const double disc = B * B - 4.0 * A * C;
    if (disc < 0.0) {
      std::ostringstream os;
      os << "Riccati quadratic has negative discriminant " << disc;
      throw SpecError(os.str());
    }
    const double root = std::sqrt(disc);
    // Larger root without cancellation.
    s = B <= 0.0 ? (-B + root) / (2.0 * A) : (2.0 * C) / (-B - root);
    if (!(s >= 0.0)) {
      std::ostringstream os;
      os << "Riccati quadratic has no nonnegative root (discriminant " << disc << ")";
      throw SpecError(os.str());
    }
  }
  LqgDerived out;
  out.s = s;
  out.m = sensitivity(spec, s);
  out.d_min = spec.noise_variance * s;
  out.residual = riccati_residual(spec, s);
  return out;
}

double lqg_rate(const ScalarLqgSpec& spec, const LqgDerived& derived, double cost_level) {
  if (!(cost_level > derived.d_min)) {
    std::ostringstream os;
    os << "cost level " << cost_level << " must exceed D_min = " << derived.d_min;
    throw SpecError(os.str());
  }
  if (spec.a == 0.0) return 0.0;
  const double v = std::log2(std::abs(spec.a)) +
                   0.5 * std::log2(1.0 + spec.noise_variance * derived.m /
                                             (cost_level - derived.d_min));
  return v > 0.0 ? v : 0.0;
}

std::vector<std::pair<double, double>> f_curve(const ScalarLqgSpec& spec,
                                               const LqgDerived& derived,
                                               std::span<const double> cost_levels) {
  std::vector<std::pair<double, double>> out;
  out.reserve(cost_levels.size());
  for (double d : cost_levels) out.emplace_back(d, lqg_rate(spec, derived, d));
  return out;
}

}  // namespace ratecost
