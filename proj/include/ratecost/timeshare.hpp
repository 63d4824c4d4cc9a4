#pragma once

// Reduction of a cloud of (rate, cost) points, one per realization of the
// auxiliary tables, to a two-point time-sharing between realizations.
//
// Rate here is (1/n) H(U_[n]) under the deterministic policy that a
// realization induces; cost is the normalized expected stage cost.

#include <cstdint>
#include <string>
#include <vector>

#include "ratecost/system_model.hpp"

namespace ratecost {

struct ZPoint {
  std::uint64_t id = 0;
  double r = 0.0;  // bits per stage
  double d = 0.0;  // cost per stage
};

/// Exact (r, d) of a deterministic causal policy by trajectory enumeration.
ZPoint evaluate_zpoint(const SystemSpec& spec, const CausalPolicy& deterministic,
                       std::uint64_t id = 0,
                       std::uint64_t budget = kDefaultTrajectoryBudget);

/// How the feasible witness near the barycenter was obtained.
enum class WitnessCase {
  kBarycenter,   // barycenter cost <= D
  kShifted,      // barycenter cost slightly above D; pulled down toward a
                 // point of lower cost
};

struct TimeShareSelector {
  std::uint64_t z0 = 0;
  std::uint64_t z1 = 0;
  std::size_t index0 = 0;  // positions in the input cloud
  std::size_t index1 = 0;
  double lambda = 1.0;     // weight on z0, i.e. P(Q = 0)
  double r = 0.0;          // lambda r(z0) + (1 - lambda) r(z1)
  double d = 0.0;
  double r_bar = 0.0;      // weighted barycenter
  double d_bar = 0.0;
  double epsilon = 0.0;    // requested slack
  double effective_epsilon = 0.0;  // slack the witness needed (>= epsilon)
  double delta = 0.0;      // shrinking radius used when the witness is shifted
  WitnessCase witness = WitnessCase::kBarycenter;
};

/// Two-point mixture of cloud members with cost <= D and rate <= r_bar + eps.
///
/// Among all points of the convex hull with cost <= D the lexicographically
/// smallest (rate, then cost) is returned; it is a hull vertex or the crossing
/// of a hull edge with the line cost = D. Throws VerificationError when the
/// barycenter cost exceeds D + d_tolerance or no point lies at or below D.
TimeShareSelector caratheodory_reduce(const std::vector<ZPoint>& points,
                                      const std::vector<double>& weights,
                                      double cost_level, double epsilon,
                                      double d_tolerance = 0.0);

/// Convex hull in counterclockwise order starting at the lowest (r, d),
/// collinear points removed. Orientation tests are exact.
std::vector<std::size_t> convex_hull(const std::vector<ZPoint>& points);

/// Sign of the cross product (b - a) x (c - a), exact for double inputs.
int orientation(double ar, double ad, double br, double bd, double cr, double cd);

struct MixtureEntropy {
  double conditional = 0.0;    // H(U_[n] | Q) = n (lambda r0 + (1 - lambda) r1)
  double unconditional = 0.0;  // H(U_[n]) under the mixture law
  bool within_one_bit = true;  // unconditional <= conditional + 1
};

MixtureEntropy mixture_entropy(const TimeShareSelector& selector, const JointLaw& law0,
                               const JointLaw& law1);

/// H(lambda) in bits.
double binary_entropy(double p);

}  // namespace ratecost
