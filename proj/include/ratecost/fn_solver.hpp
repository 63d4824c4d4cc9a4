#pragma once

// Minimum directed information under an average-cost constraint.
//
// The Lagrangian (1/n) I(X_[n] -> U_[n]) + mu (1/n) sum_t E c(X_t, U_t) is
// minimized by exponentiated-gradient steps on the product of per-history
// simplices. Each step updates one stage with unit step size, which is the
// exact minimizer of that stage's block given the current action marginal, so
// the objective never increases (it reduces to Blahut-Arimoto when n = 1).
// The constrained value F_n(D) is read off the lower convex envelope of a
// multiplier sweep; points between two envelope vertices are realized by
// mixing the two causal policies.

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "ratecost/system_model.hpp"

namespace ratecost {

struct SolverOptions {
  int restarts = 8;
  std::uint64_t seed = 1;
  int max_sweeps = 5000;
  /// Stop once the summed Frank-Wolfe gap of the stage blocks (bits per
  /// stage) falls below this.
  double gap_tolerance = 1e-9;
  /// Entries are kept above this floor so that every log stays finite.
  double policy_floor = 1e-30;
  /// Bisection target for the cost coordinate.
  double cost_tolerance = 1e-4;
  int max_bisections = 60;
  int sweep_min_exponent = -10;
  int sweep_max_exponent = 10;
  std::uint64_t budget = kDefaultTrajectoryBudget;
  /// Throw ConvergenceError instead of flagging the point.
  bool strict = false;
};

inline constexpr double kInfiniteMultiplier = std::numeric_limits<double>::infinity();

struct RateCostPoint {
  double rate = 0.0;        // (1/n) I(X_[n] -> U_[n]), bits per stage
  double cost = 0.0;        // (1/n) sum_t E c(X_t, U_t)
  double multiplier = 0.0;  // mu >= 0; +inf for the cost-optimal endpoint
  CausalPolicy policy;
  bool converged = true;
  int sweeps = 0;
  double gap = 0.0;
};

/// Lower convex envelope of a multiplier sweep, ordered by increasing cost.
struct RateCostCurve {
  std::vector<RateCostPoint> points;
  /// Every solved point, including the ones the envelope discards.
  std::vector<RateCostPoint> sweep;
};

RateCostPoint solve_lagrangian(const SystemSpec& spec, double mu,
                               const SolverOptions& opts = {},
                               const CausalPolicy* warm_start = nullptr);

RateCostCurve rate_cost_curve(const SystemSpec& spec, const SolverOptions& opts = {});

/// F_n(D) with a near-optimal policy whose exact cost is <= D. Throws
/// InfeasibleError carrying the minimal achievable cost when D is too small.
RateCostPoint solve_fn(const SystemSpec& spec, double cost_level,
                       const SolverOptions& opts = {},
                       const RateCostCurve* curve = nullptr);

/// Exhaustive grid over every policy simplex. Limited to 12 free parameters
/// and `max_grid_points` grid points.
RateCostPoint brute_force_fn(const SystemSpec& spec, double cost_level,
                             double resolution,
                             std::uint64_t max_grid_points = 50'000'000);

/// Number of free policy parameters: sum_t rows_t * (|U| - 1).
std::uint64_t policy_parameter_count(const SystemSpec& spec);

struct CostOptimum {
  double cost = 0.0;
  CausalPolicy policy;
};

/// Minimal expected cost over all causal policies (deterministic, by dynamic
/// programming over histories). Ties go to the smallest action index.
CostOptimum min_cost_policy(const SystemSpec& spec);

/// Minimal expected cost over state-independent deterministic action
/// sequences; these have zero directed information.
CostOptimum best_open_loop_policy(const SystemSpec& spec);

/// Causal policy whose trajectory law is weight * law(a) + (1 - weight) * law(b).
CausalPolicy mix_policies(const SystemSpec& spec, const CausalPolicy& a,
                          const CausalPolicy& b, double weight);

/// Lagrangian value for an arbitrary (possibly unnormalized) positive policy.
double lagrangian_value(const SystemSpec& spec, const CausalPolicy& policy, double mu);

/// Gradient of lagrangian_value with respect to each raw policy entry, laid
/// out like CausalPolicy::stage(t).
std::vector<std::vector<double>> lagrangian_gradient(const SystemSpec& spec,
                                                     const CausalPolicy& policy,
                                                     double mu);

}  // namespace ratecost
