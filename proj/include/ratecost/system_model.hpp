#pragma once

// Finite-alphabet controlled systems over a finite horizon, causal policies,
// and exact evaluation of the induced trajectory law.
//
// Conventions used throughout the library:
//   * stages are 0-based, t = 0..n-1;
//   * a trajectory (x_0,u_0,...,x_{n-1},u_{n-1}) is encoded as a mixed-radix
//     integer with x_0 most significant (radices nx, nu, nx, nu, ...);
//   * the policy row at stage t is indexed by the code of (x_0,u_0,...,x_t);
//   * the state-kernel row at stage t is indexed by the code of
//     (x_0,u_0,...,x_{t-1},u_{t-1}) (a single row at t = 0);
//   * an action context at stage t is the code of (u_0,...,u_{t-1}).
//   * information quantities are in bits.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace ratecost {

inline constexpr std::uint64_t kDefaultTrajectoryBudget = 10'000'000;
inline constexpr double kRowTolerance = 1e-12;

enum class KernelMode { kMarkov, kFullHistory };

/// Integer power with saturation at UINT64_MAX.
std::uint64_t saturating_pow(std::uint64_t base, int exp);

class SystemSpec {
 public:
  /// Time-invariant Markov dynamics: `initial` is a pmf over states and
  /// `transition` is laid out as [x_prev][u_prev][x_next].
  static SystemSpec markov(int horizon, int num_states, int num_actions,
                           std::vector<double> initial,
                           std::vector<double> transition,
                           std::vector<double> cost);

  /// Uncontrolled source: `transition` is [x_prev][x_next] and ignores the
  /// action. Actions act as reproductions and `cost` as the distortion.
  static SystemSpec source(int horizon, int num_states, int num_actions,
                           std::vector<double> initial,
                           std::vector<double> transition,
                           std::vector<double> cost);

  /// General history-dependent kernels; `stages[t]` holds (nx*nu)^t rows of
  /// nx entries each.
  static SystemSpec full_history(int horizon, int num_states, int num_actions,
                                 std::vector<std::vector<double>> stages,
                                 std::vector<double> cost);

  int horizon() const { return horizon_; }
  int num_states() const { return nx_; }
  int num_actions() const { return nu_; }
  KernelMode mode() const { return mode_; }
  bool is_source() const { return source_; }

  /// Kernel row P(x_t | history) where `history` encodes (x_0,u_0,...,u_{t-1}).
  std::span<const double> kernel_row(int t, std::uint64_t history) const;

  double cost(int x, int u) const { return cost_[x * nu_ + u]; }
  std::span<const double> cost_table() const { return cost_; }
  double max_cost() const;

  /// (nx*nu)^n, saturating.
  std::uint64_t trajectory_count() const;
  /// Number of policy rows at stage t: nx^(t+1) * nu^t.
  std::uint64_t policy_rows(int t) const;
  /// Throws SpecError when the trajectory space exceeds `budget`.
  void check_budget(std::uint64_t budget = kDefaultTrajectoryBudget) const;

  // Raw storage, used for serialization.
  std::span<const double> initial() const { return initial_; }
  std::span<const double> transition() const { return transition_; }
  const std::vector<std::vector<double>>& stages() const { return stages_; }

 private:
  SystemSpec() = default;
  void validate() const;

  int horizon_ = 1;
  int nx_ = 1;
  int nu_ = 1;
  KernelMode mode_ = KernelMode::kMarkov;
  bool source_ = false;
  std::vector<double> initial_;
  std::vector<double> transition_;  // [x][u][x'] (markov)
  std::vector<std::vector<double>> stages_;  // full-history tables
  std::vector<double> cost_;
};

/// P_{U_t | X_[t], U_[t-1]} for every stage and every history.
class CausalPolicy {
 public:
  CausalPolicy() = default;
  /// Uniform rows.
  CausalPolicy(int horizon, int num_states, int num_actions);

  int horizon() const { return horizon_; }
  int num_states() const { return nx_; }
  int num_actions() const { return nu_; }
  std::uint64_t rows(int t) const { return table_[t].size() / nu_; }

  std::span<double> row(int t, std::uint64_t history) {
    return {table_[t].data() + history * nu_, static_cast<std::size_t>(nu_)};
  }
  std::span<const double> row(int t, std::uint64_t history) const {
    return {table_[t].data() + history * nu_, static_cast<std::size_t>(nu_)};
  }

  std::vector<double>& stage(int t) { return table_[t]; }
  const std::vector<double>& stage(int t) const { return table_[t]; }

  /// Throws SpecError if a row is negative or off the simplex by > 1e-12.
  void validate() const;
  bool matches(const SystemSpec& spec) const;

 private:
  int horizon_ = 0;
  int nx_ = 0;
  int nu_ = 0;
  std::vector<std::vector<double>> table_;
};

/// A decoded trajectory.
struct Trajectory {
  std::vector<int> states;
  std::vector<int> actions;
};

/// Sparse probability table over trajectories, sorted by trajectory code.
class JointLaw {
 public:
  using Entry = std::pair<std::uint64_t, double>;

  JointLaw() = default;
  JointLaw(int horizon, int num_states, int num_actions,
           std::vector<Entry> entries);

  int horizon() const { return horizon_; }
  int num_states() const { return nx_; }
  int num_actions() const { return nu_; }
  const std::vector<Entry>& entries() const { return entries_; }
  double total_mass() const;

  Trajectory decode(std::uint64_t code) const;
  std::uint64_t encode(const Trajectory& traj) const;

  /// Code of (x_0,u_0,...,x_t,u_t) for a trajectory code.
  std::uint64_t prefix_with_action(std::uint64_t code, int t) const;
  /// Code of (u_0,...,u_t).
  std::uint64_t action_prefix(std::uint64_t code, int t) const;

  /// weight * a + (1 - weight) * b.
  static JointLaw mix(const JointLaw& a, const JointLaw& b, double weight);

 private:
  int horizon_ = 0;
  int nx_ = 0;
  int nu_ = 0;
  std::vector<Entry> entries_;
};

/// Dense forward product of kernels and policy rows; index = trajectory code.
std::vector<double> trajectory_masses(const SystemSpec& spec,
                                      const CausalPolicy& policy,
                                      std::uint64_t budget = kDefaultTrajectoryBudget);

JointLaw evaluate_joint(const SystemSpec& spec, const CausalPolicy& policy,
                        std::uint64_t budget = kDefaultTrajectoryBudget);

/// (1/n) sum_t E[c(X_t, U_t)].
double average_cost(const JointLaw& law, const SystemSpec& spec);

/// I(X_[t]; U_t | U_[t-1]) for each stage.
std::vector<double> directed_information_terms(const JointLaw& law);
/// sum_t I(X_[t]; U_t | U_[t-1]).
double directed_information(const JointLaw& law);
/// H(U_t | U_[t-1]) for each stage.
std::vector<double> conditional_action_entropies(const JointLaw& law);
/// H(U_[n]).
double action_entropy(const JointLaw& law);

/// Marginal law of (u_0..u_t) as (context code, mass), sorted by code; zero
/// masses dropped.
std::vector<std::pair<std::uint64_t, double>> action_marginal(const JointLaw& law,
                                                              int t);
/// Marginal law of (x_0,u_0,...,x_t) as (policy-row code, mass), sorted.
std::vector<std::pair<std::uint64_t, double>> history_marginal(const JointLaw& law,
                                                               int t);

/// Shannon entropy in bits with 0 log 0 = 0.
double entropy_bits(std::span<const double> pmf);

}  // namespace ratecost
