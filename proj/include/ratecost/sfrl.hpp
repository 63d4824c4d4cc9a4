#pragma once

// Conditional strong functional representation, one stage at a time.
//
// For every action context u_[t-1] a table of M proposals drawn i.i.d. from
// the context marginal q = P(U_t | u_[t-1]) is paired with the arrival times
// of a unit-rate Poisson process. Given the conditional p = P(U_t | x_[t],
// u_[t-1]) the selected action is the proposal minimizing T_i q(Y_i)/p(Y_i).
// The collection of tables is the auxiliary variable of the stage; it is
// drawn from its own seed stream and never sees state randomness.

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "ratecost/rng.hpp"
#include "ratecost/system_model.hpp"

namespace ratecost {

inline constexpr int kDefaultTruncation = 1024;

struct ProposalTable {
  std::vector<int> proposals;
  std::vector<double> times;  // strictly increasing
  // Earliest arrival per symbol; only these can win the selection.
  std::vector<double> first_time;            // +inf when absent
  std::vector<std::uint32_t> first_index;    // M when absent
};

/// Draws M proposals from `marginal` with unit-rate Poisson arrival times.
ProposalTable draw_table(std::span<const double> marginal, int truncation, Rng& rng);

/// 0-based index K of the selected proposal. Ties go to the smallest index.
/// Throws VerificationError when no proposal has positive conditional mass.
std::size_t select_index(const ProposalTable& table, std::span<const double> marginal,
                         std::span<const double> conditional);

/// Code of (u_0..u_{t-1}) for a stage-t policy-row code (x_0,u_0,...,x_t).
std::uint64_t row_action_context(std::uint64_t row, int t, int num_states, int num_actions);

class SfrlStage {
 public:
  struct Context {
    std::vector<double> marginal;
    ProposalTable table;
  };

  SfrlStage() = default;

  /// Contexts with zero mass under `law` are skipped. Each context's table is
  /// drawn from derive_seed(seed, "tables", {t, context}).
  static SfrlStage build(int t, const JointLaw& law, const CausalPolicy& policy,
                         int truncation, std::uint64_t seed);

  int stage() const { return t_; }
  int truncation() const { return truncation_; }
  std::uint64_t seed() const { return seed_; }
  const std::unordered_map<std::uint64_t, Context>& contexts() const { return contexts_; }
  bool has_context(std::uint64_t context) const { return contexts_.contains(context); }

  /// g_t for the history encoded by a stage-t policy-row code.
  int select(std::uint64_t row) const;
  int select(std::span<const int> states, std::span<const int> actions) const;

  /// One-hot rows of the deterministic map h -> g_t(h); rows whose context
  /// has no table put all mass on action 0 (unreachable under g).
  std::vector<double> deterministic_rows() const;

 private:
  int t_ = 0;
  int nx_ = 0;
  int nu_ = 0;
  int truncation_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> conditional_;  // policy stage t, rows x nu
  std::unordered_map<std::uint64_t, Context> contexts_;
};

/// H(U_t | U_[t-1], Z_t = this table) under `law`, exact: for a fixed table
/// U_t is a function of the history, so this is the context-averaged entropy
/// of the pushforward of the history law.
double stage_entropy_given_z(const SfrlStage& stage, const JointLaw& law);

struct StageAudit {
  int t = 0;
  double information = 0.0;    // I(X_[t]; U_t | U_[t-1]), exact
  double entropy_mean = 0.0;   // table average of stage_entropy_given_z
  double entropy_se = 0.0;
  double bound = 0.0;          // information + log2(information + 3.4) + 1
  double total_variation = 0.0;
  int entropy_tables = 0;
  int fidelity_tables = 0;
  std::uint64_t truncation_failures = 0;
};

/// Monte-Carlo audit of one stage. The total variation is the history-law
/// weighted distance between the table-averaged pushforward and the policy.
StageAudit audit_stage(int t, const JointLaw& law, const CausalPolicy& policy,
                       int truncation, std::uint64_t seed, int entropy_tables,
                       int fidelity_tables);

}  // namespace ratecost
