#pragma once

// End-to-end encoding-and-control scheme: a near-optimal causal policy is
// realized stage by stage through proposal tables, the table randomness is
// collapsed to a binary time-sharing variable Q, and actions are sent with
// conditional Shannon codes matched to the resulting action law.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ratecost/fn_solver.hpp"
#include "ratecost/prefix_code.hpp"
#include "ratecost/sfrl.hpp"
#include "ratecost/system_model.hpp"
#include "ratecost/timeshare.hpp"

namespace ratecost {

/// F + log2(F + 3.4) + 2 + 1/n + gamma.
double sandwich_upper_bound(double rate, int horizon, double gamma);

/// 2 eps + log2(F + eps + 3.4) - log2(F + 3.4); the slack eps is admissible
/// for a given gamma when this is <= gamma.
double epsilon_condition(double rate, double epsilon);

/// Additive overhead per coordinate for k i.i.d. coordinates with
/// per-coordinate rate F: log2(k F + 3.4)/k + 2/k + 1/(k n).
double per_coordinate_overhead(double rate_per_coordinate, int coordinates, int horizon);

struct SeedLog {
  std::uint64_t base = 0;
  std::uint64_t tables = 0;
  std::uint64_t dynamics = 0;
  std::uint64_t q = 0;
};

/// Derives the three named streams from one base seed.
SeedLog derive_streams(std::uint64_t base);

struct SynthesisOptions {
  double epsilon = 0.01;
  double gamma = 0.25;
  int truncation = kDefaultTruncation;
  int cloud_size = 200;
  std::uint64_t seed = 1;
  SolverOptions solver;
};

struct SchemeBundle {
  explicit SchemeBundle(SystemSpec s) : spec(std::move(s)) {}

  SystemSpec spec;
  double cost_level = 0.0;
  SynthesisOptions options;
  SeedLog seeds;

  RateCostPoint optimum;      // F_n(D) and the near-optimal policy
  JointLaw law;               // trajectory law of optimum.policy
  bool epsilon_admissible = false;
  double epsilon_lhs = 0.0;

  std::vector<ZPoint> cloud;
  double cloud_d_se = 0.0;
  TimeShareSelector selector;

  // Index 0 and 1 follow Q.
  std::array<std::vector<SfrlStage>, 2> stages;
  std::array<CausalPolicy, 2> induced;
  std::array<JointLaw, 2> laws;
  JointLaw mixture;
  MixtureEntropy entropy;

  ContextCodebook codebook;
  std::vector<double> expected_lengths;  // per stage
  double exact_rate = 0.0;               // (1/n) sum_t E[l(B_t)]
  double exact_cost = 0.0;
};

/// Stage tables of one realization z; stage t is drawn with seed
/// derive_seed(tables_seed, "z", {id}).
std::vector<SfrlStage> realize_tables(const JointLaw& law, const CausalPolicy& policy,
                                      int truncation, std::uint64_t tables_seed,
                                      std::uint64_t id);

/// The deterministic causal policy that a realization induces.
CausalPolicy induced_policy(const std::vector<SfrlStage>& stages, int num_states,
                            int num_actions);

/// `curve`, when given, is a precomputed multiplier sweep of `spec`.
SchemeBundle synthesize(const SystemSpec& spec, double cost_level,
                        const SynthesisOptions& options = {},
                        const RateCostCurve* curve = nullptr);

/// Recomputes the exact rate, cost and per-stage lengths from the bundle's
/// codebook and mixture law.
void refresh_exact(SchemeBundle& bundle);

struct TrialRecord {
  std::uint64_t bits = 0;
  double cost = 0.0;  // per stage
};

struct SimulationReport {
  std::uint64_t trials = 0;
  int horizon = 0;
  double cost_level = 0.0;
  double gamma = 0.0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  SeedLog seeds;
  double rate_mean = 0.0;  // bits per stage
  double rate_se = 0.0;
  double cost_mean = 0.0;
  double cost_se = 0.0;
  double exact_rate = 0.0;
  double exact_cost = 0.0;
  double fn = 0.0;
  double upper_bound = 0.0;
  std::uint64_t q_zero_count = 0;
  std::vector<TrialRecord> records;  // filled when requested
};

/// Runs the loop. Per-trial generators come from (seed, trial) on the
/// "dynamics" and "Q" streams. Throws VerificationError on any decode
/// mismatch.
SimulationReport run_trials(const SchemeBundle& bundle, std::uint64_t trials,
                            std::uint64_t seed, bool keep_records = false);

struct LedgerEntry {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // >= 0 when the check holds
  bool pass = false;
  bool gating = true;   // statistical entries are reported but do not gate
};

struct SandwichLedger {
  std::vector<LedgerEntry> entries;
  bool pass = false;
};

/// Converse (rate >= F - 1e-3), achievability (rate <= upper bound) and cost
/// (cost <= D + 1e-9) on exact quantities, plus 3-SE agreement of the
/// empirical means as non-gating entries.
SandwichLedger verify_sandwich(const SimulationReport& report);

}  // namespace ratecost
