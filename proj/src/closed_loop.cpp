#include "ratecost/closed_loop.hpp"

#include <cmath>
#include <sstream>

#include "ratecost/error.hpp"
#include "ratecost/rng.hpp"

namespace ratecost {

double sandwich_upper_bound(double rate, int horizon, double gamma) {
  return rate + std::log2(rate + 3.4) + 2.0 + 1.0 / horizon + gamma;
}

double epsilon_condition(double rate, double epsilon) {
  return 2.0 * epsilon + std::log2(rate + epsilon + 3.4) - std::log2(rate + 3.4);
}

double per_coordinate_overhead(double rate_per_coordinate, int coordinates, int horizon) {
  const double k = coordinates;
  return std::log2(k * rate_per_coordinate + 3.4) / k + 2.0 / k + 1.0 / (k * horizon);
}

SeedLog derive_streams(std::uint64_t base) {
  return {base, derive_seed(base, "tables"), derive_seed(base, "dynamics"),
          derive_seed(base, "Q")};
}

std::vector<SfrlStage> realize_tables(const JointLaw& law, const CausalPolicy& policy,
                                      int truncation, std::uint64_t tables_seed,
                                      std::uint64_t id) {
  const std::uint64_t seed = derive_seed(tables_seed, "z", {id});
  std::vector<SfrlStage> stages;
  stages.reserve(law.horizon());
  for (int t = 0; t < law.horizon(); ++t) {
    stages.push_back(SfrlStage::build(t, law, policy, truncation, seed));
  }
  return stages;
}

CausalPolicy induced_policy(const std::vector<SfrlStage>& stages, int num_states,
                            int num_actions) {
  CausalPolicy p(static_cast<int>(stages.size()), num_states, num_actions);
  for (std::size_t t = 0; t < stages.size(); ++t) {
    p.stage(static_cast<int>(t)) = stages[t].deterministic_rows();
  }
  return p;
}

void refresh_exact(SchemeBundle& bundle) {
  bundle.expected_lengths = bundle.codebook.expected_lengths(bundle.mixture);
  double total = 0.0;
  for (double l : bundle.expected_lengths) total += l;
  bundle.exact_rate = total / bundle.spec.horizon();
  bundle.exact_cost = average_cost(bundle.mixture, bundle.spec);
}

SchemeBundle synthesize(const SystemSpec& spec, double cost_level,
                        const SynthesisOptions& options, const RateCostCurve* curve) {
  if (!(options.epsilon > 0.0)) throw SpecError("epsilon must be positive");
  if (!(options.gamma > 0.0)) throw SpecError("gamma must be positive");
  if (options.cloud_size < 1) throw SpecError("cloud size must be positive");

  SchemeBundle b(spec);
  b.cost_level = cost_level;
  b.options = options;
  b.seeds = derive_streams(options.seed);
  const int nx = spec.num_states(), nu = spec.num_actions();

  b.optimum = solve_fn(spec, cost_level, options.solver, curve);
  b.law = evaluate_joint(spec, b.optimum.policy, options.solver.budget);
  b.epsilon_lhs = epsilon_condition(b.optimum.rate, options.epsilon);
  b.epsilon_admissible = b.epsilon_lhs <= options.gamma;

  b.cloud.reserve(options.cloud_size);
  for (int k = 0; k < options.cloud_size; ++k) {
    const auto id = static_cast<std::uint64_t>(k);
    const auto stages =
        realize_tables(b.law, b.optimum.policy, options.truncation, b.seeds.tables, id);
    b.cloud.push_back(evaluate_zpoint(spec, induced_policy(stages, nx, nu), id,
                                      options.solver.budget));
  }
  double mean = 0.0, sq = 0.0;
  for (const auto& z : b.cloud) mean += z.d;
  mean /= b.cloud.size();
  for (const auto& z : b.cloud) sq += (z.d - mean) * (z.d - mean);
  if (b.cloud.size() > 1) b.cloud_d_se = std::sqrt(sq / (b.cloud.size() - 1) / b.cloud.size());

  const std::vector<double> weights(b.cloud.size(), 1.0);
  b.selector = caratheodory_reduce(b.cloud, weights, cost_level, options.epsilon,
                                   2.0 * b.cloud_d_se);

  const std::array<std::uint64_t, 2> ids = {b.selector.z0, b.selector.z1};
  for (int q = 0; q < 2; ++q) {
    b.stages[q] = realize_tables(b.law, b.optimum.policy, options.truncation, b.seeds.tables,
                                 ids[q]);
    b.induced[q] = induced_policy(b.stages[q], nx, nu);
    b.laws[q] = evaluate_joint(spec, b.induced[q], options.solver.budget);
  }
  const double lambda = b.selector.lambda;
  if (b.selector.z0 == b.selector.z1 || lambda >= 1.0) {
    b.mixture = b.laws[0];
  } else if (lambda <= 0.0) {
    b.mixture = b.laws[1];
  } else {
    b.mixture = JointLaw::mix(b.laws[0], b.laws[1], lambda);
  }
  b.entropy = mixture_entropy(b.selector, b.laws[0], b.laws[1]);
  b.codebook = ContextCodebook::build(b.mixture);
  refresh_exact(b);
  return b;
}

SimulationReport run_trials(const SchemeBundle& bundle, std::uint64_t trials,
                            std::uint64_t seed, bool keep_records) {
  const SystemSpec& spec = bundle.spec;
  const int n = spec.horizon();
  const std::uint64_t nx = spec.num_states(), nu = spec.num_actions();
  SimulationReport rep;
  rep.trials = trials;
  rep.horizon = n;
  rep.cost_level = bundle.cost_level;
  rep.gamma = bundle.options.gamma;
  rep.epsilon = bundle.options.epsilon;
  rep.seed = seed;
  rep.seeds = derive_streams(seed);
  rep.exact_rate = bundle.exact_rate;
  rep.exact_cost = bundle.exact_cost;
  rep.fn = bundle.optimum.rate;
  rep.upper_bound = sandwich_upper_bound(rep.fn, n, rep.gamma);
  if (keep_records) rep.records.reserve(trials);

  double rate_sum = 0.0, rate_sq = 0.0, cost_sum = 0.0, cost_sq = 0.0;
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    Rng q_rng(derive_seed(rep.seeds.q, "trial", {trial}));
    Rng dyn(derive_seed(rep.seeds.dynamics, "trial", {trial}));
    const int q = q_rng.uniform() < bundle.selector.lambda ? 0 : 1;
    if (q == 0) ++rep.q_zero_count;
    const auto& stages = bundle.stages[q];

    std::uint64_t kernel_code = 0, context = 0, bits = 0;
    double cost = 0.0;
    for (int t = 0; t < n; ++t) {
      const int x = static_cast<int>(dyn.categorical(spec.kernel_row(t, kernel_code)));
      const std::uint64_t row = kernel_code * nx + x;
      const int u = stages[t].select(row);

      // Encoder side: one codeword per stage.
      const PrefixCode& code = bundle.codebook.code(t, context);
      BitWriter message;
      code.encode(u, message);
      // Controller side: decode and apply.
      BitReader reader(message.bytes(), message.bit_count());
      const int decoded = code.decode(reader);
      if (decoded != u || reader.position() != message.bit_count()) {
        std::ostringstream os;
        os << "decode mismatch at trial " << trial << ", stage " << t;
        throw VerificationError(os.str());
      }
      bits += message.bit_count();
      cost += spec.cost(x, decoded);
      kernel_code = row * nu + decoded;
      context = context * nu + decoded;
    }
    const double rate = static_cast<double>(bits) / n;
    cost /= n;
    rate_sum += rate;
    rate_sq += rate * rate;
    cost_sum += cost;
    cost_sq += cost * cost;
    if (keep_records) rep.records.push_back({bits, cost});
  }
  if (trials > 0) {
    const double m = static_cast<double>(trials);
    rep.rate_mean = rate_sum / m;
    rep.cost_mean = cost_sum / m;
    if (trials > 1) {
      rep.rate_se = std::sqrt(std::max(0.0, rate_sq / m - rep.rate_mean * rep.rate_mean) *
                              m / (m - 1) / m);
      rep.cost_se = std::sqrt(std::max(0.0, cost_sq / m - rep.cost_mean * rep.cost_mean) *
                              m / (m - 1) / m);
    }
  }
  return rep;
}

SandwichLedger verify_sandwich(const SimulationReport& report) {
  SandwichLedger ledger;
  auto add = [&](std::string name, double value, double bound, double margin, bool gating) {
    ledger.entries.push_back({std::move(name), value, bound, margin, margin >= 0.0, gating});
  };
  add("converse", report.exact_rate, report.fn - 1e-3, report.exact_rate - (report.fn - 1e-3),
      true);
  add("achievability", report.exact_rate, report.upper_bound,
      report.upper_bound - report.exact_rate, true);
  add("cost", report.exact_cost, report.cost_level + 1e-9,
      report.cost_level + 1e-9 - report.exact_cost, true);
  if (report.trials > 0) {
    // Tiny absolute slack so that zero-variance runs compare equal.
    const double rate_tol = 3.0 * report.rate_se + 1e-9;
    const double cost_tol = 3.0 * report.cost_se + 1e-9;
    add("empirical_rate", report.rate_mean, report.exact_rate,
        rate_tol - std::abs(report.rate_mean - report.exact_rate), false);
    add("empirical_cost", report.cost_mean, report.exact_cost,
        cost_tol - std::abs(report.cost_mean - report.exact_cost), false);
  }
  ledger.pass = true;
  for (const auto& e : ledger.entries) {
    if (e.gating && !e.pass) ledger.pass = false;
  }
  return ledger;
}

}  // namespace ratecost
