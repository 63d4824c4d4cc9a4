#include "ratecost/sfrl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "ratecost/error.hpp"

namespace ratecost {

ProposalTable draw_table(std::span<const double> marginal, int truncation, Rng& rng) {
  if (truncation < 1) throw SpecError("truncation must be at least 1");
  const auto nu = marginal.size();
  ProposalTable table;
  table.proposals.resize(truncation);
  table.times.resize(truncation);
  table.first_time.assign(nu, std::numeric_limits<double>::infinity());
  table.first_index.assign(nu, static_cast<std::uint32_t>(truncation));
  double clock = 0.0;
  for (int i = 0; i < truncation; ++i) {
    // A zero gap would tie two arrivals; redraw to keep times strictly
    // increasing.
    double gap = 0.0;
    while (gap <= 0.0) gap = rng.exponential();
    clock += gap;
    const int y = static_cast<int>(rng.categorical(marginal));
    table.times[i] = clock;
    table.proposals[i] = y;
    if (table.first_index[y] == static_cast<std::uint32_t>(truncation)) {
      table.first_index[y] = i;
      table.first_time[y] = clock;
    }
  }
  return table;
}

std::size_t select_index(const ProposalTable& table, std::span<const double> marginal,
                         std::span<const double> conditional) {
  const auto absent = static_cast<std::uint32_t>(table.proposals.size());
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t arg = absent;
  for (std::size_t u = 0; u < conditional.size(); ++u) {
    const std::uint32_t i = table.first_index[u];
    if (i == absent || !(conditional[u] > 0.0)) continue;
    const double w = table.first_time[u] * marginal[u] / conditional[u];
    if (w < best || (w == best && i < arg)) {
      best = w;
      arg = i;
    }
  }
  if (arg == absent) {
    throw VerificationError(
        "truncation failure: no proposal lies in the support of the conditional law");
  }
  return arg;
}

std::uint64_t row_action_context(std::uint64_t row, int t, int num_states, int num_actions) {
  const std::uint64_t nx = num_states, nu = num_actions;
  std::uint64_t r = row / nx;
  std::uint64_t ctx = 0, scale = 1;
  for (int s = t - 1; s >= 0; --s) {
    ctx += (r % nu) * scale;
    scale *= nu;
    r /= nu * nx;
  }
  return ctx;
}

SfrlStage SfrlStage::build(int t, const JointLaw& law, const CausalPolicy& policy,
                           int truncation, std::uint64_t seed) {
  if (t < 0 || t >= law.horizon()) throw SpecError("stage index out of range");
  if (policy.horizon() != law.horizon() || policy.num_states() != law.num_states() ||
      policy.num_actions() != law.num_actions()) {
    throw SpecError("policy and joint law dimensions differ");
  }
  if (truncation < law.num_actions()) {
    throw SpecError("truncation must be at least the action alphabet size");
  }
  SfrlStage stage;
  stage.t_ = t;
  stage.nx_ = law.num_states();
  stage.nu_ = law.num_actions();
  stage.truncation_ = truncation;
  stage.seed_ = seed;
  stage.conditional_ = policy.stage(t);

  const std::uint64_t nu = stage.nu_;
  std::map<std::uint64_t, std::vector<double>> marginals;
  for (const auto& [code, p] : action_marginal(law, t)) {
    auto& m = marginals[code / nu];
    m.resize(nu, 0.0);
    m[code % nu] = p;
  }
  for (auto& [ctx, m] : marginals) {
    double s = 0.0;
    for (double v : m) s += v;
    if (!(s > 0.0)) continue;
    for (double& v : m) v /= s;
    Rng rng(derive_seed(seed, "tables", {static_cast<std::uint64_t>(t), ctx}));
    Context c;
    c.table = draw_table(m, truncation, rng);
    c.marginal = std::move(m);
    stage.contexts_.emplace(ctx, std::move(c));
  }
  return stage;
}

int SfrlStage::select(std::uint64_t row) const {
  const std::uint64_t ctx = row_action_context(row, t_, nx_, nu_);
  const auto it = contexts_.find(ctx);
  if (it == contexts_.end()) {
    std::ostringstream os;
    os << "stage " << t_ << " has no proposal table for action context " << ctx;
    throw VerificationError(os.str());
  }
  const std::span<const double> cond(conditional_.data() + row * nu_,
                                     static_cast<std::size_t>(nu_));
  const auto k = select_index(it->second.table, it->second.marginal, cond);
  return it->second.table.proposals[k];
}

int SfrlStage::select(std::span<const int> states, std::span<const int> actions) const {
  if (states.size() != static_cast<std::size_t>(t_ + 1) ||
      actions.size() != static_cast<std::size_t>(t_)) {
    throw SpecError("history length does not match the stage");
  }
  std::uint64_t row = 0;
  for (int s = 0; s <= t_; ++s) {
    row = row * nx_ + states[s];
    if (s < t_) row = row * nu_ + actions[s];
  }
  return select(row);
}

std::vector<double> SfrlStage::deterministic_rows() const {
  const std::uint64_t rows = conditional_.size() / nu_;
  std::vector<double> out(conditional_.size(), 0.0);
  for (std::uint64_t h = 0; h < rows; ++h) {
    int u = 0;
    const auto it = contexts_.find(row_action_context(h, t_, nx_, nu_));
    if (it != contexts_.end()) {
      // Every history with positive mass has its conditional supported inside
      // the context marginal. A row without overlap (including an all-zero
      // row) is never reached, and it takes the first proposal.
      bool overlap = false;
      for (int a = 0; a < nu_; ++a) {
        overlap |= conditional_[h * nu_ + a] > 0.0 && it->second.marginal[a] > 0.0;
      }
      u = overlap ? select(h) : it->second.table.proposals[0];
    }
    out[h * nu_ + u] = 1.0;
  }
  return out;
}

namespace {

// Per-context pushforward masses of the history law through the stage map.
double pushforward_entropy(const SfrlStage& stage,
                           const std::vector<std::pair<std::uint64_t, double>>& history,
                           int nx, int nu) {
  std::map<std::uint64_t, std::vector<double>> by_ctx;
  for (const auto& [row, p] : history) {
    auto& v = by_ctx[row_action_context(row, stage.stage(), nx, nu)];
    v.resize(nu, 0.0);
    v[stage.select(row)] += p;
  }
  double h = 0.0;
  for (const auto& [ctx, v] : by_ctx) {
    double total = 0.0;
    for (double m : v) total += m;
    for (double m : v) {
      if (m > 0.0) h -= m * std::log2(m / total);
    }
  }
  return std::max(0.0, h);
}

}  // namespace

double stage_entropy_given_z(const SfrlStage& stage, const JointLaw& law) {
  return pushforward_entropy(stage, history_marginal(law, stage.stage()),
                             law.num_states(), law.num_actions());
}

StageAudit audit_stage(int t, const JointLaw& law, const CausalPolicy& policy,
                       int truncation, std::uint64_t seed, int entropy_tables,
                       int fidelity_tables) {
  StageAudit out;
  out.t = t;
  out.information = directed_information_terms(law)[t];
  out.bound = out.information + std::log2(out.information + 3.4) + 1.0;

  const int nx = law.num_states(), nu = law.num_actions();
  const auto history = history_marginal(law, t);
  const int draws = std::max(entropy_tables, fidelity_tables);
  std::vector<double> counts(history.size() * nu, 0.0);
  std::vector<int> picks(history.size());
  double sum = 0.0, sum_sq = 0.0;
  int entropy_used = 0, fidelity_used = 0;
  for (int k = 0; k < draws; ++k) {
    const SfrlStage stage =
        SfrlStage::build(t, law, policy, truncation,
                         derive_seed(seed, "audit", {static_cast<std::uint64_t>(k)}));
    // A table that cannot represent some history is counted and excluded.
    try {
      for (std::size_t i = 0; i < history.size(); ++i) picks[i] = stage.select(history[i].first);
    } catch (const VerificationError&) {
      ++out.truncation_failures;
      continue;
    }
    if (k < entropy_tables) {
      const double h = pushforward_entropy(stage, history, nx, nu);
      sum += h;
      sum_sq += h * h;
      ++entropy_used;
    }
    if (k < fidelity_tables) {
      for (std::size_t i = 0; i < history.size(); ++i) counts[i * nu + picks[i]] += 1.0;
      ++fidelity_used;
    }
  }
  out.entropy_tables = entropy_used;
  out.fidelity_tables = fidelity_used;
  if (entropy_used > 0) {
    out.entropy_mean = sum / entropy_used;
    if (entropy_used > 1) {
      const double var = std::max(
          0.0, (sum_sq - entropy_used * out.entropy_mean * out.entropy_mean) / (entropy_used - 1));
      out.entropy_se = std::sqrt(var / entropy_used);
    }
  }
  if (fidelity_used > 0) {
    double tv = 0.0;
    for (std::size_t i = 0; i < history.size(); ++i) {
      const auto row = policy.row(t, history[i].first);
      double d = 0.0;
      for (int u = 0; u < nu; ++u) {
        d += std::abs(counts[i * nu + u] / fidelity_used - row[u]);
      }
      tv += history[i].second * 0.5 * d;
    }
    out.total_variation = tv;
  }
  return out;
}

}  // namespace ratecost
