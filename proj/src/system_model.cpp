#include "ratecost/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ratecost/error.hpp"

namespace ratecost {

namespace {

void check_row(std::span<const double> row, double tol, const char* what,
               std::uint64_t index) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      std::ostringstream os;
      os << what << " row " << index << " has a negative or non-finite entry";
      throw SpecError(os.str());
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > tol) {
    std::ostringstream os;
    os << what << " row " << index << " sums to " << sum;
    throw SpecError(os.str());
  }
}

// Sorts (key, mass) pairs by key and merges duplicates. Stable, so the
// summation order only depends on the input order.
std::vector<std::pair<std::uint64_t, double>> aggregate(
    std::vector<std::pair<std::uint64_t, double>> items) {
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<std::uint64_t, double>> out;
  for (const auto& [k, p] : items) {
    if (!out.empty() && out.back().first == k) {
      out.back().second += p;
    } else {
      out.emplace_back(k, p);
    }
  }
  return out;
}

double entropy_of(const std::vector<std::pair<std::uint64_t, double>>& m) {
  double h = 0.0;
  for (const auto& kv : m) {
    if (kv.second > 0.0) h -= kv.second * std::log2(kv.second);
  }
  return h;
}

}  // namespace

std::uint64_t saturating_pow(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (base != 0 && r > std::numeric_limits<std::uint64_t>::max() / base) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    r *= base;
  }
  return r;
}

// ---------------------------------------------------------------------------
// SystemSpec

SystemSpec SystemSpec::markov(int horizon, int num_states, int num_actions,
                              std::vector<double> initial,
                              std::vector<double> transition,
                              std::vector<double> cost) {
  SystemSpec s;
  s.horizon_ = horizon;
  s.nx_ = num_states;
  s.nu_ = num_actions;
  s.mode_ = KernelMode::kMarkov;
  s.initial_ = std::move(initial);
  s.transition_ = std::move(transition);
  s.cost_ = std::move(cost);
  s.validate();
  return s;
}

SystemSpec SystemSpec::source(int horizon, int num_states, int num_actions,
                              std::vector<double> initial,
                              std::vector<double> transition,
                              std::vector<double> cost) {
  if (num_states < 1 || num_actions < 1 ||
      transition.size() != static_cast<std::size_t>(num_states) * num_states) {
    throw SpecError("source transition must be num_states x num_states");
  }
  std::vector<double> expanded;
  expanded.reserve(static_cast<std::size_t>(num_states) * num_actions * num_states);
  for (int x = 0; x < num_states; ++x) {
    for (int u = 0; u < num_actions; ++u) {
      expanded.insert(expanded.end(), transition.begin() + x * num_states,
                      transition.begin() + (x + 1) * num_states);
    }
  }
  SystemSpec s = markov(horizon, num_states, num_actions, std::move(initial),
                        std::move(expanded), std::move(cost));
  s.source_ = true;
  return s;
}

SystemSpec SystemSpec::full_history(int horizon, int num_states, int num_actions,
                                    std::vector<std::vector<double>> stages,
                                    std::vector<double> cost) {
  SystemSpec s;
  s.horizon_ = horizon;
  s.nx_ = num_states;
  s.nu_ = num_actions;
  s.mode_ = KernelMode::kFullHistory;
  s.stages_ = std::move(stages);
  s.cost_ = std::move(cost);
  s.validate();
  return s;
}

void SystemSpec::validate() const {
  if (horizon_ < 1) throw SpecError("horizon must be >= 1");
  if (nx_ < 1 || nu_ < 1) throw SpecError("alphabets must be nonempty");
  const std::size_t nx = nx_, nu = nu_;
  if (cost_.size() != nx * nu) throw SpecError("cost table must be states x actions");
  for (double c : cost_) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw SpecError("cost entries must be finite and nonnegative");
    }
  }
  if (mode_ == KernelMode::kMarkov) {
    if (initial_.size() != nx) throw SpecError("initial pmf has wrong length");
    if (transition_.size() != nx * nu * nx) {
      throw SpecError("transition table must be states x actions x states");
    }
    check_row(initial_, kRowTolerance, "initial", 0);
    for (std::size_t r = 0; r < nx * nu; ++r) {
      check_row({transition_.data() + r * nx, nx}, kRowTolerance, "transition", r);
    }
  } else {
    if (stages_.size() != static_cast<std::size_t>(horizon_)) {
      throw SpecError("full-history kernel needs one table per stage");
    }
    for (int t = 0; t < horizon_; ++t) {
      const std::uint64_t rows = saturating_pow(nx * nu, t);
      if (rows > kDefaultTrajectoryBudget || stages_[t].size() != rows * nx) {
        std::ostringstream os;
        os << "full-history kernel stage " << t << " must have " << rows
           << " rows of " << nx << " entries";
        throw SpecError(os.str());
      }
      for (std::uint64_t r = 0; r < rows; ++r) {
        check_row({stages_[t].data() + r * nx, nx}, kRowTolerance, "kernel", r);
      }
    }
  }
}

std::span<const double> SystemSpec::kernel_row(int t, std::uint64_t history) const {
  const std::size_t nx = nx_;
  if (mode_ == KernelMode::kFullHistory) {
    return {stages_[t].data() + history * nx, nx};
  }
  if (t == 0) return initial_;
  const std::uint64_t u = history % nu_;
  const std::uint64_t x = (history / nu_) % nx_;
  return {transition_.data() + (x * nu_ + u) * nx, nx};
}

double SystemSpec::max_cost() const {
  return *std::max_element(cost_.begin(), cost_.end());
}

std::uint64_t SystemSpec::trajectory_count() const {
  return saturating_pow(static_cast<std::uint64_t>(nx_) * nu_, horizon_);
}

std::uint64_t SystemSpec::policy_rows(int t) const {
  return saturating_pow(static_cast<std::uint64_t>(nx_) * nu_, t) * nx_;
}

void SystemSpec::check_budget(std::uint64_t budget) const {
  const std::uint64_t count = trajectory_count();
  if (count > budget) {
    std::ostringstream os;
    os << "trajectory space (|X||U|)^n = " << count << " exceeds the budget of "
       << budget << " entries";
    throw SpecError(os.str());
  }
}

// ---------------------------------------------------------------------------
// CausalPolicy

CausalPolicy::CausalPolicy(int horizon, int num_states, int num_actions)
    : horizon_(horizon), nx_(num_states), nu_(num_actions), table_(horizon) {
  for (int t = 0; t < horizon; ++t) {
    const std::uint64_t rows =
        saturating_pow(static_cast<std::uint64_t>(nx_) * nu_, t) * nx_;
    table_[t].assign(rows * nu_, 1.0 / nu_);
  }
}

void CausalPolicy::validate() const {
  for (int t = 0; t < horizon_; ++t) {
    for (std::uint64_t h = 0; h < rows(t); ++h) {
      check_row(row(t, h), kRowTolerance, "policy", h);
    }
  }
}

bool CausalPolicy::matches(const SystemSpec& spec) const {
  return horizon_ == spec.horizon() && nx_ == spec.num_states() &&
         nu_ == spec.num_actions();
}

// ---------------------------------------------------------------------------
// JointLaw

JointLaw::JointLaw(int horizon, int num_states, int num_actions,
                   std::vector<Entry> entries)
    : horizon_(horizon), nx_(num_states), nu_(num_actions),
      entries_(std::move(entries)) {}

double JointLaw::total_mass() const {
  double m = 0.0;
  for (const auto& e : entries_) m += e.second;
  return m;
}

Trajectory JointLaw::decode(std::uint64_t code) const {
  Trajectory tr;
  tr.states.resize(horizon_);
  tr.actions.resize(horizon_);
  for (int t = horizon_ - 1; t >= 0; --t) {
    tr.actions[t] = static_cast<int>(code % nu_);
    code /= nu_;
    tr.states[t] = static_cast<int>(code % nx_);
    code /= nx_;
  }
  return tr;
}

std::uint64_t JointLaw::encode(const Trajectory& traj) const {
  std::uint64_t code = 0;
  for (int t = 0; t < horizon_; ++t) {
    code = (code * nx_ + traj.states[t]) * nu_ + traj.actions[t];
  }
  return code;
}

std::uint64_t JointLaw::prefix_with_action(std::uint64_t code, int t) const {
  const std::uint64_t per_stage = static_cast<std::uint64_t>(nx_) * nu_;
  for (int s = horizon_ - 1; s > t; --s) code /= per_stage;
  return code;
}

std::uint64_t JointLaw::action_prefix(std::uint64_t code, int t) const {
  std::uint64_t prefix = prefix_with_action(code, t);
  std::uint64_t out = 0;
  std::uint64_t scale = 1;
  for (int s = t; s >= 0; --s) {
    out += (prefix % nu_) * scale;
    scale *= nu_;
    prefix /= static_cast<std::uint64_t>(nu_) * nx_;
  }
  return out;
}

JointLaw JointLaw::mix(const JointLaw& a, const JointLaw& b, double weight) {
  if (a.horizon_ != b.horizon_ || a.nx_ != b.nx_ || a.nu_ != b.nu_) {
    throw SpecError("cannot mix laws over different trajectory spaces");
  }
  std::vector<Entry> out;
  out.reserve(a.entries_.size() + b.entries_.size());
  std::size_t i = 0, j = 0;
  const double wa = weight, wb = 1.0 - weight;
  while (i < a.entries_.size() || j < b.entries_.size()) {
    if (j == b.entries_.size() ||
        (i < a.entries_.size() && a.entries_[i].first < b.entries_[j].first)) {
      out.emplace_back(a.entries_[i].first, wa * a.entries_[i].second);
      ++i;
    } else if (i == a.entries_.size() || b.entries_[j].first < a.entries_[i].first) {
      out.emplace_back(b.entries_[j].first, wb * b.entries_[j].second);
      ++j;
    } else {
      out.emplace_back(a.entries_[i].first,
                       wa * a.entries_[i].second + wb * b.entries_[j].second);
      ++i;
      ++j;
    }
    if (out.back().second <= 0.0) out.pop_back();
  }
  return JointLaw(a.horizon_, a.nx_, a.nu_, std::move(out));
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<double> trajectory_masses(const SystemSpec& spec,
                                      const CausalPolicy& policy,
                                      std::uint64_t budget) {
  spec.check_budget(budget);
  if (!policy.matches(spec)) {
    throw SpecError("policy alphabets or horizon do not match the system");
  }
  const int n = spec.horizon();
  const std::uint64_t nx = spec.num_states(), nu = spec.num_actions();

  std::vector<double> pre(1, 1.0);  // mass of (x_0,u_0,...,u_{t-1})
  std::vector<double> hx, hxu;
  for (int t = 0; t < n; ++t) {
    hx.assign(pre.size() * nx, 0.0);
    for (std::uint64_t h = 0; h < pre.size(); ++h) {
      if (pre[h] == 0.0) continue;
      const auto k = spec.kernel_row(t, h);
      for (std::uint64_t x = 0; x < nx; ++x) hx[h * nx + x] = pre[h] * k[x];
    }
    hxu.assign(hx.size() * nu, 0.0);
    for (std::uint64_t h = 0; h < hx.size(); ++h) {
      if (hx[h] == 0.0) continue;
      const auto row = policy.row(t, h);
      for (std::uint64_t u = 0; u < nu; ++u) hxu[h * nu + u] = hx[h] * row[u];
    }
    pre.swap(hxu);
  }
  return pre;
}

JointLaw evaluate_joint(const SystemSpec& spec, const CausalPolicy& policy,
                        std::uint64_t budget) {
  spec.check_budget(budget);
  if (!policy.matches(spec)) {
    throw SpecError("policy alphabets or horizon do not match the system");
  }
  policy.validate();
  const auto dense = trajectory_masses(spec, policy, budget);
  std::vector<JointLaw::Entry> entries;
  for (std::uint64_t c = 0; c < dense.size(); ++c) {
    if (dense[c] > 0.0) entries.emplace_back(c, dense[c]);
  }
  return JointLaw(spec.horizon(), spec.num_states(), spec.num_actions(),
                  std::move(entries));
}

double average_cost(const JointLaw& law, const SystemSpec& spec) {
  const int n = law.horizon();
  double total = 0.0;
  for (const auto& [code, p] : law.entries()) {
    const Trajectory tr = law.decode(code);
    double c = 0.0;
    for (int t = 0; t < n; ++t) c += spec.cost(tr.states[t], tr.actions[t]);
    total += p * c;
  }
  return total / n;
}

std::vector<std::pair<std::uint64_t, double>> action_marginal(const JointLaw& law,
                                                              int t) {
  std::vector<std::pair<std::uint64_t, double>> items;
  items.reserve(law.entries().size());
  for (const auto& [code, p] : law.entries()) {
    items.emplace_back(law.action_prefix(code, t), p);
  }
  return aggregate(std::move(items));
}

std::vector<std::pair<std::uint64_t, double>> history_marginal(const JointLaw& law,
                                                               int t) {
  std::vector<std::pair<std::uint64_t, double>> items;
  items.reserve(law.entries().size());
  for (const auto& [code, p] : law.entries()) {
    items.emplace_back(law.prefix_with_action(code, t) / law.num_actions(), p);
  }
  return aggregate(std::move(items));
}

namespace {

std::vector<std::pair<std::uint64_t, double>> full_prefix_marginal(
    const JointLaw& law, int t) {
  std::vector<std::pair<std::uint64_t, double>> items;
  items.reserve(law.entries().size());
  for (const auto& [code, p] : law.entries()) {
    items.emplace_back(law.prefix_with_action(code, t), p);
  }
  return aggregate(std::move(items));
}

}  // namespace

std::vector<double> conditional_action_entropies(const JointLaw& law) {
  const int n = law.horizon();
  const double cap = std::log2(static_cast<double>(law.num_actions()));
  std::vector<double> out(n);
  double prev = 0.0;
  for (int t = 0; t < n; ++t) {
    const double h = entropy_of(action_marginal(law, t));
    out[t] = std::clamp(h - prev, 0.0, cap);
    prev = h;
  }
  return out;
}

double action_entropy(const JointLaw& law) {
  return entropy_of(action_marginal(law, law.horizon() - 1));
}

std::vector<double> directed_information_terms(const JointLaw& law) {
  const int n = law.horizon();
  std::vector<double> out(n);
  double h_u_prev = 0.0;
  for (int t = 0; t < n; ++t) {
    const double h_u = entropy_of(action_marginal(law, t));
    const double h_xu = entropy_of(full_prefix_marginal(law, t));
    const double h_x = entropy_of(history_marginal(law, t));
    // I = H(U_t | U_[t-1]) - H(U_t | X_[t], U_[t-1]); cancellation can leave
    // a few ulps of negative noise.
    out[t] = std::max(0.0, (h_u - h_u_prev) - (h_xu - h_x));
    h_u_prev = h_u;
  }
  return out;
}

double directed_information(const JointLaw& law) {
  double s = 0.0;
  for (double v : directed_information_terms(law)) s += v;
  return s;
}

double entropy_bits(std::span<const double> pmf) {
  double h = 0.0;
  for (double p : pmf) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

}  // namespace ratecost
