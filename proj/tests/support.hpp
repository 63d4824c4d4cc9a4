#pragma once

// Fixtures shared by the test binaries: shipped specs, history-indexed policy
// builders and hand-rolled random generators.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "oracles.hpp"
#include "ratecost/fn_solver.hpp"
#include "ratecost/rng.hpp"
#include "ratecost/spec_io.hpp"
#include "ratecost/system_model.hpp"

namespace ratecost::testing {

inline std::filesystem::path spec_path(std::string_view name) {
  return std::filesystem::path(RATECOST_DATA_DIR) / "specs" / std::string(name);
}

inline SystemSpec shipped(std::string_view name) { return load_spec(spec_path(name)); }

/// The shipped controlled instances used by the end-to-end checks.
inline const std::vector<std::string>& shipped_plants() {
  static const std::vector<std::string> names = {"plant_n2.json", "plant_n3.json",
                                                 "plant_n4.json"};
  return names;
}

/// Row of a policy given x_0..x_t and u_0..u_{t-1}.
using PolicyFn = std::function<std::vector<double>(int t, const std::vector<int>& states,
                                                   const std::vector<int>& actions)>;

/// Splits a stage-t policy-row code into (x_0..x_t) and (u_0..u_{t-1}),
/// peeling digits from the least significant end.
inline void split_row(std::uint64_t code, int t, int nx, int nu, std::vector<int>& states,
                      std::vector<int>& actions) {
  states.assign(t + 1, 0);
  actions.assign(t, 0);
  states[t] = static_cast<int>(code % nx);
  code /= nx;
  for (int s = t - 1; s >= 0; --s) {
    actions[s] = static_cast<int>(code % nu);
    code /= nu;
    states[s] = static_cast<int>(code % nx);
    code /= nx;
  }
}

/// Inverse of split_row.
inline std::uint64_t join_row(const std::vector<int>& states, const std::vector<int>& actions,
                              int nx, int nu) {
  std::uint64_t code = 0;
  for (std::size_t s = 0; s < actions.size(); ++s) {
    code = (code * nx + states[s]) * nu + actions[s];
  }
  return code * nx + states.back();
}

inline CausalPolicy fill_policy(int horizon, int nx, int nu, const PolicyFn& f) {
  CausalPolicy p(horizon, nx, nu);
  std::vector<int> xs, us;
  for (int t = 0; t < horizon; ++t) {
    for (std::uint64_t r = 0; r < p.rows(t); ++r) {
      split_row(r, t, nx, nu, xs, us);
      const auto row = f(t, xs, us);
      for (int u = 0; u < nu; ++u) p.row(t, r)[u] = row[u];
    }
  }
  return p;
}

/// Strictly positive pmf, or one with some exact zeros when `zero_chance` > 0
/// (at least one entry always stays positive).
inline std::vector<double> random_pmf(Rng& rng, int k, double zero_chance = 0.0) {
  std::vector<double> p(k);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    p[i] = (rng.uniform() < zero_chance) ? 0.0 : 0.05 + rng.uniform();
    total += p[i];
  }
  if (total == 0.0) {
    p[rng.next() % k] = 1.0;
    total = 1.0;
  }
  for (double& v : p) v /= total;
  return p;
}

inline SystemSpec random_markov(Rng& rng, int horizon, int nx, int nu) {
  std::vector<double> initial = random_pmf(rng, nx);
  std::vector<double> transition;
  for (int i = 0; i < nx * nu; ++i) {
    const auto row = random_pmf(rng, nx, 0.2);
    transition.insert(transition.end(), row.begin(), row.end());
  }
  std::vector<double> cost(nx * nu);
  for (double& c : cost) c = std::floor(rng.uniform() * 8.0) / 4.0;
  return SystemSpec::markov(horizon, nx, nu, std::move(initial), std::move(transition),
                            std::move(cost));
}

inline CausalPolicy random_policy(Rng& rng, int horizon, int nx, int nu,
                                  double zero_chance = 0.0) {
  CausalPolicy p(horizon, nx, nu);
  for (int t = 0; t < horizon; ++t) {
    for (std::uint64_t r = 0; r < p.rows(t); ++r) {
      const auto row = random_pmf(rng, nu, zero_chance);
      for (int u = 0; u < nu; ++u) p.row(t, r)[u] = row[u];
    }
  }
  return p;
}

inline double binary_entropy_bits(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

/// Bernoulli(p) i.i.d. source over `horizon` stages with Hamming distortion.
inline SystemSpec bernoulli_source(int horizon, double p) {
  return SystemSpec::source(horizon, 2, 2, {1.0 - p, p}, {1.0 - p, p, 1.0 - p, p},
                            {0.0, 1.0, 1.0, 0.0});
}

/// Midpoint between the minimal cost and the best open-loop cost.
inline double mid_cost(const SystemSpec& spec) {
  return 0.5 * (min_cost_policy(spec).cost + best_open_loop_policy(spec).cost);
}

/// Grid slack of the brute-force oracle at `resolution` around a policy of a
/// binary-action spec: the smallest rate among the feasible corners of the
/// grid cell that encloses `policy`, minus `rate`. The grid minimum can
/// exceed the true optimum by at most this much. +inf when no corner of the
/// cell meets the cost level.
inline double grid_slack(const SystemSpec& spec, const CausalPolicy& policy, double rate,
                         double cost_level, double resolution) {
  std::vector<std::pair<int, std::uint64_t>> rows;
  for (int t = 0; t < spec.horizon(); ++t) {
    for (std::uint64_t r = 0; r < policy.rows(t); ++r) rows.emplace_back(t, r);
  }
  const std::size_t corners = std::size_t{1} << rows.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 0; mask < corners; ++mask) {
    CausalPolicy corner = policy;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto row = corner.row(rows[i].first, rows[i].second);
      const double cell = row[0] / resolution;
      double p = ((mask >> i) & 1) ? std::ceil(cell - 1e-9) : std::floor(cell + 1e-9);
      p = std::clamp(p * resolution, 0.0, 1.0);
      row[0] = p;
      row[1] = 1.0 - p;
    }
    const JointLaw law = evaluate_joint(spec, corner);
    if (average_cost(law, spec) > cost_level) continue;
    best = std::min(best, directed_information(law) / spec.horizon());
  }
  return best - rate;
}

/// Enumeration-oracle trajectory table of a Markov-mode spec.
inline oracle::Table oracle_table(const SystemSpec& spec, const oracle::PolicyFn& policy) {
  const auto init = spec.initial();
  const auto tr = spec.transition();
  return oracle::enumerate(spec.horizon(),
                           oracle::markov_kernel({init.begin(), init.end()},
                                                 {tr.begin(), tr.end()}, spec.num_states(),
                                                 spec.num_actions()),
                           policy);
}

/// Splits an oracle prefix (x_0,u_0,...,x_t) into states and actions.
inline void split_prefix(const oracle::Path& prefix, std::vector<int>& states,
                         std::vector<int>& actions) {
  states.clear();
  actions.clear();
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    (i % 2 == 0 ? states : actions).push_back(prefix[i]);
  }
}

}  // namespace ratecost::testing
