#include "ratecost/fn_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "ratecost/error.hpp"
#include "ratecost/rng.hpp"

namespace ratecost {

namespace {

// Dense history tree shared by the forward and backward passes.
//
// At stage t there are pre(t) = (nx*nu)^t pre-state histories, nx*pre(t)
// policy rows ("hx") and nx*nu*pre(t) row/action pairs ("hxu"). The child of
// hxu at stage t+1 with next state x' is the row hxu*nx + x'.
struct Tree {
  int n = 0;
  std::uint64_t nx = 0, nu = 0;
  std::vector<std::uint64_t> rows;             // hx count per stage
  std::vector<std::vector<double>> kernel;     // per stage: pre(t) x nx
  std::vector<std::uint64_t> leaf_action;      // final hxu -> code of u_[n]
  std::uint64_t action_codes = 0;
  std::vector<double> cost;                    // [x][u]

  Tree(const SystemSpec& spec, std::uint64_t budget) {
    spec.check_budget(budget);
    n = spec.horizon();
    nx = spec.num_states();
    nu = spec.num_actions();
    cost.assign(spec.cost_table().begin(), spec.cost_table().end());
    rows.resize(n);
    kernel.resize(n);
    std::uint64_t pre = 1;
    for (int t = 0; t < n; ++t) {
      rows[t] = pre * nx;
      kernel[t].resize(pre * nx);
      for (std::uint64_t h = 0; h < pre; ++h) {
        const auto k = spec.kernel_row(t, h);
        std::copy(k.begin(), k.end(), kernel[t].begin() + h * nx);
      }
      pre *= nx * nu;
    }
    action_codes = saturating_pow(nu, n);
    leaf_action.resize(rows[n - 1] * nu);
    for (std::uint64_t leaf = 0; leaf < leaf_action.size(); ++leaf) {
      std::uint64_t code = leaf, out = 0, scale = 1;
      for (int t = n - 1; t >= 0; --t) {
        out += (code % nu) * scale;
        scale *= nu;
        code /= nu * nx;
      }
      leaf_action[leaf] = out;
    }
  }

  double stage_cost(std::uint64_t hxu) const {
    return cost[((hxu / nu) % nx) * nu + hxu % nu];
  }
};

struct Workspace {
  std::vector<std::vector<double>> reach;  // per stage, per hx
  std::vector<double> leaf;                // per final hxu
  std::vector<double> action;              // P_U over u_[n]
  // Continuation values excluding the stage's own log-policy term:
  // G_t(hxu) = mu c(x_t,u_t) + E[future] (and - log2 P_U at the last stage).
  std::vector<std::vector<double>> cont;

  explicit Workspace(const Tree& tree) {
    reach.resize(tree.n);
    cont.resize(tree.n);
    for (int t = 0; t < tree.n; ++t) {
      reach[t].assign(tree.rows[t], 0.0);
      cont[t].assign(tree.rows[t] * tree.nu, 0.0);
    }
    leaf.assign(tree.rows[tree.n - 1] * tree.nu, 0.0);
    action.assign(tree.action_codes, 0.0);
  }
};

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

void forward(const Tree& tree, const CausalPolicy& policy, Workspace& ws) {
  const std::uint64_t nx = tree.nx, nu = tree.nu;
  for (std::uint64_t x = 0; x < nx; ++x) ws.reach[0][x] = tree.kernel[0][x];
  for (int t = 0; t < tree.n; ++t) {
    const bool last = t + 1 == tree.n;
    const auto& pol = policy.stage(t);
    const auto& reach = ws.reach[t];
    for (std::uint64_t h = 0; h < tree.rows[t]; ++h) {
      for (std::uint64_t u = 0; u < nu; ++u) {
        const std::uint64_t hxu = h * nu + u;
        const double m = reach[h] * pol[hxu];
        if (last) {
          ws.leaf[hxu] = m;
        } else {
          const double* k = tree.kernel[t + 1].data() + hxu * nx;
          double* next = ws.reach[t + 1].data() + hxu * nx;
          for (std::uint64_t x = 0; x < nx; ++x) next[x] = m * k[x];
        }
      }
    }
  }
  std::fill(ws.action.begin(), ws.action.end(), 0.0);
  for (std::uint64_t leaf = 0; leaf < ws.leaf.size(); ++leaf) {
    ws.action[tree.leaf_action[leaf]] += ws.leaf[leaf];
  }
}

// Fills cont[t] for every t >= down_to. Requires a fresh forward pass.
void backward(const Tree& tree, const CausalPolicy& policy, double mu, int down_to,
              Workspace& ws) {
  const std::uint64_t nx = tree.nx, nu = tree.nu;
  const int last = tree.n - 1;
  {
    auto& g = ws.cont[last];
    for (std::uint64_t hxu = 0; hxu < g.size(); ++hxu) {
      const double pu = ws.action[tree.leaf_action[hxu]];
      g[hxu] = mu * tree.stage_cost(hxu) - (pu > 0.0 ? std::log2(pu) : 0.0);
    }
  }
  for (int t = last - 1; t >= down_to; --t) {
    const auto& pol = policy.stage(t + 1);
    const auto& gnext = ws.cont[t + 1];
    auto& g = ws.cont[t];
    for (std::uint64_t hxu = 0; hxu < g.size(); ++hxu) {
      double future = 0.0;
      const double* k = tree.kernel[t + 1].data() + hxu * nx;
      for (std::uint64_t x = 0; x < nx; ++x) {
        if (k[x] == 0.0) continue;
        const std::uint64_t child = hxu * nx + x;
        double v = 0.0;
        for (std::uint64_t u = 0; u < nu; ++u) {
          const double p = pol[child * nu + u];
          if (p > 0.0) v += p * std::log2(p) + p * gnext[child * nu + u];
        }
        future += k[x] * v;
      }
      g[hxu] = mu * tree.stage_cost(hxu) + future;
    }
  }
}

double objective_from(const Tree& tree, const CausalPolicy& policy, const Workspace& ws) {
  const auto& pol = policy.stage(0);
  double total = 0.0;
  for (std::uint64_t x = 0; x < tree.nx; ++x) {
    const double k = tree.kernel[0][x];
    if (k == 0.0) continue;
    double v = 0.0;
    for (std::uint64_t u = 0; u < tree.nu; ++u) {
      const double p = pol[x * tree.nu + u];
      v += xlog2x(p) + p * ws.cont[0][x * tree.nu + u];
    }
    total += k * v;
  }
  return total / tree.n;
}

// Summed Frank-Wolfe gap of the stage blocks, bits per stage.
double block_gap(const Tree& tree, const CausalPolicy& policy, const Workspace& ws) {
  double gap = 0.0;
  for (int t = 0; t < tree.n; ++t) {
    const auto& pol = policy.stage(t);
    const auto& g = ws.cont[t];
    for (std::uint64_t h = 0; h < tree.rows[t]; ++h) {
      const double r = ws.reach[t][h];
      if (r == 0.0) continue;
      double mean = 0.0, lo = std::numeric_limits<double>::infinity();
      for (std::uint64_t u = 0; u < tree.nu; ++u) {
        const double p = pol[h * tree.nu + u];
        const double w = std::log2(p) + g[h * tree.nu + u];
        mean += p * w;
        lo = std::min(lo, w);
      }
      gap += r * (mean - lo);
    }
  }
  return gap / tree.n;
}

void floor_rows(std::vector<double>& stage, std::uint64_t nu, double floor) {
  for (std::uint64_t h = 0; h < stage.size() / nu; ++h) {
    double s = 0.0;
    for (std::uint64_t u = 0; u < nu; ++u) {
      double& p = stage[h * nu + u];
      p = std::max(p, floor);
      s += p;
    }
    for (std::uint64_t u = 0; u < nu; ++u) stage[h * nu + u] /= s;
  }
}

// Exact minimizer of stage t's block for the current action marginal:
// pi_t(u|h) proportional to 2^(-G_t(h,u)).
void update_stage(const Tree& tree, CausalPolicy& policy, const Workspace& ws, int t,
                  double floor) {
  auto& pol = policy.stage(t);
  const auto& g = ws.cont[t];
  const std::uint64_t nu = tree.nu;
  for (std::uint64_t h = 0; h < tree.rows[t]; ++h) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::uint64_t u = 0; u < nu; ++u) lo = std::min(lo, g[h * nu + u]);
    double s = 0.0;
    for (std::uint64_t u = 0; u < nu; ++u) {
      const double w = std::exp2(-(g[h * nu + u] - lo));
      pol[h * nu + u] = w;
      s += w;
    }
    for (std::uint64_t u = 0; u < nu; ++u) pol[h * nu + u] /= s;
  }
  floor_rows(pol, nu, floor);
}

struct Descent {
  CausalPolicy policy;
  double objective = 0.0;
  double gap = 0.0;
  int sweeps = 0;
  bool converged = false;
};

Descent descend(const Tree& tree, CausalPolicy policy, double mu,
                const SolverOptions& opts) {
  Workspace ws(tree);
  for (int t = 0; t < tree.n; ++t) floor_rows(policy.stage(t), tree.nu, opts.policy_floor);
  Descent out;
  for (int sweep = 0;; ++sweep) {
    forward(tree, policy, ws);
    backward(tree, policy, mu, 0, ws);
    out.gap = block_gap(tree, policy, ws);
    out.objective = objective_from(tree, policy, ws);
    out.sweeps = sweep;
    if (out.gap <= opts.gap_tolerance) {
      out.converged = true;
      break;
    }
    if (sweep >= opts.max_sweeps) break;
    for (int t = tree.n - 1; t >= 0; --t) {
      if (t != tree.n - 1) {
        forward(tree, policy, ws);
        backward(tree, policy, mu, t, ws);
      }
      update_stage(tree, policy, ws, t, opts.policy_floor);
    }
  }
  out.policy = std::move(policy);
  return out;
}

CausalPolicy random_policy(const SystemSpec& spec, Rng& rng) {
  CausalPolicy p(spec.horizon(), spec.num_states(), spec.num_actions());
  const std::uint64_t nu = spec.num_actions();
  for (int t = 0; t < spec.horizon(); ++t) {
    auto& st = p.stage(t);
    for (std::uint64_t h = 0; h < st.size() / nu; ++h) {
      double s = 0.0;
      for (std::uint64_t u = 0; u < nu; ++u) {
        st[h * nu + u] = 0.05 + rng.uniform();
        s += st[h * nu + u];
      }
      for (std::uint64_t u = 0; u < nu; ++u) st[h * nu + u] /= s;
    }
  }
  return p;
}

RateCostPoint exact_point(const SystemSpec& spec, CausalPolicy policy, double mu,
                          std::uint64_t budget) {
  const JointLaw law = evaluate_joint(spec, policy, budget);
  RateCostPoint pt;
  pt.rate = directed_information(law) / spec.horizon();
  pt.cost = average_cost(law, spec);
  pt.multiplier = mu;
  pt.policy = std::move(policy);
  return pt;
}

std::uint64_t mu_key(double mu) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(mu));
  std::memcpy(&bits, &mu, sizeof(bits));
  return bits;
}

// Lower-left convex envelope in the (cost, rate) plane; rate nonincreasing.
std::vector<RateCostPoint> lower_envelope(std::vector<RateCostPoint> pts) {
  std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.rate < b.rate;
  });
  std::vector<RateCostPoint> hull;
  for (auto& p : pts) {
    if (!hull.empty() && p.rate >= hull.back().rate) continue;  // dominated
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      const double cross =
          (b.cost - a.cost) * (p.rate - a.rate) - (b.rate - a.rate) * (p.cost - a.cost);
      if (cross <= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(std::move(p));
  }
  return hull;
}

}  // namespace

// ---------------------------------------------------------------------------

std::uint64_t policy_parameter_count(const SystemSpec& spec) {
  std::uint64_t total = 0;
  for (int t = 0; t < spec.horizon(); ++t) {
    total += spec.policy_rows(t) * (spec.num_actions() - 1);
  }
  return total;
}

CostOptimum min_cost_policy(const SystemSpec& spec) {
  const Tree tree(spec, kDefaultTrajectoryBudget);
  const std::uint64_t nx = tree.nx, nu = tree.nu;
  CostOptimum out;
  out.policy = CausalPolicy(spec.horizon(), spec.num_states(), spec.num_actions());
  std::vector<double> next_value;  // per hx at stage t+1
  for (int t = tree.n - 1; t >= 0; --t) {
    std::vector<double> value(tree.rows[t]);
    auto& pol = out.policy.stage(t);
    for (std::uint64_t h = 0; h < tree.rows[t]; ++h) {
      double best = std::numeric_limits<double>::infinity();
      std::uint64_t arg = 0;
      for (std::uint64_t u = 0; u < nu; ++u) {
        const std::uint64_t hxu = h * nu + u;
        double v = tree.stage_cost(hxu);
        if (t + 1 < tree.n) {
          const double* k = tree.kernel[t + 1].data() + hxu * nx;
          for (std::uint64_t x = 0; x < nx; ++x) {
            if (k[x] > 0.0) v += k[x] * next_value[hxu * nx + x];
          }
        }
        if (v < best) {
          best = v;
          arg = u;
        }
      }
      value[h] = best;
      for (std::uint64_t u = 0; u < nu; ++u) pol[h * nu + u] = u == arg ? 1.0 : 0.0;
    }
    next_value.swap(value);
  }
  double total = 0.0;
  for (std::uint64_t x = 0; x < nx; ++x) total += tree.kernel[0][x] * next_value[x];
  out.cost = total / tree.n;
  return out;
}

CostOptimum best_open_loop_policy(const SystemSpec& spec) {
  const Tree tree(spec, kDefaultTrajectoryBudget);
  const std::uint64_t nx = tree.nx, nu = tree.nu;
  // Expected total cost of every action sequence, accumulated over the
  // kernel-only mass of each trajectory.
  std::vector<double> by_sequence(tree.action_codes, 0.0);
  std::vector<double> mass(1, 1.0), cost_sum(1, 0.0);
  for (int t = 0; t < tree.n; ++t) {
    std::vector<double> m2(mass.size() * nx * nu), c2(mass.size() * nx * nu);
    for (std::uint64_t pre = 0; pre < mass.size(); ++pre) {
      for (std::uint64_t x = 0; x < nx; ++x) {
        const double mx = mass[pre] * tree.kernel[t][pre * nx + x];
        for (std::uint64_t u = 0; u < nu; ++u) {
          const std::uint64_t hxu = (pre * nx + x) * nu + u;
          m2[hxu] = mx;
          c2[hxu] = cost_sum[pre] + tree.cost[x * nu + u];
        }
      }
    }
    mass.swap(m2);
    cost_sum.swap(c2);
  }
  for (std::uint64_t leaf = 0; leaf < mass.size(); ++leaf) {
    by_sequence[tree.leaf_action[leaf]] += mass[leaf] * cost_sum[leaf];
  }
  std::uint64_t best = 0;
  for (std::uint64_t s = 1; s < by_sequence.size(); ++s) {
    if (by_sequence[s] < by_sequence[best]) best = s;
  }
  std::vector<std::uint64_t> seq(tree.n);
  for (int t = tree.n - 1; t >= 0; --t) {
    seq[t] = best % nu;
    best /= nu;
  }
  CostOptimum out;
  out.policy = CausalPolicy(spec.horizon(), spec.num_states(), spec.num_actions());
  for (int t = 0; t < tree.n; ++t) {
    auto& pol = out.policy.stage(t);
    for (std::uint64_t h = 0; h < tree.rows[t]; ++h) {
      for (std::uint64_t u = 0; u < nu; ++u) pol[h * nu + u] = u == seq[t] ? 1.0 : 0.0;
    }
  }
  out.cost = exact_point(spec, out.policy, 0.0, kDefaultTrajectoryBudget).cost;
  return out;
}

CausalPolicy mix_policies(const SystemSpec& spec, const CausalPolicy& a,
                          const CausalPolicy& b, double weight) {
  const Tree tree(spec, kDefaultTrajectoryBudget);
  Workspace wa(tree), wb(tree);
  forward(tree, a, wa);
  forward(tree, b, wb);
  CausalPolicy out(spec.horizon(), spec.num_states(), spec.num_actions());
  const std::uint64_t nu = tree.nu;
  for (int t = 0; t < tree.n; ++t) {
    const auto& pa = a.stage(t);
    const auto& pb = b.stage(t);
    auto& po = out.stage(t);
    for (std::uint64_t h = 0; h < tree.rows[t]; ++h) {
      const double ra = weight * wa.reach[t][h];
      const double rb = (1.0 - weight) * wb.reach[t][h];
      const double den = ra + rb;
      for (std::uint64_t u = 0; u < nu; ++u) {
        const std::uint64_t i = h * nu + u;
        po[i] = den > 0.0 ? (ra * pa[i] + rb * pb[i]) / den
                          : weight * pa[i] + (1.0 - weight) * pb[i];
      }
      // Renormalize away rounding so the row passes validation.
      double s = 0.0;
      for (std::uint64_t u = 0; u < nu; ++u) s += po[h * nu + u];
      for (std::uint64_t u = 0; u < nu; ++u) po[h * nu + u] /= s;
    }
  }
  return out;
}

namespace {

// The objective as a leaf sum
//   (1/n) sum_leaf P(leaf) [sum_t log2 pi_t + mu sum_t c_t - log2 P_U(u_[n])]
// with P the raw product of kernels and policy entries. For normalized
// policies this is the Lagrangian; the extension to raw entries makes the
// gradient below exact in every coordinate. Returns P(leaf) * f(leaf) per
// final row/action pair.
std::vector<double> leaf_terms(const Tree& tree, const CausalPolicy& policy, double mu,
                               const Workspace& ws) {
  const std::uint64_t nx = tree.nx, nu = tree.nu;
  std::vector<double> past(tree.rows[0], 0.0);
  std::vector<double> terms(ws.leaf.size(), 0.0);
  for (int t = 0; t < tree.n; ++t) {
    const auto& pol = policy.stage(t);
    const bool last = t + 1 == tree.n;
    std::vector<double> next_past;
    if (!last) next_past.assign(tree.rows[t + 1], 0.0);
    for (std::uint64_t h = 0; h < tree.rows[t]; ++h) {
      for (std::uint64_t u = 0; u < nu; ++u) {
        const std::uint64_t hxu = h * nu + u;
        const double p = pol[hxu];
        if (p <= 0.0) continue;
        const double carried = past[h] + std::log2(p) + mu * tree.stage_cost(hxu);
        if (last) {
          const double m = ws.leaf[hxu];
          if (m > 0.0) terms[hxu] = m * (carried - std::log2(ws.action[tree.leaf_action[hxu]]));
        } else {
          for (std::uint64_t x = 0; x < nx; ++x) next_past[hxu * nx + x] = carried;
        }
      }
    }
    past.swap(next_past);
  }
  return terms;
}

}  // namespace

double lagrangian_value(const SystemSpec& spec, const CausalPolicy& policy, double mu) {
  const Tree tree(spec, kDefaultTrajectoryBudget);
  Workspace ws(tree);
  forward(tree, policy, ws);
  double total = 0.0;
  for (double v : leaf_terms(tree, policy, mu, ws)) total += v;
  return total / tree.n;
}

std::vector<std::vector<double>> lagrangian_gradient(const SystemSpec& spec,
                                                     const CausalPolicy& policy,
                                                     double mu) {
  const Tree tree(spec, kDefaultTrajectoryBudget);
  Workspace ws(tree);
  forward(tree, policy, ws);
  const std::uint64_t nx = tree.nx, nu = tree.nu;
  // Only leaves below (h, u) depend on pi_t(u|h), each through a factor
  // pi_t(u|h) in P and a term log2 pi_t(u|h) in f. The 1/ln 2 pieces from the
  // log-policy term and from log2 P_U cancel, leaving
  //   d/d pi_t(u|h) = (1/n) sum_{leaf below (h,u)} P(leaf) f(leaf) / pi_t(u|h).
  std::vector<std::vector<double>> below(tree.n);
  below[tree.n - 1] = leaf_terms(tree, policy, mu, ws);
  for (int t = tree.n - 2; t >= 0; --t) {
    below[t].assign(tree.rows[t] * nu, 0.0);
    const auto& next = below[t + 1];
    for (std::uint64_t hxu = 0; hxu < below[t].size(); ++hxu) {
      double s = 0.0;
      for (std::uint64_t k = 0; k < nx * nu; ++k) s += next[hxu * nx * nu + k];
      below[t][hxu] = s;
    }
  }
  std::vector<std::vector<double>> grad(tree.n);
  for (int t = 0; t < tree.n; ++t) {
    const auto& pol = policy.stage(t);
    grad[t].resize(below[t].size());
    for (std::uint64_t hxu = 0; hxu < grad[t].size(); ++hxu) {
      // The log-policy term dominates at a zero entry.
      grad[t][hxu] = pol[hxu] > 0.0 ? below[t][hxu] / (pol[hxu] * tree.n)
                                    : -std::numeric_limits<double>::infinity();
    }
  }
  return grad;
}

RateCostPoint solve_lagrangian(const SystemSpec& spec, double mu,
                               const SolverOptions& opts,
                               const CausalPolicy* warm_start) {
  if (!(mu >= 0.0)) throw SpecError("multiplier must be nonnegative");
  spec.check_budget(opts.budget);
  if (mu == 0.0) {
    // Zero rate is the global minimum; among the rate-0 policies report the
    // cheapest one.
    auto ol = best_open_loop_policy(spec);
    return exact_point(spec, std::move(ol.policy), 0.0, opts.budget);
  }
  if (std::isinf(mu)) {
    auto mc = min_cost_policy(spec);
    return exact_point(spec, std::move(mc.policy), mu, opts.budget);
  }

  const Tree tree(spec, opts.budget);
  std::vector<CausalPolicy> starts;
  if (warm_start != nullptr) {
    if (!warm_start->matches(spec)) throw SpecError("warm start does not match system");
    starts.push_back(*warm_start);
  }
  for (int k = 0; k < opts.restarts; ++k) {
    Rng rng(derive_seed(opts.seed, "restart", {static_cast<std::uint64_t>(k), mu_key(mu)}));
    starts.push_back(random_policy(spec, rng));
  }
  if (starts.empty()) starts.emplace_back(spec.horizon(), spec.num_states(), spec.num_actions());

  std::optional<Descent> best;
  for (auto& s : starts) {
    Descent d = descend(tree, std::move(s), mu, opts);
    if (!best || d.objective < best->objective - 1e-15) best = std::move(d);
  }
  if (!best->converged && opts.strict) {
    std::ostringstream os;
    os << "mirror descent did not converge for mu = " << mu << " after "
       << best->sweeps << " sweeps (gap " << best->gap << " bits)";
    throw ConvergenceError(os.str());
  }
  RateCostPoint pt = exact_point(spec, std::move(best->policy), mu, opts.budget);
  pt.converged = best->converged;
  pt.sweeps = best->sweeps;
  pt.gap = best->gap;
  return pt;
}

RateCostCurve rate_cost_curve(const SystemSpec& spec, const SolverOptions& opts) {
  spec.check_budget(opts.budget);
  RateCostCurve curve;
  curve.sweep.push_back(solve_lagrangian(spec, kInfiniteMultiplier, opts));
  const CausalPolicy* warm = nullptr;
  for (int k = opts.sweep_max_exponent; k >= opts.sweep_min_exponent; --k) {
    curve.sweep.push_back(solve_lagrangian(spec, std::ldexp(1.0, k), opts, warm));
    warm = &curve.sweep.back().policy;
  }
  curve.sweep.push_back(solve_lagrangian(spec, 0.0, opts));
  curve.points = lower_envelope(curve.sweep);
  return curve;
}

RateCostPoint solve_fn(const SystemSpec& spec, double cost_level,
                       const SolverOptions& opts, const RateCostCurve* curve) {
  if (!(cost_level >= 0.0)) throw SpecError("cost level must be nonnegative");
  spec.check_budget(opts.budget);
  const CostOptimum cheapest = min_cost_policy(spec);
  if (cost_level < cheapest.cost - 1e-12) {
    std::ostringstream os;
    os << "cost level " << cost_level << " is below the minimal achievable cost "
       << cheapest.cost;
    throw InfeasibleError(os.str(), cheapest.cost);
  }

  RateCostCurve local;
  if (curve == nullptr) {
    local = rate_cost_curve(spec, opts);
    curve = &local;
  }
  const auto& env = curve->points;

  // Envelope vertices bracketing the cost level: a at or below, b above.
  std::size_t ia = 0;
  for (std::size_t i = 0; i < env.size(); ++i) {
    if (env[i].cost <= cost_level) ia = i;
  }
  RateCostPoint a = env[ia];
  if (ia + 1 == env.size() || a.cost >= cost_level - opts.cost_tolerance) {
    return a;
  }
  RateCostPoint b = env[ia + 1];

  const double mu_cap = std::ldexp(1.0, opts.sweep_max_exponent + 1);
  const double mu_floor = std::ldexp(1.0, opts.sweep_min_exponent - 1);
  for (int it = 0; it < opts.max_bisections; ++it) {
    if (cost_level - a.cost <= opts.cost_tolerance) break;
    const double hi = std::isinf(a.multiplier) ? mu_cap : a.multiplier;
    const double lo = b.multiplier == 0.0 ? mu_floor : b.multiplier;
    if (hi / lo < 1.0 + 1e-9) break;
    const double mid = std::sqrt(hi * lo);
    RateCostPoint m = solve_lagrangian(spec, mid, opts, &a.policy);
    if (m.cost <= cost_level) {
      if (m.rate <= a.rate) a = std::move(m);
      else a.multiplier = mid;  // keep the better policy, tighten the bracket
    } else {
      if (m.rate <= b.rate || m.cost < b.cost) b = std::move(m);
      else b.multiplier = mid;
    }
  }

  RateCostPoint best = a;
  if (b.cost > cost_level && a.cost < cost_level) {
    double w = (b.cost - cost_level) / (b.cost - a.cost);
    RateCostPoint mixed;
    for (int guard = 0; guard < 64; ++guard) {
      mixed = exact_point(spec, mix_policies(spec, a.policy, b.policy, w), 0.0,
                          opts.budget);
      if (mixed.cost <= cost_level) break;
      w = std::min(1.0, w + std::max(1e-15, 4.0 * (mixed.cost - cost_level) /
                                                (b.cost - a.cost)));
    }
    mixed.multiplier = (a.rate - b.rate) / (b.cost - a.cost);
    mixed.converged = a.converged && b.converged;
    mixed.gap = std::max(a.gap, b.gap);
    mixed.sweeps = std::max(a.sweeps, b.sweeps);
    if (mixed.cost <= cost_level && mixed.rate < best.rate) best = std::move(mixed);
  }
  if (!best.converged && opts.strict) {
    throw ConvergenceError("solver did not converge at the requested cost level");
  }
  return best;
}

// ---------------------------------------------------------------------------
// Grid oracle

namespace {

void compositions(int total, int parts, std::vector<int>& cur,
                  std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int k = total; k >= 0; --k) {
    cur.push_back(k);
    compositions(total - k, parts - 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

RateCostPoint brute_force_fn(const SystemSpec& spec, double cost_level,
                             double resolution, std::uint64_t max_grid_points) {
  const std::uint64_t params = policy_parameter_count(spec);
  if (params > 12) {
    std::ostringstream os;
    os << "instance too large for the grid oracle: " << params
       << " free policy parameters (limit 12)";
    throw SpecError(os.str());
  }
  if (!(resolution > 0.0) || resolution > 1.0) throw SpecError("resolution must be in (0, 1]");
  const int steps = static_cast<int>(std::lround(1.0 / resolution));
  if (std::abs(steps * resolution - 1.0) > 1e-9) {
    throw SpecError("resolution must divide 1");
  }
  const CostOptimum cheapest = min_cost_policy(spec);
  if (cost_level < cheapest.cost - 1e-12) {
    std::ostringstream os;
    os << "cost level " << cost_level << " is below the minimal achievable cost "
       << cheapest.cost;
    throw InfeasibleError(os.str(), cheapest.cost);
  }

  const int n = spec.horizon();
  const std::uint64_t nx = spec.num_states(), nu = spec.num_actions();
  std::vector<std::vector<int>> simplex;
  std::vector<int> cur;
  compositions(steps, static_cast<int>(nu), cur, simplex);

  std::vector<std::pair<int, std::uint64_t>> row_index;  // (stage, row)
  for (int t = 0; t < n; ++t) {
    for (std::uint64_t h = 0; h < spec.policy_rows(t); ++h) row_index.emplace_back(t, h);
  }
  const std::uint64_t total_points = saturating_pow(simplex.size(), row_index.size());
  if (total_points > max_grid_points) {
    std::ostringstream os;
    os << "grid has " << total_points << " points (limit " << max_grid_points << ")";
    throw SpecError(os.str());
  }

  // Precomputed projections of every trajectory code.
  const std::uint64_t leaves = spec.trajectory_count();
  const JointLaw shape(n, spec.num_states(), spec.num_actions(), {});
  std::vector<std::vector<std::uint64_t>> key_u(n), key_xu(n), key_x(n);
  std::vector<std::uint64_t> size_u(n), size_xu(n), size_x(n);
  std::vector<double> traj_cost(leaves);
  for (int t = 0; t < n; ++t) {
    key_u[t].resize(leaves);
    key_xu[t].resize(leaves);
    key_x[t].resize(leaves);
    size_u[t] = saturating_pow(nu, t + 1);
    size_xu[t] = saturating_pow(nx * nu, t + 1);
    size_x[t] = size_xu[t] / nu;
  }
  for (std::uint64_t c = 0; c < leaves; ++c) {
    const Trajectory tr = shape.decode(c);
    double sum = 0.0;
    for (int t = 0; t < n; ++t) {
      key_u[t][c] = shape.action_prefix(c, t);
      key_xu[t][c] = shape.prefix_with_action(c, t);
      key_x[t][c] = key_xu[t][c] / nu;
      sum += spec.cost(tr.states[t], tr.actions[t]);
    }
    traj_cost[c] = sum / n;
  }
  std::vector<std::vector<double>> mu_(n), mxu(n), mx(n);
  for (int t = 0; t < n; ++t) {
    mu_[t].resize(size_u[t]);
    mxu[t].resize(size_xu[t]);
    mx[t].resize(size_x[t]);
  }
  auto entropy = [](const std::vector<double>& v) {
    double h = 0.0;
    for (double p : v) {
      if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
  };

  CausalPolicy policy(n, spec.num_states(), spec.num_actions());
  std::vector<std::size_t> digit(row_index.size(), 0);
  auto apply_digit = [&](std::size_t r) {
    auto row = policy.row(row_index[r].first, row_index[r].second);
    for (std::uint64_t u = 0; u < nu; ++u) row[u] = simplex[digit[r]][u] * resolution;
  };
  for (std::size_t r = 0; r < row_index.size(); ++r) apply_digit(r);

  double best_rate = std::numeric_limits<double>::infinity();
  double best_cost = 0.0;
  CausalPolicy best_policy = policy;
  for (std::uint64_t point = 0; point < total_points; ++point) {
    const auto masses = trajectory_masses(spec, policy);
    double cost = 0.0;
    for (std::uint64_t c = 0; c < leaves; ++c) cost += masses[c] * traj_cost[c];
    if (cost <= cost_level + 1e-12) {
      double info = 0.0, h_prev_u = 0.0;
      for (int t = 0; t < n; ++t) {
        std::fill(mu_[t].begin(), mu_[t].end(), 0.0);
        std::fill(mxu[t].begin(), mxu[t].end(), 0.0);
        std::fill(mx[t].begin(), mx[t].end(), 0.0);
        for (std::uint64_t c = 0; c < leaves; ++c) {
          const double p = masses[c];
          if (p == 0.0) continue;
          mu_[t][key_u[t][c]] += p;
          mxu[t][key_xu[t][c]] += p;
          mx[t][key_x[t][c]] += p;
        }
        const double hu = entropy(mu_[t]);
        info += (hu - h_prev_u) - (entropy(mxu[t]) - entropy(mx[t]));
        h_prev_u = hu;
      }
      const double rate = std::max(0.0, info) / n;
      if (rate < best_rate - 1e-15 ||
          (std::abs(rate - best_rate) <= 1e-15 && cost < best_cost)) {
        best_rate = rate;
        best_cost = cost;
        best_policy = policy;
      }
    }
    // Odometer increment over all rows.
    for (std::size_t r = 0; r < digit.size(); ++r) {
      if (++digit[r] < simplex.size()) {
        apply_digit(r);
        break;
      }
      digit[r] = 0;
      apply_digit(r);
    }
  }
  if (std::isinf(best_rate)) {
    throw InfeasibleError("no grid policy meets the cost level", cheapest.cost);
  }
  return exact_point(spec, std::move(best_policy), std::numeric_limits<double>::quiet_NaN(),
                     kDefaultTrajectoryBudget);
}

}  // namespace ratecost
