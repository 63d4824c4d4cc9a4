#include "ratecost/timeshare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "ratecost/error.hpp"

namespace ratecost {

ZPoint evaluate_zpoint(const SystemSpec& spec, const CausalPolicy& deterministic,
                       std::uint64_t id, std::uint64_t budget) {
  const JointLaw law = evaluate_joint(spec, deterministic, budget);
  ZPoint p;
  p.id = id;
  p.r = action_entropy(law) / spec.horizon();
  p.d = average_cost(law, spec);
  return p;
}

int orientation(double ar, double ad, double br, double bd, double cr, double cd) {
  const double left = (br - ar) * (cd - ad);
  const double right = (bd - ad) * (cr - ar);
  const double det = left - right;
  // Forward error bound for the two-product difference with rounded inputs.
  const double bound = 8.0 * std::numeric_limits<double>::epsilon() *
                       (std::abs(left) + std::abs(right));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  using boost::multiprecision::cpp_rational;
  const cpp_rational x1 = cpp_rational(br) - cpp_rational(ar);
  const cpp_rational y1 = cpp_rational(bd) - cpp_rational(ad);
  const cpp_rational x2 = cpp_rational(cr) - cpp_rational(ar);
  const cpp_rational y2 = cpp_rational(cd) - cpp_rational(ad);
  const cpp_rational exact = x1 * y2 - y1 * x2;
  return exact > 0 ? 1 : (exact < 0 ? -1 : 0);
}

std::vector<std::size_t> convex_hull(const std::vector<ZPoint>& points) {
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].r != points[b].r) return points[a].r < points[b].r;
    return points[a].d < points[b].d;
  });
  idx.erase(std::unique(idx.begin(), idx.end(),
                        [&](std::size_t a, std::size_t b) {
                          return points[a].r == points[b].r && points[a].d == points[b].d;
                        }),
            idx.end());
  if (idx.size() < 3) return idx;

  auto turn = [&](std::size_t a, std::size_t b, std::size_t c) {
    return orientation(points[a].r, points[a].d, points[b].r, points[b].d, points[c].r,
                       points[c].d);
  };
  std::vector<std::size_t> hull(2 * idx.size());
  std::size_t k = 0;
  for (std::size_t i : idx) {
    while (k >= 2 && turn(hull[k - 2], hull[k - 1], i) <= 0) --k;
    hull[k++] = i;
  }
  for (std::size_t j = idx.size() - 1, lower = k + 1; j-- > 0;) {
    const std::size_t i = idx[j];
    while (k >= lower && turn(hull[k - 2], hull[k - 1], i) <= 0) --k;
    hull[k++] = i;
  }
  hull.resize(k - 1);
  return hull;
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

namespace {

struct Candidate {
  std::size_t lo = 0, hi = 0;
  double lambda = 1.0;
  double r = 0.0, d = 0.0;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.r != b.r) return a.r < b.r;
  return a.d < b.d;
}

}  // namespace

TimeShareSelector caratheodory_reduce(const std::vector<ZPoint>& points,
                                      const std::vector<double>& weights,
                                      double cost_level, double epsilon,
                                      double d_tolerance) {
  if (points.empty()) throw SpecError("empty point cloud");
  if (weights.size() != points.size()) throw SpecError("one weight per point required");
  if (!(epsilon > 0.0)) throw SpecError("epsilon must be positive");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw SpecError("weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw SpecError("weights must not all vanish");

  TimeShareSelector sel;
  sel.epsilon = epsilon;
  sel.effective_epsilon = epsilon;
  double r_lo = std::numeric_limits<double>::infinity(), r_hi = -r_lo;
  double d_lo = r_lo, d_hi = -r_lo;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sel.r_bar += weights[i] / total * points[i].r;
    sel.d_bar += weights[i] / total * points[i].d;
    if (weights[i] > 0.0) {
      r_lo = std::min(r_lo, points[i].r);
      r_hi = std::max(r_hi, points[i].r);
      d_lo = std::min(d_lo, points[i].d);
      d_hi = std::max(d_hi, points[i].d);
    }
  }
  // Rounding must not carry the barycenter outside the cloud's bounding box;
  // for identical points this makes it exact.
  sel.r_bar = std::clamp(sel.r_bar, r_lo, r_hi);
  sel.d_bar = std::clamp(sel.d_bar, d_lo, d_hi);

  // Feasible witness (r_w, d_w) in the hull with d_w <= D.
  double witness_r = sel.r_bar;
  if (sel.d_bar > cost_level) {
    if (sel.d_bar > cost_level + d_tolerance) {
      std::ostringstream os;
      os << "barycenter cost " << sel.d_bar << " exceeds the cost level " << cost_level;
      throw VerificationError(os.str());
    }
    // Pull the barycenter toward a cheaper point, choosing the one that
    // costs the least rate.
    double best_shift = std::numeric_limits<double>::infinity();
    std::size_t pick = points.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!(points[i].d < cost_level)) continue;
      const double beta = (sel.d_bar - cost_level) / (sel.d_bar - points[i].d);
      const double shift = beta * std::abs(points[i].r - sel.r_bar);
      if (shift < best_shift) {
        best_shift = shift;
        pick = i;
      }
    }
    if (pick == points.size()) {
      throw VerificationError("no cloud point has cost below the cost level");
    }
    const double beta = (sel.d_bar - cost_level) / (sel.d_bar - points[pick].d);
    witness_r = (1.0 - beta) * sel.r_bar + beta * points[pick].r;
    // Radius below which the overshoot costs at most epsilon/2 of rate.
    const double spread = std::abs(points[pick].r - sel.r_bar) + 0.5 * epsilon;
    sel.delta = 0.1;
    for (int k = 0; k < 200 && sel.delta / (cost_level - points[pick].d) * spread > 0.5 * epsilon;
         ++k) {
      sel.delta *= 0.5;
    }
    sel.effective_epsilon = std::max(epsilon, witness_r - sel.r_bar);
    sel.witness = WitnessCase::kShifted;
  }

  // Lexicographic minimum of the hull intersected with {d <= D}.
  const std::vector<std::size_t> hull = convex_hull(points);
  std::optional<Candidate> best;
  auto offer = [&](const Candidate& c) {
    if (!best || better(c, *best)) best = c;
  };
  for (std::size_t i : hull) {
    if (points[i].d <= cost_level) offer({i, i, 1.0, points[i].r, points[i].d});
  }
  const std::size_t edges = hull.size() < 2 ? 0 : (hull.size() == 2 ? 1 : hull.size());
  for (std::size_t e = 0; e < edges; ++e) {
    std::size_t a = hull[e], b = hull[(e + 1) % hull.size()];
    if (points[a].d > points[b].d) std::swap(a, b);
    if (!(points[a].d < cost_level && points[b].d > cost_level)) continue;
    const ZPoint& lo = points[a];
    const ZPoint& hi = points[b];
    double lambda = (hi.d - cost_level) / (hi.d - lo.d);
    auto cost_at = [&](double l) { return l * lo.d + (1.0 - l) * hi.d; };
    while (lambda < 1.0 && cost_at(lambda) > cost_level) lambda = std::nextafter(lambda, 2.0);
    lambda = std::min(lambda, 1.0);
    offer({a, b, lambda, lambda * lo.r + (1.0 - lambda) * hi.r, cost_at(lambda)});
  }
  if (!best) throw VerificationError("no point of the hull meets the cost level");

  sel.index0 = best->lo;
  sel.index1 = best->hi;
  sel.z0 = points[best->lo].id;
  sel.z1 = points[best->hi].id;
  sel.lambda = best->lambda;
  sel.r = best->r;
  sel.d = best->d;
  if (sel.d > cost_level || sel.r > witness_r + 1e-12) {
    throw VerificationError("time-sharing selection violates its guarantee");
  }
  return sel;
}

MixtureEntropy mixture_entropy(const TimeShareSelector& selector, const JointLaw& law0,
                               const JointLaw& law1) {
  MixtureEntropy out;
  const double lambda = selector.lambda;
  if (selector.z0 == selector.z1 || lambda >= 1.0) {
    out.conditional = out.unconditional = action_entropy(law0);
  } else if (lambda <= 0.0) {
    out.conditional = out.unconditional = action_entropy(law1);
  } else {
    out.conditional = lambda * action_entropy(law0) + (1.0 - lambda) * action_entropy(law1);
    out.unconditional = action_entropy(JointLaw::mix(law0, law1, lambda));
  }
  out.within_one_bit = out.unconditional <= out.conditional + 1.0 + 1e-12;
  return out;
}

}  // namespace ratecost
