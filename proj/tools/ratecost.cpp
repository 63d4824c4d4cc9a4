// Command-line front end. Exit codes: 0 success, 2 spec error, 3 infeasible
// cost level, 4 solver non-convergence, 5 verification failure.

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ratecost/closed_loop.hpp"
#include "ratecost/error.hpp"
#include "ratecost/fn_solver.hpp"
#include "ratecost/lqg.hpp"
#include "ratecost/spec_io.hpp"

namespace {

using nlohmann::json;
using namespace ratecost;

struct CommonArgs {
  std::string spec_path;
  std::vector<double> levels;
  std::string out_dir;
  std::uint64_t seed = 1;
  int restarts = 8;
  bool strict = false;
};

void emit(const std::string& out_dir, const std::string& name, const std::string& content) {
  if (out_dir.empty()) {
    std::cout << content;
    return;
  }
  write_atomic(std::filesystem::path(out_dir) / name, content);
}

SolverOptions solver_options(const CommonArgs& args) {
  SolverOptions opts;
  opts.seed = args.seed;
  opts.restarts = args.restarts;
  opts.strict = args.strict;
  return opts;
}

SystemSpec read_spec(const std::string& path) {
  std::vector<std::string> warnings;
  SystemSpec spec = load_spec(path, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return spec;
}

void warn_unconverged(const RateCostPoint& p, double level) {
  if (!p.converged) {
    std::cerr << "warning: solver did not reach its gap tolerance at D = " << level
              << " (gap " << p.gap << " bits)\n";
  }
}

int run_solve(const CommonArgs& args, bool source_only, const char* command) {
  const SystemSpec spec = read_spec(args.spec_path);
  if (source_only && !spec.is_source()) {
    throw SpecError(args.spec_path + ": mode: rd requires \"mode\": \"source\"");
  }
  const SolverOptions opts = solver_options(args);
  const RateCostCurve curve = rate_cost_curve(spec, opts);

  std::vector<double> levels = args.levels;
  std::vector<RateCostPoint> points;
  if (levels.empty()) {
    for (const auto& p : curve.points) {
      levels.push_back(p.cost);
      points.push_back(p);
    }
  } else {
    for (double d : levels) {
      points.push_back(solve_fn(spec, d, opts, &curve));
      warn_unconverged(points.back(), d);
    }
  }

  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["command"] = command;
  doc["spec"] = spec_to_json(spec);
  doc["solver"] = {{"seed", opts.seed}, {"restarts", opts.restarts}};
  json envelope = json::array();
  for (const auto& p : curve.points) envelope.push_back(point_to_json(p, false));
  doc["envelope"] = envelope;
  json results = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    json r = point_to_json(points[i], true);
    r["D"] = levels[i];
    results.push_back(r);
  }
  doc["points"] = results;

  if (args.out_dir.empty()) {
    std::cout << curve_csv(points, levels);
  } else {
    emit(args.out_dir, "curve.csv", curve_csv(points, levels));
    emit(args.out_dir, std::string(command) + ".json", doc.dump(2) + "\n");
  }
  return 0;
}

int run_synth(const CommonArgs& args, double epsilon, double gamma, std::uint64_t trials,
              bool records) {
  if (args.levels.size() != 1) throw SpecError("--D: synth takes exactly one cost level");
  const double level = args.levels.front();
  const SystemSpec spec = read_spec(args.spec_path);
  SynthesisOptions opts;
  opts.epsilon = epsilon;
  opts.gamma = gamma;
  opts.seed = args.seed;
  opts.solver = solver_options(args);
  const RateCostCurve curve = rate_cost_curve(spec, opts.solver);
  const SchemeBundle bundle = synthesize(spec, level, opts, &curve);
  warn_unconverged(bundle.optimum, level);
  if (!bundle.epsilon_admissible) {
    std::cerr << "warning: epsilon " << epsilon << " is too large for gamma " << gamma
              << " (condition value " << bundle.epsilon_lhs << ")\n";
  }
  const SimulationReport report = run_trials(bundle, trials, args.seed, records);
  const SandwichLedger ledger = verify_sandwich(report);

  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["command"] = "synth";
  doc["spec"] = spec_to_json(spec);
  json envelope = json::array();
  for (const auto& p : curve.points) envelope.push_back(point_to_json(p, false));
  doc["envelope"] = envelope;
  doc["scheme"] = bundle_digest(bundle);
  doc["simulation"] = report_to_json(report);
  doc["ledger"] = ledger_to_json(ledger);
  emit(args.out_dir, "result.json", doc.dump(2) + "\n");
  if (records) {
    std::ostringstream os;
    os << std::setprecision(17) << "trial,bits,cost\n";
    for (std::size_t i = 0; i < report.records.size(); ++i) {
      os << i << ',' << report.records[i].bits << ',' << report.records[i].cost << '\n';
    }
    emit(args.out_dir, "trials.csv", os.str());
  }
  if (!ledger.pass) {
    std::cerr << "sandwich verification failed\n";
    return static_cast<int>(ErrorKind::kVerification);
  }
  return 0;
}

int run_lqg(const ScalarLqgSpec& lqg, const std::vector<double>& levels,
            const std::string& out_dir) {
  const LqgDerived derived = riccati_solve(lqg);
  std::ostringstream os;
  os << std::setprecision(17);
  os << "# s=" << derived.s << " m=" << derived.m << " D_min=" << derived.d_min << '\n';
  os << "D,F(D)\n";
  for (const auto& [d, f] : f_curve(lqg, derived, levels)) os << d << ',' << f << '\n';
  emit(out_dir, "lqg.csv", os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rate-cost toolkit for finite-alphabet control systems"};
  app.require_subcommand(1);

  CommonArgs args;
  double epsilon = 0.01, gamma = 0.25;
  std::uint64_t trials = 10000;
  bool records = false;
  ScalarLqgSpec lqg;
  double sigma = -1.0;

  auto add_common = [&](CLI::App* sub, bool needs_spec) {
    auto* spec = sub->add_option("--spec", args.spec_path, "System description (JSON)")
                     ->envname("RATECOST_SPEC");
    if (needs_spec) spec->required();
    sub->add_option("--D", args.levels, "Cost level(s)")
        ->delimiter(',')
        ->envname("RATECOST_D");
    sub->add_option("--out", args.out_dir, "Output directory (default: stdout)")
        ->envname("RATECOST_OUT");
    sub->add_option("--seed", args.seed, "Base seed")->envname("RATECOST_SEED");
    sub->add_option("--restarts", args.restarts, "Random restarts per multiplier")
        ->envname("RATECOST_RESTARTS")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("--strict", args.strict, "Fail with exit code 4 on non-convergence")
        ->envname("RATECOST_STRICT");
  };

  auto* solve = app.add_subcommand("solve", "Compute F_n(D) on a grid or the whole envelope");
  add_common(solve, true);
  auto* rd = app.add_subcommand("rd", "Sequential rate-distortion for a source-mode system");
  add_common(rd, true);
  auto* synth = app.add_subcommand("synth", "Synthesize and simulate an encoding-and-control scheme");
  add_common(synth, true);
  synth->add_option("--eps", epsilon, "Time-sharing slack (bits)")->envname("RATECOST_EPS");
  synth->add_option("--gamma", gamma, "Rate margin (bits)")->envname("RATECOST_GAMMA");
  synth->add_option("--trials", trials, "Monte-Carlo trials")->envname("RATECOST_TRIALS");
  synth->add_flag("--records", records, "Also write per-trial bits and cost")
      ->envname("RATECOST_RECORDS");

  auto* lq = app.add_subcommand("lqg", "Scalar LQG rate-cost curve");
  lq->add_option("--a", lqg.a, "State gain")->required()->envname("RATECOST_A");
  lq->add_option("--b", lqg.b, "Input gain")->envname("RATECOST_B");
  lq->add_option("--q", lqg.q, "State cost weight")->envname("RATECOST_Q");
  lq->add_option("--r", lqg.r, "Input cost weight")->envname("RATECOST_R");
  auto* var = lq->add_option("--sigma2", lqg.noise_variance, "Noise variance")
                  ->envname("RATECOST_SIGMA2");
  lq->add_option("--sigma", sigma, "Noise standard deviation")
      ->envname("RATECOST_SIGMA")
      ->excludes(var);
  lq->add_option("--D", args.levels, "Cost level(s)")
      ->delimiter(',')
      ->required()
      ->envname("RATECOST_D");
  lq->add_option("--out", args.out_dir, "Output directory (default: stdout)")
      ->envname("RATECOST_OUT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kSpec);
  }

  try {
    if (*solve) return run_solve(args, false, "solve");
    if (*rd) return run_solve(args, true, "rd");
    if (*synth) return run_synth(args, epsilon, gamma, trials, records);
    if (*lq) {
      if (sigma >= 0.0) lqg.noise_variance = sigma * sigma;
      return run_lqg(lqg, args.levels, args.out_dir);
    }
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\nhint: the minimal achievable cost is "
              << e.min_cost() << '\n';
    return e.exit_code();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
