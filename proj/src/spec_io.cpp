#include "ratecost/spec_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <system_error>

#include "ratecost/error.hpp"

namespace ratecost {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw SpecError(path + ": " + message);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(path.empty() ? key : path + "." + key, "missing required key");
  return *it;
}

int positive_int(const json& v, const std::string& path) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) fail(path, "expected an integer");
  const auto i = v.get<long long>();
  if (i < 1 || i > 1'000'000) fail(path, "expected a positive integer");
  return static_cast<int>(i);
}

std::vector<double> numbers(const json& v, std::size_t size, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  if (v.size() != size) {
    fail(path, "expected " + std::to_string(size) + " entries, found " + std::to_string(v.size()));
  }
  std::vector<double> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    if (!v[i].is_number()) fail(path + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

void append_row(const json& v, std::size_t size, const std::string& path,
                std::vector<double>& out, std::vector<std::string>* warnings) {
  std::vector<double> row = numbers(v, size, path);
  double total = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!(row[i] >= 0.0) || !std::isfinite(row[i])) {
      fail(path + "[" + std::to_string(i) + "]", "probabilities must be finite and nonnegative");
    }
    total += row[i];
  }
  const double dev = std::abs(total - 1.0);
  if (dev > 1e-6) {
    std::ostringstream os;
    os << std::setprecision(12) << "row sums to " << total << " (tolerance 1e-6)";
    fail(path, os.str());
  }
  if (dev > 1e-9 && warnings != nullptr) {
    std::ostringstream os;
    os << path << ": row sums to " << std::setprecision(12) << total << "; renormalized";
    warnings->push_back(os.str());
  }
  for (double p : row) out.push_back(p / total);
}

std::string indexed(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

}  // namespace

SystemSpec parse_spec(const json& doc, std::vector<std::string>* warnings) {
  if (!doc.is_object()) fail("<root>", "expected a JSON object");
  const int n = positive_int(require(doc, "horizon", ""), "horizon");
  const int nx = positive_int(require(doc, "states", ""), "states");
  const int nu = positive_int(require(doc, "actions", ""), "actions");

  bool source = false;
  if (const auto it = doc.find("mode"); it != doc.end()) {
    if (!it->is_string()) fail("mode", "expected a string");
    const auto mode = it->get<std::string>();
    if (mode == "source") {
      source = true;
    } else if (mode != "controlled") {
      fail("mode", "expected \"controlled\" or \"source\", found \"" + mode + "\"");
    }
  }

  const json& cost_doc = require(doc, "cost", "");
  if (!cost_doc.is_array() || cost_doc.size() != static_cast<std::size_t>(nx)) {
    fail("cost", "expected " + std::to_string(nx) + " rows");
  }
  std::vector<double> cost;
  for (int x = 0; x < nx; ++x) {
    const auto row = numbers(cost_doc[x], nu, indexed("cost", x));
    for (int u = 0; u < nu; ++u) {
      if (!(row[u] >= 0.0) || !std::isfinite(row[u])) {
        fail(indexed(indexed("cost", x), u), "cost must be finite and nonnegative");
      }
    }
    cost.insert(cost.end(), row.begin(), row.end());
  }

  const json& kernel = require(doc, "kernel", "");
  const json& kmode = require(kernel, "mode", "kernel");
  if (!kmode.is_string()) fail("kernel.mode", "expected a string");
  const auto mode = kmode.get<std::string>();
  if (mode == "markov") {
    std::vector<double> initial;
    append_row(require(kernel, "initial", "kernel"), nx, "kernel.initial", initial, warnings);
    const json& tr = require(kernel, "transition", "kernel");
    if (!tr.is_array() || tr.size() != static_cast<std::size_t>(nx)) {
      fail("kernel.transition", "expected " + std::to_string(nx) + " entries");
    }
    std::vector<double> transition;
    for (int x = 0; x < nx; ++x) {
      const std::string px = indexed("kernel.transition", x);
      if (source) {
        append_row(tr[x], nx, px, transition, warnings);
        continue;
      }
      if (!tr[x].is_array() || tr[x].size() != static_cast<std::size_t>(nu)) {
        fail(px, "expected " + std::to_string(nu) + " rows, one per action");
      }
      for (int u = 0; u < nu; ++u) append_row(tr[x][u], nx, indexed(px, u), transition, warnings);
    }
    return source ? SystemSpec::source(n, nx, nu, initial, transition, cost)
                  : SystemSpec::markov(n, nx, nu, initial, transition, cost);
  }
  if (mode == "full-history") {
    if (source) fail("mode", "source mode requires a markov kernel");
    const json& st = require(kernel, "stages", "kernel");
    if (!st.is_array() || st.size() != static_cast<std::size_t>(n)) {
      fail("kernel.stages", "expected " + std::to_string(n) + " stages");
    }
    std::vector<std::vector<double>> stages(n);
    std::uint64_t rows = 1;
    for (int t = 0; t < n; ++t) {
      const std::string pt = indexed("kernel.stages", t);
      if (!st[t].is_array() || st[t].size() != rows) {
        fail(pt, "expected " + std::to_string(rows) + " rows");
      }
      for (std::uint64_t h = 0; h < rows; ++h) {
        append_row(st[t][h], nx, indexed(pt, h), stages[t], warnings);
      }
      rows *= static_cast<std::uint64_t>(nx) * nu;
      if (rows > kDefaultTrajectoryBudget) fail(pt, "full-history table exceeds the budget");
    }
    return SystemSpec::full_history(n, nx, nu, std::move(stages), cost);
  }
  fail("kernel.mode", "expected \"markov\" or \"full-history\", found \"" + mode + "\"");
}

SystemSpec parse_spec_text(const std::string& text, std::vector<std::string>* warnings) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << "line " << line << ", column " << col << ": invalid JSON";
    throw SpecError(os.str());
  }
  return parse_spec(doc, warnings);
}

SystemSpec load_spec(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError(path.string() + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_spec_text(buf.str(), warnings);
  } catch (const SpecError& e) {
    throw SpecError(path.string() + ": " + e.what());
  }
}

json spec_to_json(const SystemSpec& spec) {
  const int nx = spec.num_states(), nu = spec.num_actions();
  json doc;
  doc["horizon"] = spec.horizon();
  doc["states"] = nx;
  doc["actions"] = nu;
  doc["mode"] = spec.is_source() ? "source" : "controlled";
  json cost = json::array();
  for (int x = 0; x < nx; ++x) {
    json row = json::array();
    for (int u = 0; u < nu; ++u) row.push_back(spec.cost(x, u));
    cost.push_back(row);
  }
  doc["cost"] = cost;
  json kernel;
  if (spec.mode() == KernelMode::kMarkov) {
    kernel["mode"] = "markov";
    kernel["initial"] = std::vector<double>(spec.initial().begin(), spec.initial().end());
    const auto tr = spec.transition();
    json rows = json::array();
    for (int x = 0; x < nx; ++x) {
      if (spec.is_source()) {
        const auto* p = tr.data() + static_cast<std::size_t>(x) * nu * nx;
        rows.push_back(std::vector<double>(p, p + nx));
        continue;
      }
      json by_u = json::array();
      for (int u = 0; u < nu; ++u) {
        const auto* p = tr.data() + (static_cast<std::size_t>(x) * nu + u) * nx;
        by_u.push_back(std::vector<double>(p, p + nx));
      }
      rows.push_back(by_u);
    }
    kernel["transition"] = rows;
  } else {
    kernel["mode"] = "full-history";
    json stages = json::array();
    for (const auto& s : spec.stages()) {
      json rows = json::array();
      for (std::size_t h = 0; h < s.size() / nx; ++h) {
        rows.push_back(std::vector<double>(s.begin() + h * nx, s.begin() + (h + 1) * nx));
      }
      stages.push_back(rows);
    }
    kernel["stages"] = stages;
  }
  doc["kernel"] = kernel;
  return doc;
}

json policy_to_json(const CausalPolicy& policy) {
  json stages = json::array();
  for (int t = 0; t < policy.horizon(); ++t) {
    json rows = json::array();
    for (std::uint64_t h = 0; h < policy.rows(t); ++h) {
      const auto r = policy.row(t, h);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    stages.push_back(rows);
  }
  return stages;
}

namespace {

json number_or_string(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

json point_to_json(const RateCostPoint& point, bool with_policy) {
  json j;
  j["rate"] = point.rate;
  j["cost"] = point.cost;
  j["multiplier"] = number_or_string(point.multiplier);
  j["converged"] = point.converged;
  j["sweeps"] = point.sweeps;
  j["gap"] = point.gap;
  if (with_policy) j["policy"] = policy_to_json(point.policy);
  return j;
}

json bundle_digest(const SchemeBundle& b) {
  json j;
  j["cost_level"] = b.cost_level;
  j["fn"] = b.optimum.rate;
  j["fn_cost"] = b.optimum.cost;
  j["fn_multiplier"] = number_or_string(b.optimum.multiplier);
  j["fn_converged"] = b.optimum.converged;
  j["epsilon"] = b.options.epsilon;
  j["gamma"] = b.options.gamma;
  j["epsilon_condition"] = {{"lhs", b.epsilon_lhs}, {"admissible", b.epsilon_admissible}};
  j["truncation"] = b.options.truncation;
  j["cloud_size"] = b.options.cloud_size;
  j["seeds"] = {{"base", b.seeds.base},
                {"tables", b.seeds.tables},
                {"dynamics", b.seeds.dynamics},
                {"Q", b.seeds.q}};
  const auto& s = b.selector;
  j["selector"] = {{"z0", s.z0},
                   {"z1", s.z1},
                   {"lambda", s.lambda},
                   {"r", s.r},
                   {"d", s.d},
                   {"r_bar", s.r_bar},
                   {"d_bar", s.d_bar},
                   {"cloud_d_se", b.cloud_d_se},
                   {"effective_epsilon", s.effective_epsilon},
                   {"witness", s.witness == WitnessCase::kBarycenter ? "barycenter" : "shifted"},
                   {"delta", s.delta},
                   {"binary_entropy", binary_entropy(s.lambda)}};
  j["entropy"] = {{"conditional_on_q", b.entropy.conditional},
                  {"unconditional", b.entropy.unconditional},
                  {"within_one_bit", b.entropy.within_one_bit}};
  j["expected_lengths"] = b.expected_lengths;
  j["exact_rate"] = b.exact_rate;
  j["exact_cost"] = b.exact_cost;
  j["policy"] = policy_to_json(b.optimum.policy);
  return j;
}

json report_to_json(const SimulationReport& r) {
  json j;
  j["trials"] = r.trials;
  j["horizon"] = r.horizon;
  j["seed"] = r.seed;
  j["seeds"] = {{"dynamics", r.seeds.dynamics}, {"Q", r.seeds.q}};
  j["q_zero_count"] = r.q_zero_count;
  j["empirical_rate"] = {{"mean", r.rate_mean}, {"se", r.rate_se}};
  j["empirical_cost"] = {{"mean", r.cost_mean}, {"se", r.cost_se}};
  j["exact_rate"] = r.exact_rate;
  j["exact_cost"] = r.exact_cost;
  j["fn"] = r.fn;
  j["upper_bound"] = r.upper_bound;
  j["converse_margin"] = r.exact_rate - r.fn;
  j["achievability_margin"] = r.upper_bound - r.exact_rate;
  return j;
}

json ledger_to_json(const SandwichLedger& ledger) {
  json entries = json::array();
  for (const auto& e : ledger.entries) {
    entries.push_back({{"name", e.name},
                       {"value", e.value},
                       {"bound", e.bound},
                       {"margin", e.margin},
                       {"pass", e.pass},
                       {"gating", e.gating}});
  }
  return {{"pass", ledger.pass}, {"entries", entries}};
}

std::string curve_csv(const std::vector<RateCostPoint>& points,
                      const std::vector<double>& cost_levels) {
  if (points.size() != cost_levels.size()) throw SpecError("one cost level per point required");
  std::ostringstream os;
  os << std::setprecision(17);
  os << "D,F_n(D),mu\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    os << cost_levels[i] << ',' << points[i].rate << ',';
    if (std::isinf(points[i].multiplier)) {
      os << "inf";
    } else {
      os << points[i].multiplier;
    }
    os << '\n';
  }
  return os.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw SpecError(dir.string() + ": cannot create directory: " + ec.message());
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw SpecError(tmp.string() + ": cannot write");
    out << content;
    out.flush();
    if (!out) throw SpecError(tmp.string() + ": write failed");
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw SpecError(path.string() + ": rename failed: " + ec.message());
  }
}

}  // namespace ratecost
