#pragma once

// JSON system descriptions and result documents.
//
// A system document looks like
//   {
//     "horizon": 2, "states": 2, "actions": 2,
//     "mode": "controlled" | "source",            (optional)
//     "kernel": {"mode": "markov", "initial": [...],
//                "transition": [x][u][x'] | [x][x'] (source)}
//             | {"mode": "full-history", "stages": [[row, ...], ...]},
//     "cost": [[c(x, u), ...], ...]
//   }
// Rows off the simplex by at most 1e-6 are renormalized (with a warning
// above 1e-9); larger deviations are rejected with the key path.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ratecost/closed_loop.hpp"
#include "ratecost/fn_solver.hpp"
#include "ratecost/lqg.hpp"
#include "ratecost/system_model.hpp"

namespace ratecost {

inline constexpr int kSchemaVersion = 1;

SystemSpec parse_spec(const nlohmann::json& doc, std::vector<std::string>* warnings = nullptr);

/// Parses text; JSON syntax errors are reported with line and column.
SystemSpec parse_spec_text(const std::string& text,
                           std::vector<std::string>* warnings = nullptr);

SystemSpec load_spec(const std::filesystem::path& path,
                     std::vector<std::string>* warnings = nullptr);

nlohmann::json spec_to_json(const SystemSpec& spec);

nlohmann::json policy_to_json(const CausalPolicy& policy);
nlohmann::json point_to_json(const RateCostPoint& point, bool with_policy);
nlohmann::json bundle_digest(const SchemeBundle& bundle);
nlohmann::json report_to_json(const SimulationReport& report);
nlohmann::json ledger_to_json(const SandwichLedger& ledger);

/// Rows of (D, F_n(D), mu) as CSV with a header line.
std::string curve_csv(const std::vector<RateCostPoint>& points,
                      const std::vector<double>& cost_levels);

/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace ratecost
