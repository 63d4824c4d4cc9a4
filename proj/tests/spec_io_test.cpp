#include "ratecost/spec_io.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ratecost/error.hpp"
#include "support.hpp"

namespace ratecost {
namespace {

using nlohmann::json;

json PlantDoc() {
  return json::parse(R"({
    "horizon": 2, "states": 2, "actions": 2,
    "kernel": {"mode": "markov", "initial": [0.5, 0.5],
               "transition": [[[0.9, 0.1], [0.2, 0.8]], [[0.3, 0.7], [0.6, 0.4]]]},
    "cost": [[0.0, 1.0], [1.0, 0.2]]
  })");
}

std::string ErrorOf(const json& doc) {
  try {
    parse_spec(doc);
  } catch (const SpecError& e) {
    return e.what();
  }
  return "";
}

bool Contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

void ExpectSameSpec(const SystemSpec& a, const SystemSpec& b) {
  ASSERT_EQ(a.horizon(), b.horizon());
  ASSERT_EQ(a.num_states(), b.num_states());
  ASSERT_EQ(a.num_actions(), b.num_actions());
  EXPECT_EQ(a.mode(), b.mode());
  EXPECT_EQ(a.is_source(), b.is_source());
  for (int x = 0; x < a.num_states(); ++x) {
    for (int u = 0; u < a.num_actions(); ++u) EXPECT_EQ(a.cost(x, u), b.cost(x, u));
  }
  const std::uint64_t nxu = static_cast<std::uint64_t>(a.num_states()) * a.num_actions();
  std::uint64_t rows = 1;
  for (int t = 0; t < a.horizon(); ++t) {
    for (std::uint64_t h = 0; h < rows; ++h) {
      const auto ra = a.kernel_row(t, h), rb = b.kernel_row(t, h);
      ASSERT_EQ(ra.size(), rb.size());
      for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_EQ(ra[i], rb[i]);
    }
    rows *= nxu;
  }
}

TEST(SpecIo, ShippedSpecsRoundTrip) {
  for (const auto& entry : std::filesystem::directory_iterator(RATECOST_DATA_DIR "/specs")) {
    SCOPED_TRACE(entry.path().string());
    std::vector<std::string> warnings;
    const SystemSpec spec = load_spec(entry.path(), &warnings);
    EXPECT_TRUE(warnings.empty());
    const SystemSpec back = parse_spec_text(spec_to_json(spec).dump(2));
    ExpectSameSpec(spec, back);
    EXPECT_EQ(spec_to_json(back), spec_to_json(spec));
  }
}

TEST(SpecIo, MarkovPlantMatchesTheDirectConstruction) {
  const SystemSpec parsed = parse_spec(PlantDoc());
  const SystemSpec direct = SystemSpec::markov(2, 2, 2, {0.5, 0.5},
                                               {0.9, 0.1, 0.2, 0.8, 0.3, 0.7, 0.6, 0.4},
                                               {0.0, 1.0, 1.0, 0.2});
  ExpectSameSpec(parsed, direct);
}

TEST(SpecIo, FullHistoryKernelRowsFollowTheHistoryCode) {
  const SystemSpec spec = testing::shipped("full_history_n2.json");
  EXPECT_EQ(spec.mode(), KernelMode::kFullHistory);
  EXPECT_EQ(spec.kernel_row(0, 0)[0], 0.6);
  // Stage-1 rows are indexed by the code of (x_0, u_0), x_0 most significant.
  EXPECT_EQ(spec.kernel_row(1, 0)[0], 0.9);
  EXPECT_EQ(spec.kernel_row(1, 1)[0], 0.3);
  EXPECT_EQ(spec.kernel_row(1, 2)[0], 0.5);
  EXPECT_EQ(spec.kernel_row(1, 3)[0], 0.1);
}

TEST(SpecIo, SourceModeIgnoresTheAction) {
  const SystemSpec spec = testing::shipped("bernoulli_p02.json");
  EXPECT_TRUE(spec.is_source());
  for (std::uint64_t h = 0; h < 4; ++h) {
    EXPECT_EQ(spec.kernel_row(1, h)[1], 0.2);
  }
  auto doc = spec_to_json(spec);
  EXPECT_EQ(doc["mode"], "source");
  EXPECT_EQ(doc["kernel"]["transition"][0].size(), 2u);
  doc["kernel"] = {{"mode", "full-history"}, {"stages", json::array()}};
  EXPECT_TRUE(Contains(ErrorOf(doc), "mode"));
}

TEST(SpecIo, SmallDeviationsAreRenormalizedWithAWarning) {
  json doc = PlantDoc();
  doc["kernel"]["transition"][1][0] = {0.3, 0.7 + 1e-8};
  std::vector<std::string> warnings;
  const SystemSpec spec = parse_spec(doc, &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_TRUE(Contains(warnings[0], "kernel.transition[1][0]")) << warnings[0];
  const auto row = spec.kernel_row(1, 2);  // x = 1, u = 0
  EXPECT_NEAR(row[0] + row[1], 1.0, 1e-15);
  EXPECT_NEAR(row[0], 0.3 / (1.0 + 1e-8), 1e-15);

  // Deviations at rounding level pass silently.
  doc["kernel"]["transition"][1][0] = {0.3, 0.7 + 1e-12};
  warnings.clear();
  parse_spec(doc, &warnings);
  EXPECT_TRUE(warnings.empty());
}

TEST(SpecIo, LargeDeviationsAreRejectedWithTheKeyPath) {
  json doc = PlantDoc();
  doc["kernel"]["transition"][0][1] = {0.2, 0.8 + 1e-5};
  EXPECT_TRUE(Contains(ErrorOf(doc), "kernel.transition[0][1]")) << ErrorOf(doc);
  doc = PlantDoc();
  doc["kernel"]["initial"] = {0.5, 0.4};
  EXPECT_TRUE(Contains(ErrorOf(doc), "kernel.initial"));
  doc = PlantDoc();
  doc["kernel"]["initial"] = {1.5, -0.5};
  EXPECT_TRUE(Contains(ErrorOf(doc), "kernel.initial[1]"));
}

TEST(SpecIo, SchemaErrorsNameTheOffendingKey) {
  struct Case {
    std::string key;
    std::function<void(json&)> edit;
  };
  const std::vector<Case> cases = {
      {"horizon", [](json& d) { d.erase("horizon"); }},
      {"states", [](json& d) { d["states"] = 0; }},
      {"actions", [](json& d) { d["actions"] = "two"; }},
      {"cost", [](json& d) { d.erase("cost"); }},
      {"cost[1]", [](json& d) { d["cost"][1] = {1.0}; }},
      {"cost[0][1]", [](json& d) { d["cost"][0][1] = -1.0; }},
      {"kernel.mode", [](json& d) { d["kernel"]["mode"] = "semi-markov"; }},
      {"kernel.initial", [](json& d) { d["kernel"].erase("initial"); }},
      {"kernel.transition[0]", [](json& d) { d["kernel"]["transition"][0] = {{1.0, 0.0}}; }},
      {"mode", [](json& d) { d["mode"] = "open-loop"; }},
  };
  for (const auto& c : cases) {
    json doc = PlantDoc();
    c.edit(doc);
    const std::string err = ErrorOf(doc);
    EXPECT_TRUE(Contains(err, c.key)) << c.key << " -> " << err;
  }
}

TEST(SpecIo, SyntaxErrorsReportLineAndColumn) {
  const std::string text = "{\n  \"horizon\": 2,\n  \"states\" 2\n}\n";
  try {
    parse_spec_text(text);
    FAIL() << "expected SpecError";
  } catch (const SpecError& e) {
    EXPECT_TRUE(Contains(e.what(), "line 3")) << e.what();
    EXPECT_TRUE(Contains(e.what(), "column")) << e.what();
  }
}

TEST(SpecIo, MissingFileIsASpecError) {
  EXPECT_THROW(load_spec("/nonexistent/spec.json"), SpecError);
}

TEST(SpecIo, WriteAtomicReplacesTheFileWithoutLeftovers) {
  const auto dir = std::filesystem::temp_directory_path() / "ratecost_spec_io_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto path = dir / "out.json";
  write_atomic(path, "first");
  write_atomic(path, "second\n");
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "second\n");
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir),
                          std::filesystem::directory_iterator()),
            1);  // no temporary left behind
  // Missing parents are created; a regular file in the way is an error.
  write_atomic(dir / "sub" / "x.json", "z");
  EXPECT_TRUE(std::filesystem::exists(dir / "sub" / "x.json"));
  EXPECT_THROW(write_atomic(path / "x.json", "z"), SpecError);
  std::filesystem::remove_all(dir);
}

TEST(SpecIo, CurveCsvHasAHeaderAndMarksTheCostEndpoint) {
  RateCostPoint a, b;
  a.rate = 0.5;
  a.multiplier = 2.0;
  b.rate = 1.25;
  b.multiplier = kInfiniteMultiplier;
  const std::string csv = curve_csv({a, b}, {0.3, 0.1});
  EXPECT_EQ(csv, "D,F_n(D),mu\n0.29999999999999999,0.5,2\n0.10000000000000001,1.25,inf\n");
  EXPECT_THROW(curve_csv({a}, {}), SpecError);
}

TEST(SpecIo, ResultDocumentsCarryTheLedger) {
  SandwichLedger ledger;
  ledger.entries.push_back({"converse", 1.0, 0.9, 0.1, true, true});
  ledger.entries.push_back({"empirical_rate", 1.0, 1.1, -0.1, false, false});
  ledger.pass = true;
  const json j = ledger_to_json(ledger);
  EXPECT_EQ(j["pass"], true);
  ASSERT_EQ(j["entries"].size(), 2u);
  EXPECT_EQ(j["entries"][1]["gating"], false);
  EXPECT_EQ(j["entries"][0]["name"], "converse");

  RateCostPoint p;
  p.multiplier = kInfiniteMultiplier;
  p.policy = CausalPolicy(1, 2, 2);
  const json pj = point_to_json(p, true);
  EXPECT_EQ(pj["multiplier"], "inf");
  EXPECT_EQ(pj["policy"].size(), 1u);
  EXPECT_FALSE(point_to_json(p, false).contains("policy"));
}

}  // namespace
}  // namespace ratecost
