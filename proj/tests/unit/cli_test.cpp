// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "factalloc/cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"

#include "factalloc/cli/problem.hpp"
#include "factalloc/cli/tables.hpp"
#include "factalloc/errors.hpp"
#include "support/oracles.hpp"

namespace factalloc::cli {
namespace {

using nlohmann::json;
using testing::data_path;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  Result r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("factalloc_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }

  std::string write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

 private:
  std::filesystem::path path_;
};

json load_json(const std::string& path) {
  std::ifstream in(path);
  return json::parse(in);
}

// Runs an allocate command on a golden spec with the criterion replaced.
json allocate(const std::string& command, const std::string& spec, const std::string& criterion,
              const std::string& mode = "greedy") {
  TempDir dir;
  json doc = load_json(data_path(spec));
  doc["criterion"] = criterion;
  const auto path = dir.write("spec.json", doc.dump());
  const auto r = call({command, "--mode", mode, "--spec", path, "--output", "json"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  return json::parse(r.out);
}

CountMatrix counts(const json& doc) { return doc.at("result").at("counts").get<CountMatrix>(); }

TEST(CliGolden, EducationCrd) {
  for (const char* c : {"A", "D", "E"}) {
    EXPECT_EQ(counts(allocate("crd", "education_crd.json", c)), (CountMatrix{{414, 414, 414, 414}}));
  }
}

TEST(CliGolden, EducationRbd) {
  for (const char* c : {"A", "D", "E"}) {
    EXPECT_EQ(counts(allocate("block", "education_rbd.json", c)),
              (CountMatrix{{237, 237, 237, 237}, {177, 177, 177, 177}}));
  }
}

TEST(CliGolden, EducationCostText) {
  const auto r = call({"cost", "--mode", "exact", "--spec", data_path("education_cost_1222.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("0.275  0.275  0.389"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("553    247    247    174"), std::string::npos) << r.out;
}

TEST(CliGolden, EducationCostJson) {
  const auto doc = allocate("cost", "education_cost_1111.json", "E", "exact");
  const auto a = cost_allocation_from_json(doc.at("result"));
  EXPECT_EQ(a.integer_counts, (std::vector<long long>{219, 219, 219, 219}));
  EXPECT_NEAR(a.budget_shares[3], 0.488, 0.0005);
}

TEST(CliGolden, CostDemo) {
  const auto a = cost_allocation_from_json(
      allocate("cost", "cost_demo_1234_skewed.json", "A", "exact").at("result"));
  const std::vector<double> want{0.025, 0.224, 0.275, 0.476};
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(a.budget_shares[j], want[j], 0.0005);
  const auto e = exact_allocation_from_json(
      allocate("crd", "cost_demo_1234_equal.json", "E", "exact").at("result"));
  EXPECT_NEAR(e.proportions[0][3], 0.4, 1e-15);
}

TEST(CliGolden, AuditCrdAndRbd) {
  EXPECT_EQ(counts(allocate("crd", "audit_crd.json", "E")),
            (CountMatrix{{24, 22, 20, 22, 26, 24, 30, 24}}));
  EXPECT_EQ(counts(allocate("block", "audit_rbd.json", "D")),
            (CountMatrix{{11, 11, 12, 13, 13, 10, 12, 14}, {13, 13, 13, 12, 11, 13, 11, 10}}));
}

TEST(CliGolden, TwoBlockSettingsGreedy) {
  EXPECT_EQ(counts(allocate("block", "block_e_setting3.json", "E")),
            (CountMatrix{{4, 8, 12, 16}, {2, 4, 6, 8}}));
  EXPECT_EQ(counts(allocate("block", "block_d_setting5.json", "D")),
            (CountMatrix{{7, 10, 11, 12}, {7, 6, 4, 3}}));
}

TEST(CliGolden, OracleListsAllOptima) {
  const auto doc = allocate("block", "block_e_setting4.json", "E", "oracle");
  const auto set = optimal_set_from_json(doc.at("result"));
  ASSERT_EQ(set.optima.size(), 4u);
  EXPECT_EQ(set.optima[3].counts, (CountMatrix{{4, 8, 11, 17}, {2, 3, 5, 10}}));
}

TEST(CliJson, RoundTripsEveryResultKind) {
  const struct {
    const char* command;
    const char* spec;
    const char* criterion;
    const char* mode;
  } cases[] = {{"crd", "audit_crd.json", "A", "greedy"},
               {"crd", "audit_crd.json", "E", "exact"},
               {"block", "audit_rbd.json", "E", "greedy"},
               {"block", "audit_rbd.json", "A", "exact"},
               {"block", "block_e_setting3.json", "E", "oracle"},
               {"cost", "education_cost_1222.json", "A", "exact"}};
  for (const auto& c : cases) {
    const json doc = allocate(c.command, c.spec, c.criterion, c.mode);
    const json& result = doc.at("result");
    json again;
    if (std::string(c.command) == "cost") {
      again = to_json(cost_allocation_from_json(result));
    } else if (std::string(c.mode) == "exact") {
      again = to_json(exact_allocation_from_json(result));
    } else if (std::string(c.mode) == "oracle") {
      again = to_json(optimal_set_from_json(result));
    } else {
      const auto a = integer_allocation_from_json(result);
      again = to_json(a);
    }
    EXPECT_EQ(again, result) << c.command << " " << c.spec << " " << c.mode;
  }
}

TEST(CliJson, RoundTripPreservesValuesExactly) {
  IntegerAllocation a;
  a.criterion = Criterion::kD;
  a.counts = {{3, 4}, {5, 6}};
  a.criterion_value = 0.1 + 0.2;
  a.iterations = 7;
  a.saturated_arms = {{1, 0}};
  a.warnings = {"w"};
  const auto b = integer_allocation_from_json(json::parse(to_json(a).dump()));
  EXPECT_EQ(b.criterion, a.criterion);
  EXPECT_EQ(b.counts, a.counts);
  EXPECT_EQ(b.criterion_value, a.criterion_value);
  EXPECT_EQ(b.iterations, a.iterations);
  EXPECT_EQ(b.saturated_arms, a.saturated_arms);
  EXPECT_EQ(b.warnings, a.warnings);

  ExactAllocation e;
  e.criterion = Criterion::kA;
  e.proportions = {{1.0 / 3, 2.0 / 3}};
  e.conditions_used = {"WBH"};
  const auto f = exact_allocation_from_json(json::parse(to_json(e).dump()));
  EXPECT_EQ(f.proportions, e.proportions);
  EXPECT_EQ(f.conditions_used, e.conditions_used);
}

TEST(CliText, ProportionsToThreeDecimals) {
  const auto r = call({"crd", "--mode", "exact", "--spec", data_path("cost_demo_1234_equal.json")});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("0.163  0.230  0.282  0.325"), std::string::npos) << r.out;
}

TEST(CliExitCodes, Validation) {
  TempDir dir;
  const auto bad = dir.write("bad.json", R"({"design": {"K": 2, "N": 40}, "variances": [1, 1, 1]})");
  EXPECT_EQ(call({"crd", "--spec", bad}).code, kExitValidation);
  const auto garbage = dir.write("garbage.json", "{not json");
  EXPECT_EQ(call({"crd", "--spec", garbage}).code, kExitValidation);
  EXPECT_EQ(call({"crd", "--spec", data_path("education_crd.json"), "--mode", "fast"}).code,
            kExitValidation);
  EXPECT_EQ(call({"block", "--spec", data_path("education_crd.json")}).code, kExitValidation);
  EXPECT_EQ(call({}).code, kExitValidation);
}

TEST(CliExitCodes, Infeasible) {
  TempDir dir;
  const auto spec = dir.write("small.json", R"({"design": {"K": 2, "N": 7}, "variances": [1, 1, 1, 1]})");
  const auto r = call({"crd", "--spec", spec});
  EXPECT_EQ(r.code, kExitInfeasible);
}

TEST(CliExitCodes, ConditionNotMetSuggestsGreedy) {
  const auto r = call({"block", "--mode", "exact", "--spec", data_path("block_e_setting5.json")});
  EXPECT_EQ(r.code, kExitConditionNotMet);
  EXPECT_NE(r.err.find("--mode greedy"), std::string::npos);
}

TEST(CliExitCodes, OracleCap) {
  const auto r = call({"crd", "--mode", "oracle", "--cap", "10", "--spec", data_path("education_crd.json")});
  EXPECT_EQ(r.code, kExitOracleCap);
}

TEST(CliExitCodes, Help) {
  const auto r = call({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("simulate"), std::string::npos);
}

TEST(CliTolerance, OverridesConditionChecks) {
  TempDir dir;
  const auto spec = dir.write(
      "near.json", R"({"design": {"K": 1, "N": 10}, "variances": [1.0, 1.001], "criterion": "A"})");
  const auto strict = json::parse(call({"crd", "--spec", spec, "--output", "json"}).out);
  EXPECT_EQ(strict["conditions"]["homoscedastic"], false);
  const auto loose =
      json::parse(call({"crd", "--spec", spec, "--output", "json", "--tol", "0.01"}).out);
  EXPECT_EQ(loose["conditions"]["homoscedastic"], true);
}

TEST(ProblemFile, BoundsExpand) {
  const auto p = parse_problem(json::parse(
      R"({"design": {"K": 1, "blocks": [{"size": 10}, {"size": 12}]},
          "variances": [[1, 2], [3, 4]],
          "bounds": {"lower": 3, "upper": [[7, 7], [9, 8]]}})"));
  EXPECT_EQ(*p.lower, (CountMatrix{{3, 3}, {3, 3}}));
  EXPECT_EQ(p.block_design().upper, (CountMatrix{{7, 7}, {9, 8}}));
  EXPECT_EQ(p.blocks[1].name, "block 2");
}

TEST(ProblemFile, SchemaErrors) {
  EXPECT_THROW(parse_problem(json::parse(R"({"variances": [1, 1]})")), ValidationError);
  EXPECT_THROW(parse_problem(json::parse(R"({"design": {"K": 1, "N": 4}, "variances": [[1, 1]]})")),
               ValidationError);
  EXPECT_THROW(parse_problem(json::parse(
                   R"({"design": {"K": 1, "N": 4}, "variances": [1, 1], "criterion": "Z"})")),
               ValidationError);
  EXPECT_THROW(parse_problem(json::parse(
                   R"({"design": {"K": 1, "N": 4}, "variances": [1, 1], "bounds": {"lower": [1]}})")),
               ValidationError);
  EXPECT_THROW(parse_problem(json::parse(
                   R"({"design": {"K": 1, "N": 5, "blocks": [{"size": 2}, {"size": 2}]},
                       "variances": [[1, 1], [1, 1]]})")),
               ValidationError);
}

TEST(Pilot, BitStringAndIntegerCodesAgree) {
  std::istringstream bits("unit_id,treatment,outcome\n1,00,1\n2,01,2\n3,10,3\n4,11,4\n");
  std::istringstream ints("unit_id\ttreatment\toutcome\n1\t1\t1\n2\t2\t2\n3\t3\t3\n4\t4\t4\n");
  const auto a = parse_pilot(bits, 2, "bits");
  const auto b = parse_pilot(ints, 2, "ints");
  ASSERT_EQ(a.observations.size(), 4u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(a.observations[i].arm, i);
    EXPECT_EQ(b.observations[i].arm, i);
  }
}

TEST(Pilot, TwoBitColumnWithTwoFactorsIsReadAsBits) {
  // "10" is a valid bit string for K=2, so the whole column is read as bits.
  std::istringstream in("treatment,outcome\n10,1\n11,2\n");
  const auto d = parse_pilot(in, 2, "x");
  EXPECT_EQ(d.observations[0].arm, 2);
  EXPECT_EQ(d.observations[1].arm, 3);
}

TEST(Pilot, UnknownTreatmentCode) {
  std::istringstream in("treatment,outcome\n1,0\n5,1\n");
  EXPECT_THROW(parse_pilot(in, 2, "x"), ValidationError);
}

TEST(Pilot, PooledRowFromReplicates) {
  const auto data = load_pilot(data_path("audit_pilot.csv"), 3);
  ASSERT_TRUE(data.has_replicates());
  std::vector<GroupSummary> reps;
  for (int r = 0; r < 2; ++r) {
    std::vector<Observation> sub;
    for (const auto& o : data.observations) {
      if (o.replicate == r) sub.push_back(o);
    }
    reps.push_back(summarize_groups(sub, 3));
  }
  const std::vector<double> rep1{0.15, 0.15, 0.15, 0.20, 0.27, 0.15, 0.27, 0.27};
  const std::vector<double> rep2{0.27, 0.24, 0.20, 0.20, 0.20, 0.27, 0.27, 0.15};
  const std::vector<double> pooled_row{0.21, 0.20, 0.18, 0.20, 0.23, 0.21, 0.27, 0.21};
  const auto pooled = pool_variances(reps);
  for (int j = 0; j < 8; ++j) {
    EXPECT_NEAR(reps[0].variances[j], rep1[j], 0.005);
    EXPECT_NEAR(reps[1].variances[j], rep2[j], 0.005);
    EXPECT_NEAR(pooled[j], pooled_row[j], 0.005);
  }
}

TEST(Pilot, PoolingIsDegreesOfFreedomWeighted) {
  GroupSummary a{{3, 11}, {0, 0}, {1.0, 1.0}};
  GroupSummary b{{5, 11}, {0, 0}, {4.0, 2.0}};
  const std::vector<GroupSummary> reps{a, b};
  const auto pooled = pool_variances(reps);
  EXPECT_DOUBLE_EQ(pooled[0], (2 * 1.0 + 4 * 4.0) / 6);
  EXPECT_DOUBLE_EQ(pooled[1], 1.5);
  const std::vector<GroupSummary> single{a};
  EXPECT_EQ(pool_variances(single), a.variances);
}

TEST(CliEstimate, EffectsMatchHandContrast) {
  TempDir dir;
  // Group means 1, 2, 4, 8 for 00, 01, 10, 11.
  const auto path = dir.write("pilot.csv",
                              "unit_id,treatment,outcome\n"
                              "1,00,0\n2,00,2\n3,01,1\n4,01,3\n5,10,3\n6,10,5\n7,11,7\n8,11,9\n");
  const auto r = call({"estimate", "--data", path, "--k", "2", "--output", "json"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto effects = json::parse(r.out)["groups"][0]["effects"]["values"].get<std::vector<double>>();
  // mean: (1+2+4+8)/2, F2: (2+8-1-4)/2, F1: (4+8-1-2)/2, F1:F2: (1+8-2-4)/2.
  EXPECT_EQ(effects, (std::vector<double>{7.5, 2.5, 4.5, 1.5}));
}

TEST(CliEstimate, PooledTextRow) {
  const auto r = call({"estimate", "--data", data_path("audit_pilot.csv"), "--k", "3", "--pool"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("pooled      0.2083  0.1970  0.1780"), std::string::npos) << r.out;
}

TEST(CliEstimate, SmallGroupIsAnError) {
  TempDir dir;
  const auto path = dir.write("pilot.csv", "treatment,outcome\n1,0\n1,1\n2,5\n");
  const auto r = call({"estimate", "--data", path, "--k", "1"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("fewer than two"), std::string::npos);
}

TEST(CliSimulate, AdditiveOutcomes) {
  const auto r = call({"simulate", "--spec", data_path("sim_crd.json"), "--po",
                       data_path("additive_po.csv"), "--reps", "20000", "--seed", "3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("heterogeneity term: 0 (strictly additive detected)"), std::string::npos);
  EXPECT_NE(r.out.find("unbiasedness (|mean - tau| <= 4 SE): pass"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("seed: 3"), std::string::npos);
}

TEST(CliSimulate, FixedSeedIsByteIdentical) {
  const std::vector<std::string> base{"simulate", "--spec", data_path("sim_rbd.json"), "--po",
                                      data_path("random_po.tsv"), "--reps", "5000", "--seed", "11"};
  auto one = base;
  one.insert(one.end(), {"--threads", "1"});
  auto three = base;
  three.insert(three.end(), {"--threads", "3"});
  const auto a = call(one);
  const auto b = call(three);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, call(one).out);
  EXPECT_NE(a.out.find("PSD: pass"), std::string::npos) << a.out;
}

TEST(CliSimulate, ShapeMismatch) {
  TempDir dir;
  const auto po = dir.write("po.csv", "a,b,c\n1,2,3\n");
  EXPECT_EQ(call({"simulate", "--spec", data_path("sim_crd.json"), "--po", po, "--reps", "10",
                  "--seed", "1"}).code,
            kExitValidation);
  const auto k1 = dir.write("k1.csv", "a,b\n1,2\n3,4\n");
  EXPECT_EQ(call({"simulate", "--spec", data_path("sim_crd.json"), "--po", k1, "--reps", "10",
                  "--seed", "1"}).code,
            kExitValidation);
}

}  // namespace
}  // namespace factalloc::cli
