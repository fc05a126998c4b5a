//
// Copyright 2026 The ipsrs Authors
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
//
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "ipsrs/csv.hpp"
#include "ipsrs/error.hpp"
#include "ipsrs/evaluate.hpp"
#include "ipsrs/fairness.hpp"
#include "ipsrs/pipeline/config.hpp"
#include "ipsrs/pipeline/pipeline.hpp"

using namespace ipsrs;
using namespace ipsrs::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ipsrs-unit-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small, fast configuration with planted individual and contextual signal.
const char* kSmallConfig = R"({
  "seed": 11,
  "generator": {
    "n_patients": 1500,
    "intercept": -1.6,
    "planted_coefficients": {
      "insurance=medicaid": 0.8, "housing=homeless": 1.0, "financial=constrained": 0.6,
      "employment=unemployed": 0.7, "drug=yes": 0.8, "murder_rate": 0.4
    }
  },
  "models": {
    "folds": 3,
    "linear": [{"l1": 0.0, "l2": 0.1}, {"l1": 0.002, "l2": 0.0}],
    "gbdt": [{"max_depth": 2, "max_rounds": 60, "early_stopping_patience": 10}]
  },
  "explain": {"background_size": 64, "max_rows": 100},
  "mitigation": {"adversarial": {"iterations": 300}}
})";

PipelineConfig small_config(const fs::path& out) {
  auto c = parse_config_text(kSmallConfig, "small");
  c.out = out;
  return c;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("config: defaults, echo and strict keys") {
  const auto c = parse_config_text("{}");
  CHECK(c.seed == 42);
  CHECK(c.models.folds == 5);
  CHECK(c.feature_set == preprocess::FeatureSet::combined);
  CHECK(c.mitigation.methods.size() == 3);
  const auto echo = to_json(c);
  CHECK(echo.contains("generator"));
  CHECK_FALSE(echo.contains("paths"));
  CHECK_FALSE(echo.contains("workers"));

  // The echo parses back to the same configuration.
  const auto again = parse_config(nlohmann::json::parse(echo.dump()));
  CHECK(to_json(again) == echo);

  try {
    parse_config_text(R"({"sampling": {"metod": "ros"}})", "cfg.json");
    FAIL("unknown key accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("sampling.metod") != std::string::npos);
    CHECK(std::string(e.what()).find("cfg.json") != std::string::npos);
  }
  try {
    parse_config_text("{\n  \"seed\": ,\n}", "cfg.json");
    FAIL("malformed JSON accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text(R"({"seed": "x"})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"split": {"ratios": [0.5, 0.2, 0.2]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"mitigation": {"methods": ["reweigh"]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"mitigation": {"dir_lambda": 1.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"fairness": {"band": [1.2, 0.8]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"generator": {"n_patients": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"paths": {"out": "a", "stage_input": "a"}})"),
                  ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/ipsrs.json"), ConfigError);
}

TEST_CASE("config: stage hashes cover exactly the upstream sections") {
  const auto base = parse_config_text("{}");
  auto changed = base;
  changed.fairness.metrics.band_upper = 1.3;
  CHECK(stage_hash(base, Stage::train) == stage_hash(changed, Stage::train));
  CHECK(stage_hash(base, Stage::causal) == stage_hash(changed, Stage::causal));
  CHECK(stage_hash(base, Stage::fairness) != stage_hash(changed, Stage::fairness));

  auto reseeded = base;
  reseeded.seed = 7;
  CHECK(stage_hash(base, Stage::generate) != stage_hash(reseeded, Stage::generate));

  auto moved = base;
  moved.out = "elsewhere";
  moved.workers = 8;
  for (Stage s : kStages) CHECK(stage_hash(base, s) == stage_hash(moved, s));
  CHECK(stage_hash(base, Stage::report).size() == 16);
  CHECK(stage_seed(base, "train") != stage_seed(base, "sample"));
  CHECK(parse_stage("causal") == Stage::causal);
  CHECK_THROWS_AS(parse_stage("bogus"), ValidationError);
}

TEST_CASE("pipeline: preprocess-only run names the missing cohort file") {
  const auto dir = scratch("missing");
  auto c = small_config(dir / "out");
  c.stage_input = dir / "nothing-here";
  Pipeline p(c);
  try {
    p.run(Stage::preprocess);
    FAIL("missing input accepted");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find((dir / "nothing-here" / "cohort.csv").string()) !=
          std::string::npos);
  }
}

TEST_CASE("pipeline: stages refuse artifacts from a different upstream config") {
  const auto dir = scratch("mismatch");
  auto c = small_config(dir);
  Pipeline(c).run(Stage::generate);
  auto other = c;
  other.generator.intercept = -1.0;
  Pipeline p(other);
  CHECK_THROWS_WITH_AS(p.run(Stage::link), doctest::Contains("rerun the producing stage"), Error);
  // A downstream-only change leaves the upstream artifacts valid.
  auto downstream = c;
  downstream.fairness.metrics.band_lower = 0.75;
  CHECK_NOTHROW(Pipeline(downstream).run(Stage::link));
  verify_artifact(dir / "linked.csv", "ipsrs.linked/1", stage_hash(c, Stage::link));
  CHECK_THROWS_AS(verify_artifact(dir / "linked.csv", "ipsrs.cohort/1", stage_hash(c, Stage::link)),
                  Error);
}

TEST_CASE("pipeline: full run, report round trip and determinism") {
  const auto dir = scratch("full");
  auto c1 = small_config(dir / "a");
  c1.workers = 1;
  Pipeline p1(c1);
  p1.run_all();
  CHECK(p1.timings().size() == std::size(kStages));

  auto c2 = small_config(dir / "b");
  c2.workers = 3;
  Pipeline(c2).run_all();

  const auto r1 = read_json(dir / "a" / "report.json");
  const auto r2 = read_json(dir / "b" / "report.json");
  CHECK(r1.at("deterministic") == r2.at("deterministic"));
  CHECK(r1.at("deterministic_digest") == r2.at("deterministic_digest"));
  for (const char* name : {"scores.csv", "model_gbdt.json", "causal_edges.txt", "shap_gbdt.csv",
                           "mitigation.json"}) {
    std::ifstream a(dir / "a" / name);
    std::ifstream b(dir / "b" / name);
    const std::string sa((std::istreambuf_iterator<char>(a)), {});
    const std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK_MESSAGE(sa == sb, name);
  }

  const auto& det = r1.at("deterministic");
  for (const char* key : {"tool_version", "config", "config_hash", "cv", "metrics", "risk_groups",
                          "adjusted_or", "explained_risk_fraction", "explain", "causal",
                          "fairness", "mitigation"}) {
    CHECK_MESSAGE(det.contains(key), key);
  }
  CHECK(r1.contains("timings"));
  CHECK(det.at("risk_groups").size() == 11);
  CHECK(det.at("explain").at("gbdt").at("top_features").size() <= 15);

  // Report numbers equal library calls on the persisted artifacts.
  const auto scores = csv::read(dir / "a" / "scores.csv");
  const auto part = scores.column("partition");
  const auto label = scores.column("label");
  const auto gbdt = scores.column("gbdt");
  const auto group = scores.column("group");
  std::vector<double> test_scores;
  std::vector<int> test_labels;
  std::vector<double> held_scores;
  std::vector<int> held_labels;
  std::vector<std::string> held_groups;
  for (const auto& r : scores.rows) {
    const double s = csv::parse_double(r[gbdt], "t");
    const int y = std::stoi(r[label]);
    if (r[part] == "test") {
      test_scores.push_back(s);
      test_labels.push_back(y);
    }
    if (r[part] == "test" || r[part] == "independent_test") {
      held_scores.push_back(s);
      held_labels.push_back(y);
      held_groups.push_back(r[group]);
    }
  }
  bool found = false;
  for (const auto& m : det.at("metrics")) {
    if (m.at("model") == "gbdt" && m.at("partition") == "test") {
      CHECK(m.at("auroc").get<double>() == evaluate::auroc(test_scores, test_labels));
      found = true;
    }
  }
  CHECK(found);

  const double threshold = det.at("evaluate").at("thresholds").at("gbdt").get<double>();
  const auto conf = fairness::group_confusions(held_scores, held_labels, held_groups, threshold);
  const auto ratios = fairness::fairness_metrics(conf, c1.fairness.metrics);
  for (const auto& m : det.at("fairness").at("gbdt").at("metrics")) {
    for (const auto& r : ratios) {
      if (fairness::to_string(r.metric) != m.at("metric").get<std::string>() ||
          r.protected_group != m.at("protected_group").get<std::string>()) {
        continue;
      }
      const auto& comp = m.at("components").at(0).at("ratio");
      if (r.components[0].ratio) {
        CHECK(comp.get<double>() == *r.components[0].ratio);
      } else {
        CHECK(comp.is_null());
      }
    }
  }
}

TEST_CASE("pipeline: a failing stage keeps partial artifacts and writes no report") {
  const auto dir = scratch("failing");
  auto c = small_config(dir);
  c.feature_set = preprocess::FeatureSet::contextual;
  c.generator.contextual.clear();
  c.generator.planted_coefficients.erase("murder_rate");
  { std::ofstream(dir / "report.json") << "{}"; }
  Pipeline p(c);
  CHECK_THROWS_AS(p.run_all(), ValidationError);
  CHECK(fs::exists(dir / "cohort.csv"));
  CHECK(fs::exists(dir / "linked.csv"));
  CHECK_FALSE(fs::exists(dir / "report.json"));
}

TEST_CASE("compare_feature_sets: null generator gives chance-level AUROC") {
  auto c = parse_config_text(R"({
    "seed": 5,
    "generator": {"n_patients": 12000, "intercept": 0.0},
    "models": {"folds": 3, "linear": [{"l1": 0.0, "l2": 1.0}],
               "gbdt": [{"max_depth": 2, "max_rounds": 40, "early_stopping_patience": 10}]}
  })");
  const auto rows = compare_feature_sets(c);
  CHECK(rows.size() == 6);
  for (const auto& r : rows) {
    CHECK_MESSAGE(std::abs(r.test_auroc - 0.5) <= 0.03,
                  preprocess::to_string(r.feature_set) << "/" << r.family << " " << r.test_auroc);
  }
}
