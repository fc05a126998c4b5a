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
#pragma once

// Stage execution, self-describing artifacts and the consolidated report.
//
// Every artifact carries a schema name and the hash of the config sections
// that produced it: CSV files start with
//   # ipsrs-artifact schema=<name> config_hash=<hash>
// and JSON files hold "schema" and "config_hash" keys. A stage refuses inputs
// whose hash differs from the current config's hash for the producing stage.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ipsrs/pipeline/config.hpp"

namespace ipsrs::pipeline {

inline constexpr std::string_view kToolVersion = "1.0.0";

// Comment text (without '#') identifying a CSV artifact.
std::string artifact_header(std::string_view schema, std::string_view hash);

// Throws IoError naming the path when it is missing or unreadable, and
// Error when the schema or producing hash does not match.
void verify_artifact(const std::filesystem::path& path, std::string_view schema,
                     std::string_view expected_hash);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }

  // Runs one stage: inputs from config().input_dir(), outputs to config().out.
  void run(Stage stage);

  // Runs every stage in order; each reads what the previous one wrote. A
  // stale report is removed first so a failed run leaves none behind.
  void run_all();

  const std::vector<StageTiming>& timings() const { return timings_; }

 private:
  void generate();
  void link();
  void preprocess();
  void sample();
  void train();
  void evaluate();
  void explain();
  void causal();
  void fairness();
  void mitigate();
  void report();

  std::filesystem::path in(std::string_view name) const;
  std::filesystem::path out(std::string_view name) const;
  std::string hash(Stage stage) const { return stage_hash(config_, stage); }
  void record_timing(std::string_view stage, double seconds);

  PipelineConfig config_;
  std::filesystem::path input_dir_;
  std::vector<StageTiming> timings_;
};

struct FeatureSetResult {
  preprocess::FeatureSet feature_set = preprocess::FeatureSet::combined;
  std::string family;  // "linear" or "gbdt"
  double test_auroc = 0.0;
  std::size_t columns = 0;
};

// Generates one cohort and trains both families on each feature set with the
// same split, sampling plan, grids and seeds; AUROC on the test partition.
std::vector<FeatureSetResult> compare_feature_sets(const PipelineConfig& config);

// Runs compare_feature_sets and writes feature_sets.csv and feature_sets.json.
std::vector<FeatureSetResult> run_compare_feature_sets(const PipelineConfig& config);

}  // namespace ipsrs::pipeline
