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

// Pipeline configuration: a JSON document with a fixed schema. Unknown keys
// are rejected with their full field path; every value has a default.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ipsrs/cohort.hpp"
#include "ipsrs/fairness.hpp"
#include "ipsrs/models/model.hpp"
#include "ipsrs/preprocess.hpp"
#include "ipsrs/sampling.hpp"

namespace ipsrs::pipeline {

// Stages in execution order.
enum class Stage {
  generate,
  link,
  preprocess,
  sample,
  train,
  evaluate,
  explain,
  causal,
  fairness,
  mitigate,
  report,
};

inline constexpr Stage kStages[] = {Stage::generate, Stage::link,     Stage::preprocess,
                                    Stage::sample,   Stage::train,    Stage::evaluate,
                                    Stage::explain,  Stage::causal,   Stage::fairness,
                                    Stage::mitigate, Stage::report};

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);

struct ModelGrids {
  std::vector<models::Penalty> linear;
  std::vector<models::TreeConfig> gbdt;
  int folds = 5;
};

struct EvaluateSettings {
  std::optional<double> threshold;  // default: training-score quantile at 1 - prevalence
  std::string primary_model = "gbdt";
};

struct ExplainSettings {
  std::size_t background_size = 256;
  std::size_t max_rows = 500;
  std::size_t top_k = 15;
  std::size_t combination_pool = 15;  // top columns entering 2- and 3-combinations
};

struct CausalSettings {
  double alpha = 0.05;
  int max_condition_size = 3;
  std::optional<double> prefilter_penalty;
  bool forbid_outcome_out = false;
  std::size_t top_k = 15;
};

struct FairnessSettings {
  fairness::FairnessConfig metrics;
  std::size_t curve_points = 101;
};

struct MitigationSettings {
  std::vector<std::string> methods{"dir", "adversarial", "calibrated_eo"};
  std::string model = "linear";
  double dir_lambda = 1.0;
  fairness::AdversarialSettings adversarial;
  std::string calibrated_eo_group = "NHB";
};

struct PipelineConfig {
  std::uint64_t seed = 42;
  unsigned workers = 1;

  cohort::GeneratorSpec generator;  // buffer_radius comes from the linkage section
  int cutoff_year = 2020;
  std::array<double, 3> ratios{0.7, 0.1, 0.2};
  preprocess::FeatureSet feature_set = preprocess::FeatureSet::combined;
  sampling::SamplingPlan sampling;
  ModelGrids models;
  EvaluateSettings evaluate;
  ExplainSettings explain;
  CausalSettings causal;
  FairnessSettings fairness;
  MitigationSettings mitigation;

  std::filesystem::path out = "ipsrs-out";
  std::optional<std::filesystem::path> stage_input;

  // Directory upstream artifacts are read from.
  std::filesystem::path input_dir() const { return stage_input ? *stage_input : out; }
};

// Throws ConfigError with the file name, and line/column or field path.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const nlohmann::json& doc, std::string_view source = "config");
PipelineConfig parse_config_text(std::string_view text, std::string_view source = "config");

// Throws ConfigError when two referenced paths coincide; rerun after
// command-line overrides.
void validate_paths(const PipelineConfig& config);

// Normalized echo of every section with defaults filled in. Paths and the
// worker count are excluded: they do not change results.
nlohmann::ordered_json to_json(const PipelineConfig& config);

// Content hash of the seed and every section a stage depends on, as 16 hex
// digits. Artifacts carry the hash of the stage that produced them.
std::string stage_hash(const PipelineConfig& config, Stage stage);

// Per-stage seed derived from the global seed.
std::uint64_t stage_seed(const PipelineConfig& config, std::string_view stage);

}  // namespace ipsrs::pipeline
