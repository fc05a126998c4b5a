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

// Helpers shared by the stage implementations and the feature-set
// comparison. Not installed.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipsrs/cohort.hpp"
#include "ipsrs/models/model.hpp"
#include "ipsrs/pipeline/config.hpp"
#include "ipsrs/preprocess.hpp"

namespace ipsrs::pipeline::detail {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kFamilies[] = {"linear", "gbdt"};

// JSON artifact skeleton with the schema and producing hash first.
ordered_json artifact_json(std::string_view schema, std::string_view hash);
void write_json(const std::filesystem::path& path, const ordered_json& doc);
ordered_json read_json(const std::filesystem::path& path);
// Copy without the schema and config_hash keys.
ordered_json body(const ordered_json& doc);
// Null for non-finite values.
ordered_json number(double value);

struct Prepared {
  preprocess::FeatureMatrix matrix;  // every row, train-fitted transforms
  preprocess::SplitAssignment split;
  preprocess::PreprocessState state;
};

Prepared prepare(std::span<const cohort::PatientRecord> records,
                 const std::vector<std::map<std::string, double>>& linked,
                 std::span<const cohort::FeatureInfo> dictionary, preprocess::FeatureSet set,
                 const PipelineConfig& config);

// Matrix row indices of the resampled training partition.
std::vector<std::size_t> resample_rows(const preprocess::FeatureMatrix& matrix,
                                       const preprocess::SplitAssignment& split,
                                       std::span<const int> cci, const PipelineConfig& config);

struct Trained {
  models::Model linear;
  models::Model gbdt;
  models::CVSelection cv_linear;
  models::CVSelection cv_gbdt;

  const models::Model& get(std::string_view family) const {
    return family == "linear" ? linear : gbdt;
  }
};

// Grid search on the unresampled training rows, final fit on the resampled
// rows; the tree ensemble early-stops on the validation partition.
Trained train_models(const preprocess::FeatureMatrix& matrix,
                     const preprocess::SplitAssignment& split,
                     std::span<const std::size_t> resampled, const PipelineConfig& config);

ordered_json cv_json(const models::CVSelection& cv);

// Test and independent-test rows, ascending.
std::vector<std::size_t> held_out_rows(const preprocess::SplitAssignment& split);

}  // namespace ipsrs::pipeline::detail
