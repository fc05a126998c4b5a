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

// A fitted model of either family, prediction, cross-validated grid search
// and the JSON model format.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ipsrs/models/gbdt.hpp"
#include "ipsrs/models/linear.hpp"

namespace ipsrs::models {

using Model = std::variant<LinearModel, TreeEnsemble>;

std::vector<double> predict_margin(const Model& model, const Matrix& x);
std::vector<double> predict_proba(const Model& model, const Matrix& x);
std::size_t model_width(const Model& model);

// A point of the hyperparameter grid: a linear penalty or a tree config.
using HyperPoint = std::variant<Penalty, TreeConfig>;

std::string describe(const HyperPoint& point);

Model fit(const HyperPoint& point, const Matrix& x, std::span<const int> labels,
          std::optional<ValidationData> validation = std::nullopt);

struct CVSelection {
  std::vector<HyperPoint> grid;
  std::vector<std::vector<double>> fold_auroc;  // [point][fold]
  std::vector<double> mean_auroc;
  std::size_t selected = 0;
  std::string rule;
  std::vector<int> folds;  // fold of each training row
};

// Stratified fold assignment: each class is shuffled with `seed` and dealt
// round-robin across k folds.
std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed);

// Evaluates every grid point on the same stratified folds and selects the
// maximal mean fold AUROC; ties go to the larger total penalty, then fewer
// boosting rounds, then the lexicographically smaller parameter tuple.
// Results do not depend on `workers`.
CVSelection grid_search_cv(const Matrix& x, std::span<const int> labels,
                           const std::vector<HyperPoint>& grid, int k = 5, std::uint64_t seed = 0,
                           unsigned workers = 1);

// JSON text; doubles round-trip exactly.
std::string to_json(const Model& model);
Model model_from_json(std::string_view text);
void write_model(const std::filesystem::path& path, const Model& model,
                 std::string_view producer_hash = {});
Model read_model(const std::filesystem::path& path, std::string* producer_hash = nullptr);

}  // namespace ipsrs::models
