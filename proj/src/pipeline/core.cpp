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
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "internal.hpp"
#include "ipsrs/error.hpp"
#include "ipsrs/pipeline/pipeline.hpp"
#include "ipsrs/sampling.hpp"

namespace ipsrs::pipeline {

std::string artifact_header(std::string_view schema, std::string_view hash) {
  return "ipsrs-artifact schema=" + std::string(schema) + " config_hash=" + std::string(hash);
}

void verify_artifact(const std::filesystem::path& path, std::string_view schema,
                     std::string_view expected_hash) {
  std::ifstream file(path);
  if (!file) throw IoError("missing input artifact '" + path.string() + "'");
  std::string found_schema;
  std::string found_hash;
  if (path.extension() == ".json") {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(file);
    } catch (const nlohmann::json::exception&) {
      throw IoError("cannot parse artifact '" + path.string() + "'");
    }
    found_schema = doc.value("schema", "");
    found_hash = doc.value("config_hash", "");
  } else {
    std::string line;
    std::getline(file, line);
    std::istringstream tokens(line);
    std::string token;
    tokens >> token;
    if (token == "#") tokens >> token;
    if (token != "#ipsrs-artifact" && token != "ipsrs-artifact") {
      throw Error("artifact '" + path.string() + "' has no ipsrs-artifact header");
    }
    while (tokens >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = token.substr(0, eq);
      if (key == "schema") found_schema = token.substr(eq + 1);
      if (key == "config_hash") found_hash = token.substr(eq + 1);
    }
  }
  if (found_schema != schema) {
    throw Error("artifact '" + path.string() + "' has schema '" + found_schema + "', expected '" +
                std::string(schema) + "'");
  }
  if (found_hash != expected_hash) {
    throw Error("artifact '" + path.string() + "' was produced by config hash " + found_hash +
                " but the current config expects " + std::string(expected_hash) +
                "; rerun the producing stage");
  }
}

namespace detail {

ordered_json artifact_json(std::string_view schema, std::string_view hash) {
  ordered_json doc;
  doc["schema"] = schema;
  doc["config_hash"] = hash;
  return doc;
}

void write_json(const std::filesystem::path& path, const ordered_json& doc) {
  std::ofstream file(path);
  file << doc.dump(2) << '\n';
  if (!file) throw IoError("cannot write '" + path.string() + "'");
}

ordered_json read_json(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw IoError("missing input artifact '" + path.string() + "'");
  try {
    return ordered_json::parse(file);
  } catch (const nlohmann::json::exception&) {
    throw IoError("cannot parse '" + path.string() + "'");
  }
}

ordered_json body(const ordered_json& doc) {
  ordered_json out = doc;
  out.erase("schema");
  out.erase("config_hash");
  return out;
}

ordered_json number(double value) {
  return std::isfinite(value) ? ordered_json(value) : ordered_json(nullptr);
}

Prepared prepare(std::span<const cohort::PatientRecord> records,
                 const std::vector<std::map<std::string, double>>& linked,
                 std::span<const cohort::FeatureInfo> dictionary, preprocess::FeatureSet set,
                 const PipelineConfig& config) {
  Prepared out;
  const auto table = preprocess::build_table(records, linked, dictionary, set);
  out.split = preprocess::split(table.index_years, table.labels, config.cutoff_year, config.ratios,
                                stage_seed(config, "preprocess.split"));
  const auto train = out.split.rows(preprocess::Partition::train);
  out.state.feature_set = set;
  out.state.imputation = preprocess::fit_imputation(table, train);
  const auto completed = preprocess::impute(table, out.state.imputation);
  const auto fitted = preprocess::encode_and_normalize(completed.select_rows(train));
  out.state.normalization = fitted.normalization;
  out.matrix = preprocess::encode_and_normalize(completed, out.state.normalization);
  return out;
}

std::vector<std::size_t> resample_rows(const preprocess::FeatureMatrix& matrix,
                                       const preprocess::SplitAssignment& split,
                                       std::span<const int> cci, const PipelineConfig& config) {
  const auto train = split.rows(preprocess::Partition::train);
  const auto labels = select(matrix.labels, train);
  const auto ids = select(matrix.patient_ids, train);
  const auto train_cci = select(cci, train);
  sampling::SamplingPlan plan = config.sampling;
  plan.seed = stage_seed(config, "sample");
  const auto picked = sampling::resample({labels, ids, train_cci}, plan);
  std::vector<std::size_t> out;
  out.reserve(picked.size());
  for (std::size_t i : picked) out.push_back(train[i]);
  return out;
}

Trained train_models(const preprocess::FeatureMatrix& matrix,
                     const preprocess::SplitAssignment& split,
                     std::span<const std::size_t> resampled, const PipelineConfig& config) {
  const auto train = split.rows(preprocess::Partition::train);
  const auto validation = split.rows(preprocess::Partition::validation);
  const Matrix x_train = matrix.values.select_rows(train);
  const auto y_train = select(matrix.labels, train);
  const Matrix x_fit = matrix.values.select_rows(resampled);
  const auto y_fit = select(matrix.labels, resampled);
  const Matrix x_val = matrix.values.select_rows(validation);
  const auto y_val = select(matrix.labels, validation);
  const auto cv_seed = stage_seed(config, "train.cv");

  std::vector<models::HyperPoint> linear_grid(config.models.linear.begin(),
                                              config.models.linear.end());
  std::vector<models::HyperPoint> tree_grid;
  for (auto t : config.models.gbdt) {
    t.seed = stage_seed(config, "train.gbdt");
    tree_grid.emplace_back(t);
  }

  Trained out;
  out.cv_linear = models::grid_search_cv(x_train, y_train, linear_grid, config.models.folds,
                                         cv_seed, config.workers);
  out.cv_gbdt = models::grid_search_cv(x_train, y_train, tree_grid, config.models.folds, cv_seed,
                                       config.workers);
  out.linear = models::fit(linear_grid[out.cv_linear.selected], x_fit, y_fit);
  std::optional<models::ValidationData> early;
  if (!validation.empty()) early.emplace(models::ValidationData{x_val, y_val});
  out.gbdt = models::fit(tree_grid[out.cv_gbdt.selected], x_fit, y_fit, early);
  return out;
}

ordered_json cv_json(const models::CVSelection& cv) {
  ordered_json j;
  j["rule"] = cv.rule;
  j["selected"] = cv.selected;
  j["selected_point"] = models::describe(cv.grid[cv.selected]);
  auto& points = j["grid"] = ordered_json::array();
  for (std::size_t i = 0; i < cv.grid.size(); ++i) {
    ordered_json p;
    p["point"] = models::describe(cv.grid[i]);
    p["mean_auroc"] = number(cv.mean_auroc[i]);
    p["fold_auroc"] = ordered_json::array();
    for (double a : cv.fold_auroc[i]) p["fold_auroc"].push_back(number(a));
    points.push_back(p);
  }
  return j;
}

std::vector<std::size_t> held_out_rows(const preprocess::SplitAssignment& split) {
  auto rows = split.rows(preprocess::Partition::test);
  const auto extra = split.rows(preprocess::Partition::independent_test);
  rows.insert(rows.end(), extra.begin(), extra.end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace detail
}  // namespace ipsrs::pipeline
