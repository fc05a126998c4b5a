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
#include <filesystem>

#include "internal.hpp"
#include "ipsrs/csv.hpp"
#include "ipsrs/evaluate.hpp"
#include "ipsrs/pipeline/pipeline.hpp"

namespace ipsrs::pipeline {

std::vector<FeatureSetResult> compare_feature_sets(const PipelineConfig& config) {
  cohort::GeneratorSpec spec = config.generator;
  spec.seed = stage_seed(config, "generate");
  const auto cohort = cohort::generate_cohort(spec);
  std::vector<int> cci;
  for (const auto& r : cohort.records) cci.push_back(r.cci);

  std::vector<FeatureSetResult> out;
  for (auto set : {preprocess::FeatureSet::individual, preprocess::FeatureSet::contextual,
                   preprocess::FeatureSet::combined}) {
    const auto prepared = detail::prepare(cohort.records, cohort.linked_contextual,
                                          cohort.feature_dictionary, set, config);
    const auto rows = detail::resample_rows(prepared.matrix, prepared.split, cci, config);
    const auto trained = detail::train_models(prepared.matrix, prepared.split, rows, config);
    const auto test = prepared.split.rows(preprocess::Partition::test);
    const Matrix x_test = prepared.matrix.values.select_rows(test);
    const auto y_test = select(prepared.matrix.labels, test);
    for (const char* fam : detail::kFamilies) {
      const auto scores = models::predict_proba(trained.get(fam), x_test);
      out.push_back({set, fam, evaluate::auroc(scores, y_test), prepared.matrix.values.cols()});
    }
  }
  return out;
}

std::vector<FeatureSetResult> run_compare_feature_sets(const PipelineConfig& config) {
  std::filesystem::create_directories(config.out);
  const auto results = compare_feature_sets(config);
  // Depends on every section up to training; the feature-set selector itself
  // is overridden per row.
  PipelineConfig keyed = config;
  keyed.feature_set = preprocess::FeatureSet::combined;
  const auto h = stage_hash(keyed, Stage::train);

  csv::Writer w(config.out / "feature_sets.csv");
  w.comment(artifact_header("ipsrs.feature_sets/1", h));
  w.row({"feature_set", "model", "columns", "test_auroc"});
  auto doc = detail::artifact_json("ipsrs.feature_sets/1", h);
  doc["rows"] = detail::ordered_json::array();
  for (const auto& r : results) {
    const std::string set(preprocess::to_string(r.feature_set));
    w.row({set, r.family, std::to_string(r.columns), csv::format_double(r.test_auroc)});
    doc["rows"].push_back(
        {{"feature_set", set}, {"model", r.family}, {"columns", r.columns}, {"test_auroc", r.test_auroc}});
  }
  w.close();
  detail::write_json(config.out / "feature_sets.json", doc);
  return results;
}

}  // namespace ipsrs::pipeline
