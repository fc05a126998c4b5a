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

// Discrimination and threshold metrics, 11-group risk stratification, the
// adjusted per-group odds ratio and the explained-risk fraction.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ipsrs/matrix.hpp"

namespace ipsrs::evaluate {

// Pairwise definition with ties counted half, computed from average ranks.
// Throws SingleClassError unless both classes are present.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct MetricReport {
  double auroc = 0.0;
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
  std::size_t positives = 0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Predicted positive iff score >= threshold.
MetricReport threshold_metrics(std::span<const double> scores, std::span<const int> labels,
                               double threshold);

// Training-score quantile at (1 - prevalence): the score such that the
// top `prevalence` share is flagged.
double default_threshold(std::span<const double> train_scores, std::span<const int> train_labels);

struct RiskGroup {
  int index = 0;  // 1..11, ascending score
  std::size_t n = 0;
  std::size_t events = 0;
  double event_rate = 0.0;
  double min_score = 0.0;
  double max_score = 0.0;
};

struct RiskGroupTable {
  // Cut quantiles 0.1..0.9 and 0.95.
  std::vector<double> quantiles;
  std::vector<RiskGroup> groups;
  // Group index per input row, parallel to the scores.
  std::vector<int> assignment;
  // Event rate of group 11 over group 1; infinite when group 1 has no events.
  double top_bottom_ratio = 0.0;
};

// Rows are ordered by (score, patient_id) and cut by position at the
// quantiles; groups 1-9 are deciles, 10 the 90-95% band, 11 the top 5%.
RiskGroupTable risk_groups(std::span<const double> scores, std::span<const int> outcomes,
                           std::span<const std::int64_t> patient_ids);

struct OddsRatio {
  double estimate = 1.0;
  double lower = 1.0;
  double upper = 1.0;
  double beta = 0.0;
  double standard_error = 0.0;
};

// "1.16 (1.10–1.22)" with an en dash.
std::string format_odds_ratio(const OddsRatio& odds_ratio);

struct Adjusters {
  std::span<const double> age;
  std::span<const int> female;      // 1 = female
  std::span<const std::string> race;  // NHW is the reference level
  std::span<const double> cci;
};

// Logistic regression of the outcome on the group index (one ordinal
// covariate) plus adjusters; OR = exp(beta_group).
OddsRatio adjusted_or_per_decile(std::span<const int> group_index, const Adjusters& adjusters,
                                std::span<const int> outcomes);

// Adjuster design: age, female, one dummy per non-reference race present,
// cci. Rows with a missing age are rejected.
Matrix adjuster_design(const Adjusters& adjusters, std::vector<std::string>* names = nullptr);

// McFadden pseudo-R^2 = 1 - ll(model) / ll(intercept only).
double mcfadden_r2(const Matrix& design, std::span<const int> outcomes);

// (R2(base + group) - R2(base)) / R2(base + group); group index enters as
// one ordinal column.
double explained_risk_fraction(const Matrix& base, std::span<const int> group_index,
                               std::span<const int> outcomes);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

// ROC points (fpr, tpr) from the highest threshold down, starting at (0,0).
std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

}  // namespace ipsrs::evaluate
