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

// Group confusion analysis, parity ratios for seven fairness metrics, FNR
// curves, and three mitigations: quantile repair (pre-process), adversarial
// debiasing (in-process) and calibrated equalized-odds mixing
// (post-process).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ipsrs/matrix.hpp"
#include "ipsrs/models/linear.hpp"

namespace ipsrs::fairness {

struct GroupConfusion {
  std::string group;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  // nullopt when the denominator is zero.
  std::optional<double> fnr() const;
  std::optional<double> fpr() const;
  std::optional<double> tpr() const;
  std::optional<double> ppv() const;
  std::optional<double> npv() const;
  std::optional<double> accuracy() const;
  std::optional<double> fn_fp_ratio() const;
};

// Predicted positive iff score >= threshold. Groups appear in sorted order.
std::vector<GroupConfusion> group_confusions(std::span<const double> scores,
                                             std::span<const int> labels,
                                             std::span<const std::string> groups, double threshold);

struct FairnessConfig {
  std::vector<std::string> protected_groups{"NHB", "Hispanic"};
  std::string privileged = "NHW";
  double band_lower = 0.80;
  double band_upper = 1.25;
};

void validate(const FairnessConfig& config);

enum class Metric {
  predictive_parity,
  predictive_equality,
  equalized_odds,
  conditional_use_accuracy,
  treatment_equality,
  equality_of_opportunity,
  overall_accuracy,
};

inline constexpr Metric kMetrics[] = {
    Metric::predictive_parity,   Metric::predictive_equality,    Metric::equalized_odds,
    Metric::conditional_use_accuracy, Metric::treatment_equality, Metric::equality_of_opportunity,
    Metric::overall_accuracy};

std::string_view to_string(Metric metric);

struct RatioComponent {
  std::string quantity;        // "ppv", "fpr", ...
  std::optional<double> ratio;  // protected / privileged; nullopt = undefined
};

struct MetricRatio {
  Metric metric = Metric::predictive_parity;
  std::string protected_group;
  std::vector<RatioComponent> components;  // two for paired metrics
  // nullopt when any component is undefined; otherwise every component in band.
  std::optional<bool> fair;
};

bool in_band(double ratio, const FairnessConfig& config);

// Ratios are undefined when either group's value is undefined or zero.
std::vector<MetricRatio> fairness_metrics(std::span<const GroupConfusion> confusions,
                                          const FairnessConfig& config);

struct FnrSeries {
  std::string group;
  std::vector<double> fnr;  // parallel to the thresholds
};

struct FnrCurve {
  std::vector<double> thresholds;  // ascending
  std::vector<FnrSeries> series;
};

// Groups without positives are excluded with a warning.
FnrCurve fnr_curve(std::span<const double> scores, std::span<const int> labels,
                   std::span<const std::string> groups, std::vector<double> thresholds);

// Per repaired column and group: x + lambda * (Qbar(u) - x), u the
// tie-averaged rank quantile of x within its group and Qbar the mean of the
// group quantile functions at u. Groups with fewer than two values pass
// through with a warning.
Matrix mitigate_dir(const Matrix& x, std::span<const std::string> groups,
                    std::span<const std::size_t> columns, double lambda);

struct AdversarialSettings {
  double alpha = 1.0;            // adversary weight
  double learning_rate = 0.5;    // predictor step
  double adversary_learning_rate = 0.5;
  int iterations = 3000;
  double l2 = 0.0;               // ridge on predictor weights
  bool adversary_sees_label = false;
  std::uint64_t seed = 0;
};

struct AdversarialResult {
  models::LinearModel predictor;
  std::vector<double> adversary;  // intercept, margin weight[, label weight]
  double final_predictor_loss = 0.0;
  double final_adversary_loss = 0.0;
};

// Full-batch simultaneous gradient descent. `protected_indicator` is 1 for
// the protected group. With alpha = 0 the update is plain gradient descent
// (no projection). Throws DivergenceError on a non-finite loss.
AdversarialResult mitigate_adversarial(const Matrix& x, std::span<const int> labels,
                                       std::span<const int> protected_indicator,
                                       const AdversarialSettings& settings);

struct CalibratedEoResult {
  std::vector<std::string> groups;  // the two groups, sorted
  std::vector<double> base_rate;
  std::vector<double> generalized_fnr;
  std::vector<double> mixing_rate;  // zero for the untouched group
  std::string mixed_group;          // empty when nothing is mixed
  std::vector<double> scores;       // post-processed
  // Generalized FNR of each group in expectation after mixing.
  std::vector<double> expected_generalized_fnr;
};

// Generalized FNR = mean over positives of (1 - score). The lower-cost group
// is mixed with its base-rate predictor at rate p chosen to equalize the
// costs; each of its rows takes the base rate with probability p (seeded).
// Throws ValidationError unless exactly two groups are present, and when a
// group's base rate is 0 or 1.
CalibratedEoResult mitigate_calibrated_eo(std::span<const double> scores,
                                          std::span<const int> labels,
                                          std::span<const std::string> groups, std::uint64_t seed);

// Generalized FNR of the rows of `group`.
double generalized_fnr(std::span<const double> scores, std::span<const int> labels,
                       std::span<const std::string> groups, std::string_view group);

}  // namespace ipsrs::fairness
