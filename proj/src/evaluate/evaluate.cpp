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
#include "ipsrs/evaluate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

#include "ipsrs/error.hpp"
#include "ipsrs/models/linear.hpp"

namespace ipsrs::evaluate {
namespace {

void check_labels(std::span<const double> scores, std::span<const int> labels,
                  std::size_t* positives) {
  if (scores.size() != labels.size()) {
    throw ValidationError("scores and labels differ in length");
  }
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  if (pos == 0 || pos == labels.size()) {
    throw SingleClassError("metric requires both classes; labels contain a single class");
  }
  *positives = pos;
}

constexpr std::array<double, 10> kCutQuantiles{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95};

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t pos = 0;
  check_labels(scores, labels, &pos);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of average ranks (1-based) of the positives.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::size_t tied_pos = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      tied_pos += static_cast<std::size_t>(labels[order[j]]);
      ++j;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += avg_rank * static_cast<double>(tied_pos);
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double q = static_cast<double>(n - pos);
  return (rank_sum - p * (p + 1.0) * 0.5) / (p * q);
}

MetricReport threshold_metrics(std::span<const double> scores, std::span<const int> labels,
                               double threshold) {
  MetricReport r;
  check_labels(scores, labels, &r.positives);
  r.n = scores.size();
  r.threshold = threshold;
  for (std::size_t i = 0; i < r.n; ++i) {
    const bool flagged = scores[i] >= threshold;
    if (labels[i] == 1) {
      (flagged ? r.tp : r.fn)++;
    } else {
      (flagged ? r.fp : r.tn)++;
    }
  }
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  r.precision = ratio(r.tp, r.tp + r.fp);
  r.recall = ratio(r.tp, r.tp + r.fn);
  r.specificity = ratio(r.tn, r.tn + r.fp);
  r.accuracy = ratio(r.tp + r.tn, r.n);
  r.f1 = r.precision + r.recall == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  r.auroc = auroc(scores, labels);
  return r;
}

double default_threshold(std::span<const double> train_scores,
                         std::span<const int> train_labels) {
  std::size_t pos = 0;
  check_labels(train_scores, train_labels, &pos);
  std::vector<double> sorted(train_scores.begin(), train_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const std::size_t k = std::min(n - 1, n - pos);
  return sorted[k];
}

RiskGroupTable risk_groups(std::span<const double> scores, std::span<const int> outcomes,
                           std::span<const std::int64_t> patient_ids) {
  const std::size_t n = scores.size();
  if (outcomes.size() != n || patient_ids.size() != n) {
    throw ValidationError("risk_groups inputs differ in length");
  }
  if (n < 22) {
    throw ValidationError("risk stratification needs at least 22 rows, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return patient_ids[a] < patient_ids[b];
  });

  RiskGroupTable table;
  table.quantiles.assign(kCutQuantiles.begin(), kCutQuantiles.end());
  table.assignment.assign(n, 0);
  std::vector<std::size_t> cuts{0};
  for (double q : kCutQuantiles) {
    cuts.push_back(static_cast<std::size_t>(std::floor(q * static_cast<double>(n) + 1e-9)));
  }
  cuts.push_back(n);
  for (std::size_t g = 0; g + 1 < cuts.size(); ++g) {
    RiskGroup group;
    group.index = static_cast<int>(g + 1);
    group.n = cuts[g + 1] - cuts[g];
    for (std::size_t k = cuts[g]; k < cuts[g + 1]; ++k) {
      const std::size_t row = order[k];
      table.assignment[row] = group.index;
      group.events += outcomes[row] == 1 ? 1 : 0;
    }
    group.min_score = scores[order[cuts[g]]];
    group.max_score = scores[order[cuts[g + 1] - 1]];
    group.event_rate = static_cast<double>(group.events) / static_cast<double>(group.n);
    table.groups.push_back(group);
  }
  const double bottom = table.groups.front().event_rate;
  const double top = table.groups.back().event_rate;
  table.top_bottom_ratio =
      bottom > 0.0 ? top / bottom
                   : (top > 0.0 ? std::numeric_limits<double>::infinity()
                                : std::numeric_limits<double>::quiet_NaN());
  return table;
}

std::string format_odds_ratio(const OddsRatio& odds_ratio) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.2f (%.2f–%.2f)", odds_ratio.estimate, odds_ratio.lower,
                odds_ratio.upper);
  return buf;
}

Matrix adjuster_design(const Adjusters& a, std::vector<std::string>* names) {
  const std::size_t n = a.age.size();
  if (a.female.size() != n || a.race.size() != n || a.cci.size() != n) {
    throw ValidationError("adjuster columns differ in length");
  }
  std::vector<std::string> levels;
  for (const char* level : {"NHB", "Hispanic", "Other"}) {
    if (std::find(a.race.begin(), a.race.end(), level) != a.race.end()) levels.emplace_back(level);
  }
  std::set<std::string> extra;
  for (const auto& r : a.race) {
    if (r != "NHW" && r != "NHB" && r != "Hispanic" && r != "Other") extra.insert(r);
  }
  levels.insert(levels.end(), extra.begin(), extra.end());

  Matrix x(n, 3 + levels.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(a.age[i])) {
      throw ValidationError("adjuster age is missing for row " + std::to_string(i));
    }
    x(i, 0) = a.age[i];
    x(i, 1) = a.female[i];
    for (std::size_t k = 0; k < levels.size(); ++k) x(i, 2 + k) = a.race[i] == levels[k] ? 1 : 0;
    x(i, 2 + levels.size()) = a.cci[i];
  }
  if (names) {
    *names = {"age", "female"};
    for (const auto& l : levels) names->push_back("race=" + l);
    names->push_back("cci");
  }
  return x;
}

OddsRatio adjusted_or_per_decile(std::span<const int> group_index, const Adjusters& adjusters,
                                std::span<const int> outcomes) {
  std::vector<std::string> adj_names;
  const Matrix adj = adjuster_design(adjusters, &adj_names);
  const std::size_t n = adj.rows();
  if (group_index.size() != n || outcomes.size() != n) {
    throw ValidationError("group index, adjusters and outcomes differ in length");
  }
  Matrix x(n, adj.cols() + 1);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = group_index[i];
    for (std::size_t j = 0; j < adj.cols(); ++j) x(i, j + 1) = adj(i, j);
  }
  std::vector<std::string> names{"risk_group"};
  names.insert(names.end(), adj_names.begin(), adj_names.end());
  const auto model = models::fit_logistic_irls(x, outcomes, {}, names);
  const auto ci = models::wald_interval(model, 1);
  OddsRatio r;
  r.beta = ci.estimate;
  r.standard_error = model.standard_error(1);
  r.estimate = std::exp(ci.estimate);
  r.lower = std::exp(ci.lower);
  r.upper = std::exp(ci.upper);
  return r;
}

double mcfadden_r2(const Matrix& design, std::span<const int> outcomes) {
  const auto model = models::fit_logistic_irls(design, outcomes);
  const auto margins = models::predict_margin(model, design);
  double ll = 0.0;
  double ybar = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    ll += outcomes[i] * margins[i] - models::softplus(margins[i]);
    ybar += outcomes[i];
  }
  const double n = static_cast<double>(outcomes.size());
  ybar /= n;
  const double ll_null = n * (ybar * std::log(ybar) + (1.0 - ybar) * std::log(1.0 - ybar));
  return 1.0 - ll / ll_null;
}

double explained_risk_fraction(const Matrix& base, std::span<const int> group_index,
                               std::span<const int> outcomes) {
  const std::size_t n = base.rows();
  if (group_index.size() != n || outcomes.size() != n) {
    throw ValidationError("base design, group index and outcomes differ in length");
  }
  Matrix full(n, base.cols() + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < base.cols(); ++j) full(i, j) = base(i, j);
    full(i, base.cols()) = group_index[i];
  }
  const double r2_base = mcfadden_r2(base, outcomes);
  const double r2_full = mcfadden_r2(full, outcomes);
  if (r2_full <= 0.0) return 0.0;
  return (r2_full - r2_base) / r2_full;
}

std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  std::size_t pos = 0;
  check_labels(scores, labels, &pos);
  const std::size_t n = scores.size();
  const double neg = static_cast<double>(n - pos);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<CurvePoint> pts{{0.0, 0.0}};
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1.0;
      ++j;
    }
    pts.push_back({fp / neg, tp / static_cast<double>(pos)});
    i = j;
  }
  return pts;
}

}  // namespace ipsrs::evaluate
