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
#include "ipsrs/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "ipsrs/diagnostics.hpp"
#include "ipsrs/error.hpp"
#include "ipsrs/rng.hpp"

namespace ipsrs::fairness {
namespace {

std::optional<double> rate(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> ratio(std::optional<double> prot, std::optional<double> priv) {
  if (!prot || !priv || *prot <= 0.0 || *priv <= 0.0) return std::nullopt;
  return *prot / *priv;
}

void check_lengths(std::size_t a, std::size_t b, std::size_t c) {
  if (a != b || b != c) throw ValidationError("scores, labels and groups differ in length");
}

double mean_logloss(std::span<const double> margins, std::span<const int> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) s += models::softplus(margins[i]) - y[i] * margins[i];
  return s / static_cast<double>(margins.size());
}

// Quantile function of sorted values at u in (0, 1): linear interpolation
// at position u * n - 0.5.
double quantile(const std::vector<double>& sorted, double u) {
  const double n = static_cast<double>(sorted.size());
  const double pos = std::clamp(u * n - 0.5, 0.0, n - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double f = pos - static_cast<double>(lo);
  return sorted[lo] + f * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::optional<double> GroupConfusion::fnr() const { return rate(fn, fn + tp); }
std::optional<double> GroupConfusion::fpr() const { return rate(fp, fp + tn); }
std::optional<double> GroupConfusion::tpr() const { return rate(tp, tp + fn); }
std::optional<double> GroupConfusion::ppv() const { return rate(tp, tp + fp); }
std::optional<double> GroupConfusion::npv() const { return rate(tn, tn + fn); }
std::optional<double> GroupConfusion::accuracy() const { return rate(tp + tn, tp + tn + fp + fn); }
std::optional<double> GroupConfusion::fn_fp_ratio() const { return rate(fn, fp); }

std::vector<GroupConfusion> group_confusions(std::span<const double> scores,
                                             std::span<const int> labels,
                                             std::span<const std::string> groups,
                                             double threshold) {
  check_lengths(scores.size(), labels.size(), groups.size());
  std::map<std::string, GroupConfusion> by_group;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto& c = by_group[groups[i]];
    c.group = groups[i];
    const bool flagged = scores[i] >= threshold;
    if (labels[i] == 1) {
      (flagged ? c.tp : c.fn)++;
    } else {
      (flagged ? c.fp : c.tn)++;
    }
  }
  std::vector<GroupConfusion> out;
  for (auto& [name, c] : by_group) out.push_back(c);
  return out;
}

void validate(const FairnessConfig& config) {
  if (!(config.band_lower < 1.0 && 1.0 < config.band_upper)) {
    throw ValidationError("fair band must satisfy lower < 1 < upper");
  }
  if (config.privileged.empty()) throw ValidationError("privileged group is empty");
  for (const auto& g : config.protected_groups) {
    if (g == config.privileged) throw ValidationError("privileged group listed as protected");
  }
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::predictive_parity:
      return "predictive_parity";
    case Metric::predictive_equality:
      return "predictive_equality";
    case Metric::equalized_odds:
      return "equalized_odds";
    case Metric::conditional_use_accuracy:
      return "conditional_use_accuracy_equality";
    case Metric::treatment_equality:
      return "treatment_equality";
    case Metric::equality_of_opportunity:
      return "equality_of_opportunity";
    case Metric::overall_accuracy:
      return "overall_accuracy_equality";
  }
  return "unknown";
}

bool in_band(double r, const FairnessConfig& config) {
  return config.band_lower <= r && r <= config.band_upper;
}

std::vector<MetricRatio> fairness_metrics(std::span<const GroupConfusion> confusions,
                                          const FairnessConfig& config) {
  validate(config);
  auto find = [&](const std::string& g) -> const GroupConfusion& {
    for (const auto& c : confusions) {
      if (c.group == g) return c;
    }
    throw ValidationError("group '" + g + "' has no rows");
  };
  const GroupConfusion& priv = find(config.privileged);
  std::vector<MetricRatio> out;
  for (const auto& g : config.protected_groups) {
    const GroupConfusion& prot = find(g);
    for (Metric m : kMetrics) {
      MetricRatio r;
      r.metric = m;
      r.protected_group = g;
      auto add = [&](std::string q, std::optional<double> a, std::optional<double> b) {
        r.components.push_back({std::move(q), ratio(a, b)});
      };
      switch (m) {
        case Metric::predictive_parity:
          add("ppv", prot.ppv(), priv.ppv());
          break;
        case Metric::predictive_equality:
          add("fpr", prot.fpr(), priv.fpr());
          break;
        case Metric::equalized_odds:
          add("tpr", prot.tpr(), priv.tpr());
          add("fpr", prot.fpr(), priv.fpr());
          break;
        case Metric::conditional_use_accuracy:
          add("ppv", prot.ppv(), priv.ppv());
          add("npv", prot.npv(), priv.npv());
          break;
        case Metric::treatment_equality:
          add("fn_fp", prot.fn_fp_ratio(), priv.fn_fp_ratio());
          break;
        case Metric::equality_of_opportunity:
          add("fnr", prot.fnr(), priv.fnr());
          break;
        case Metric::overall_accuracy:
          add("accuracy", prot.accuracy(), priv.accuracy());
          break;
      }
      bool defined = true, fair = true;
      for (const auto& c : r.components) {
        if (!c.ratio) {
          defined = false;
        } else if (!in_band(*c.ratio, config)) {
          fair = false;
        }
      }
      if (defined) r.fair = fair;
      out.push_back(std::move(r));
    }
  }
  return out;
}

FnrCurve fnr_curve(std::span<const double> scores, std::span<const int> labels,
                   std::span<const std::string> groups, std::vector<double> thresholds) {
  check_lengths(scores.size(), labels.size(), groups.size());
  std::sort(thresholds.begin(), thresholds.end());
  std::map<std::string, std::vector<double>> positives;
  std::set<std::string> all;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    all.insert(groups[i]);
    if (labels[i] == 1) positives[groups[i]].push_back(scores[i]);
  }
  FnrCurve curve;
  curve.thresholds = thresholds;
  for (const auto& g : all) {
    auto it = positives.find(g);
    if (it == positives.end()) {
      warn("group '" + g + "' has no positives; excluded from the FNR curve");
      continue;
    }
    auto& s = it->second;
    std::sort(s.begin(), s.end());
    FnrSeries series;
    series.group = g;
    for (double t : thresholds) {
      // Missed positives are those scored below t.
      const auto missed = std::lower_bound(s.begin(), s.end(), t) - s.begin();
      series.fnr.push_back(static_cast<double>(missed) / static_cast<double>(s.size()));
    }
    curve.series.push_back(std::move(series));
  }
  return curve;
}

Matrix mitigate_dir(const Matrix& x, std::span<const std::string> groups,
                    std::span<const std::size_t> columns, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("repair level must lie in [0, 1]");
  if (groups.size() != x.rows()) throw ValidationError("group labels do not match the rows");
  Matrix out = x;
  if (lambda == 0.0) return out;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);

  for (std::size_t col : columns) {
    if (col >= x.cols()) throw ValidationError("repair column index out of range");
    std::vector<std::vector<double>> sorted;
    std::vector<const std::vector<std::size_t>*> eligible;
    for (const auto& [name, rows] : members) {
      if (rows.size() < 2) {
        warn("group '" + name + "' has fewer than two values in column " + std::to_string(col) +
             "; left unrepaired");
        continue;
      }
      std::vector<double> v;
      for (std::size_t r : rows) v.push_back(x(r, col));
      std::sort(v.begin(), v.end());
      sorted.push_back(std::move(v));
      eligible.push_back(&rows);
    }
    if (eligible.size() < 2) continue;
    for (std::size_t g = 0; g < eligible.size(); ++g) {
      const auto& rows = *eligible[g];
      const auto& own = sorted[g];
      const double n = static_cast<double>(rows.size());
      for (std::size_t r : rows) {
        const double v = x(r, col);
        const auto lo = std::lower_bound(own.begin(), own.end(), v) - own.begin();
        const auto hi = std::upper_bound(own.begin(), own.end(), v) - own.begin();
        // Average 1-based rank of the tie block.
        const double rank = 0.5 * static_cast<double>(lo + 1 + hi);
        const double u = (rank - 0.5) / n;
        double qbar = 0.0;
        for (const auto& s : sorted) qbar += quantile(s, u);
        qbar /= static_cast<double>(sorted.size());
        out(r, col) = v + lambda * (qbar - v);
      }
    }
  }
  return out;
}

AdversarialResult mitigate_adversarial(const Matrix& x, std::span<const int> labels,
                                       std::span<const int> protected_indicator,
                                       const AdversarialSettings& s) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (labels.size() != n || protected_indicator.size() != n) {
    throw ValidationError("labels and group indicator must match the rows");
  }
  if (s.alpha < 0.0) throw ValidationError("adversary weight must be >= 0");
  if (!(s.learning_rate > 0.0) || !(s.adversary_learning_rate > 0.0) || s.iterations < 0) {
    throw ValidationError("invalid adversarial optimizer settings");
  }
  double ybar = 0.0, zbar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ybar += labels[i];
    zbar += protected_indicator[i];
  }
  ybar /= static_cast<double>(n);
  zbar /= static_cast<double>(n);
  if (ybar == 0.0 || ybar == 1.0) throw SingleClassError("labels contain a single class");
  if (zbar == 0.0 || zbar == 1.0) throw ValidationError("adversarial debiasing needs two groups");

  AdversarialResult res;
  auto& w = res.predictor.weights;
  double& b = res.predictor.intercept;
  w.assign(p, 0.0);
  b = logit(ybar);
  res.predictor.penalty.l2 = s.l2;
  Rng rng(s.seed);
  const std::size_t k = s.adversary_sees_label ? 3 : 2;
  res.adversary.assign(k, 0.0);
  res.adversary[0] = logit(zbar);
  for (std::size_t j = 1; j < k; ++j) res.adversary[j] = rng.normal(0.0, 0.1);

  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> margin(n), gp(p + 1), ga(p + 1), gc(k);
  for (int it = 0; it <= s.iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double m = b;
      for (std::size_t j = 0; j < p; ++j) m += w[j] * x(i, j);
      margin[i] = m;
    }
    std::fill(gp.begin(), gp.end(), 0.0);
    std::fill(ga.begin(), ga.end(), 0.0);
    std::fill(gc.begin(), gc.end(), 0.0);
    double adv_loss = 0.0;
    const auto& c = res.adversary;
    for (std::size_t i = 0; i < n; ++i) {
      const double rp = sigmoid(margin[i]) - labels[i];
      double sa = c[0] + c[1] * margin[i];
      if (k == 3) sa += c[2] * labels[i];
      const double ra = sigmoid(sa) - protected_indicator[i];
      adv_loss += models::softplus(sa) - protected_indicator[i] * sa;
      gp[0] += rp;
      ga[0] += ra * c[1];
      for (std::size_t j = 0; j < p; ++j) {
        gp[j + 1] += rp * x(i, j);
        ga[j + 1] += ra * c[1] * x(i, j);
      }
      gc[0] += ra;
      gc[1] += ra * margin[i];
      if (k == 3) gc[2] += ra * labels[i];
    }
    for (auto& v : gp) v *= inv_n;
    for (auto& v : ga) v *= inv_n;
    for (auto& v : gc) v *= inv_n;
    for (std::size_t j = 0; j < p; ++j) gp[j + 1] += s.l2 * w[j];
    adv_loss *= inv_n;
    double pred_loss = mean_logloss(margin, labels);
    for (double v : w) pred_loss += 0.5 * s.l2 * v * v;
    res.final_predictor_loss = pred_loss;
    res.final_adversary_loss = adv_loss;
    if (!std::isfinite(pred_loss) || !std::isfinite(adv_loss)) {
      throw DivergenceError("adversarial training diverged; use a smaller learning rate");
    }
    if (it == s.iterations) break;

    std::vector<double> step(gp);
    if (s.alpha > 0.0) {
      const double aa = std::inner_product(ga.begin(), ga.end(), ga.begin(), 0.0);
      const double pa = std::inner_product(gp.begin(), gp.end(), ga.begin(), 0.0);
      const double proj = aa > 0.0 ? pa / aa : 0.0;
      for (std::size_t j = 0; j <= p; ++j) step[j] = gp[j] - proj * ga[j] - s.alpha * ga[j];
    }
    b -= s.learning_rate * step[0];
    for (std::size_t j = 0; j < p; ++j) w[j] -= s.learning_rate * step[j + 1];
    for (std::size_t j = 0; j < k; ++j) res.adversary[j] -= s.adversary_learning_rate * gc[j];
  }
  res.predictor.iterations = s.iterations;
  res.predictor.converged = true;
  return res;
}

double generalized_fnr(std::span<const double> scores, std::span<const int> labels,
                       std::span<const std::string> groups, std::string_view group) {
  check_lengths(scores.size(), labels.size(), groups.size());
  double s = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (groups[i] != group || labels[i] != 1) continue;
    s += 1.0 - scores[i];
    ++pos;
  }
  if (pos == 0) throw ValidationError("group '" + std::string(group) + "' has no positives");
  return s / static_cast<double>(pos);
}

CalibratedEoResult mitigate_calibrated_eo(std::span<const double> scores,
                                          std::span<const int> labels,
                                          std::span<const std::string> groups,
                                          std::uint64_t seed) {
  check_lengths(scores.size(), labels.size(), groups.size());
  for (double v : scores) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("scores must lie in [0, 1]");
  }
  CalibratedEoResult res;
  const std::set<std::string> names(groups.begin(), groups.end());
  if (names.size() != 2) {
    throw ValidationError("calibrated equalized odds needs exactly two groups, got " +
                          std::to_string(names.size()));
  }
  res.groups.assign(names.begin(), names.end());
  for (const auto& g : res.groups) {
    double pos = 0.0, n = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (groups[i] != g) continue;
      n += 1.0;
      pos += labels[i];
    }
    const double mu = pos / n;
    if (mu == 0.0 || mu == 1.0) {
      throw ValidationError("group '" + g + "' has a degenerate base rate");
    }
    res.base_rate.push_back(mu);
    res.generalized_fnr.push_back(generalized_fnr(scores, labels, groups, g));
  }
  res.mixing_rate.assign(2, 0.0);
  res.scores.assign(scores.begin(), scores.end());
  res.expected_generalized_fnr = res.generalized_fnr;
  const std::size_t low = res.generalized_fnr[0] <= res.generalized_fnr[1] ? 0 : 1;
  const std::size_t high = 1 - low;
  const double c_low = res.generalized_fnr[low];
  const double c_high = res.generalized_fnr[high];
  if (c_low == c_high) return res;
  const double trivial = 1.0 - res.base_rate[low];
  double p = 1.0;
  if (trivial > c_low) {
    p = (c_high - c_low) / (trivial - c_low);
  }
  if (p > 1.0 || trivial <= c_low) {
    warn("base-rate predictor cannot raise the generalized FNR of '" + res.groups[low] +
         "' enough; mixing rate clamped to 1");
    p = 1.0;
  }
  p = std::clamp(p, 0.0, 1.0);
  res.mixing_rate[low] = p;
  res.mixed_group = res.groups[low];
  res.expected_generalized_fnr[low] = (1.0 - p) * c_low + p * trivial;
  Rng rng(seed);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (groups[i] != res.groups[low]) continue;
    if (rng.uniform() < p) res.scores[i] = res.base_rate[low];
  }
  return res;
}

}  // namespace ipsrs::fairness
