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
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "internal.hpp"
#include "ipsrs/causal.hpp"
#include "ipsrs/csv.hpp"
#include "ipsrs/diagnostics.hpp"
#include "ipsrs/error.hpp"
#include "ipsrs/evaluate.hpp"
#include "ipsrs/explain.hpp"
#include "ipsrs/fairness.hpp"
#include "ipsrs/pipeline/pipeline.hpp"
#include "ipsrs/rng.hpp"

namespace ipsrs::pipeline {
namespace {

namespace fs = std::filesystem;
using detail::artifact_json;
using detail::body;
using detail::kFamilies;
using detail::number;
using detail::ordered_json;
using detail::read_json;
using detail::write_json;
using preprocess::Partition;

constexpr Partition kPartitions[] = {Partition::train, Partition::validation, Partition::test,
                                     Partition::independent_test};

std::string fmt(double v) { return csv::format_double(v); }

// Matrix, split and demographics in matrix row order.
struct ModelingData {
  preprocess::FeatureMatrix matrix;
  preprocess::SplitAssignment split;
};

ModelingData load_modeling(const fs::path& dir, const std::string& preprocess_hash,
                           int cutoff_year) {
  verify_artifact(dir / "matrix.csv", "ipsrs.matrix/1", preprocess_hash);
  verify_artifact(dir / "split.csv", "ipsrs.split/1", preprocess_hash);
  ModelingData d;
  d.matrix = preprocess::read_matrix_csv(dir / "matrix.csv");
  const auto table = csv::read(dir / "split.csv");
  const auto id_col = table.column("patient_id");
  const auto part_col = table.column("partition");
  if (table.rows.size() != d.matrix.rows()) {
    throw IoError("split.csv and matrix.csv row counts differ");
  }
  d.split.cutoff_year = cutoff_year;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto id = csv::parse_int(table.rows[i][id_col], "split.csv patient_id");
    if (id != d.matrix.patient_ids[i]) {
      throw IoError("split.csv row " + std::to_string(i + 1) + " does not match matrix.csv");
    }
    d.split.partition.push_back(preprocess::parse_partition(table.rows[i][part_col]));
  }
  return d;
}

struct Demographics {
  std::vector<double> age;  // NaN when unobserved
  std::vector<int> female;
  std::vector<std::string> race;
  std::vector<int> cci;
};

Demographics load_demographics(const fs::path& dir, const std::string& generate_hash,
                               std::span<const std::int64_t> patient_ids) {
  verify_artifact(dir / "features.json", "ipsrs.feature_dictionary/1", generate_hash);
  verify_artifact(dir / "cohort.csv", "ipsrs.cohort/1", generate_hash);
  const auto dict = cohort::read_feature_dictionary(dir / "features.json");
  const auto records = cohort::read_cohort_csv(dir / "cohort.csv", dict);
  std::map<std::int64_t, const cohort::PatientRecord*> by_id;
  for (const auto& r : records) by_id[r.patient_id] = &r;
  Demographics d;
  for (auto id : patient_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw IoError("patient " + std::to_string(id) + " missing from cohort.csv");
    }
    const auto& r = *it->second;
    d.age.push_back(r.age);
    d.female.push_back(r.sex == cohort::Sex::female ? 1 : 0);
    d.race.emplace_back(cohort::to_string(r.race_ethnicity));
    d.cci.push_back(r.cci);
  }
  return d;
}

std::vector<std::size_t> load_resampled(const fs::path& dir, const std::string& sample_hash,
                                        const preprocess::FeatureMatrix& matrix) {
  verify_artifact(dir / "sample.csv", "ipsrs.sample/1", sample_hash);
  std::map<std::int64_t, std::size_t> row_of;
  for (std::size_t i = 0; i < matrix.rows(); ++i) row_of[matrix.patient_ids[i]] = i;
  const auto table = csv::read(dir / "sample.csv");
  const auto col = table.column("patient_id");
  std::vector<std::size_t> rows;
  for (const auto& r : table.rows) {
    const auto id = csv::parse_int(r[col], "sample.csv patient_id");
    const auto it = row_of.find(id);
    if (it == row_of.end()) throw IoError("sample.csv names unknown patient " + r[col]);
    rows.push_back(it->second);
  }
  return rows;
}

models::Model load_model(const fs::path& dir, std::string_view family, const std::string& hash) {
  const auto path = dir / ("model_" + std::string(family) + ".json");
  verify_artifact(path, "ipsrs.model/1", hash);
  return models::read_model(path);
}

std::vector<std::string> column_names(const preprocess::FeatureMatrix& m) {
  std::vector<std::string> out;
  for (const auto& c : m.columns) out.push_back(c.name);
  return out;
}

std::vector<double> scores_of(const models::Model& model, const Matrix& x) {
  return models::predict_proba(model, x);
}

bool is_protected(const std::string& group, const fairness::FairnessConfig& cfg) {
  return std::find(cfg.protected_groups.begin(), cfg.protected_groups.end(), group) !=
         cfg.protected_groups.end();
}

ordered_json confusion_json(const std::vector<fairness::GroupConfusion>& confusions) {
  ordered_json out = ordered_json::array();
  for (const auto& c : confusions) {
    ordered_json g;
    g["group"] = c.group;
    g["tp"] = c.tp;
    g["fp"] = c.fp;
    g["tn"] = c.tn;
    g["fn"] = c.fn;
    auto opt = [](std::optional<double> v) { return v ? number(*v) : ordered_json(nullptr); };
    g["fnr"] = opt(c.fnr());
    g["fpr"] = opt(c.fpr());
    g["ppv"] = opt(c.ppv());
    out.push_back(g);
  }
  return out;
}

ordered_json metrics_json(const std::vector<fairness::MetricRatio>& ratios) {
  ordered_json out = ordered_json::array();
  for (const auto& m : ratios) {
    ordered_json e;
    e["metric"] = fairness::to_string(m.metric);
    e["protected_group"] = m.protected_group;
    e["components"] = ordered_json::array();
    for (const auto& c : m.components) {
      e["components"].push_back(
          {{"quantity", c.quantity}, {"ratio", c.ratio ? number(*c.ratio) : ordered_json(nullptr)}});
    }
    e["fair"] = m.fair ? ordered_json(*m.fair) : ordered_json(nullptr);
    out.push_back(e);
  }
  return out;
}

// FNR ratio (equality of opportunity) of each protected group present.
struct GroupFairness {
  std::vector<fairness::GroupConfusion> confusions;
  std::vector<fairness::MetricRatio> ratios;

  std::optional<double> fnr_ratio(const std::string& group) const {
    for (const auto& m : ratios) {
      if (m.metric == fairness::Metric::equality_of_opportunity && m.protected_group == group) {
        return m.components.front().ratio;
      }
    }
    return std::nullopt;
  }
};

GroupFairness assess(std::span<const double> scores, std::span<const int> labels,
                     std::span<const std::string> groups, double threshold,
                     const fairness::FairnessConfig& cfg) {
  GroupFairness out;
  out.confusions = fairness::group_confusions(scores, labels, groups, threshold);
  out.ratios = fairness::fairness_metrics(out.confusions, cfg);
  return out;
}

ordered_json optional_number(std::optional<double> v) {
  return v ? number(*v) : ordered_json(nullptr);
}

double safe_auroc(std::span<const double> scores, std::span<const int> labels) {
  try {
    return evaluate::auroc(scores, labels);
  } catch (const SingleClassError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

std::vector<explain::RankedColumn> read_ranking(const fs::path& path, const std::string& hash) {
  verify_artifact(path, "ipsrs.ranking/1", hash);
  const auto t = csv::read(path);
  const auto rank = t.column("rank");
  const auto col = t.column("column");
  const auto value = t.column("mean_abs");
  std::vector<explain::RankedColumn> out;
  for (const auto& r : t.rows) {
    out.push_back({r[col], csv::parse_double(r[value], path.string()),
                   static_cast<int>(csv::parse_int(r[rank], path.string()))});
  }
  return out;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config)
    : config_(std::move(config)), input_dir_(config_.input_dir()) {}

fs::path Pipeline::in(std::string_view name) const { return input_dir_ / std::string(name); }
fs::path Pipeline::out(std::string_view name) const { return config_.out / std::string(name); }

void Pipeline::record_timing(std::string_view stage, double seconds) {
  timings_.push_back({std::string(stage), seconds});
  // Non-deterministic; kept apart from every hashed artifact.
  std::map<std::string, std::string> rows;
  const auto path = out("timings.csv");
  if (fs::exists(path)) {
    try {
      const auto t = csv::read(path);
      for (const auto& r : t.rows) {
        if (r.size() >= 2) rows[r[0]] = r[1];
      }
    } catch (const Error&) {
      rows.clear();
    }
  }
  rows[std::string(stage)] = fmt(seconds);
  csv::Writer w(path);
  w.row({"stage", "seconds"});
  for (Stage s : kStages) {
    const auto it = rows.find(std::string(to_string(s)));
    if (it != rows.end()) w.row({it->first, it->second});
  }
  w.close();
}

void Pipeline::run(Stage stage) {
  fs::create_directories(config_.out);
  const auto start = std::chrono::steady_clock::now();
  switch (stage) {
    case Stage::generate:
      generate();
      break;
    case Stage::link:
      link();
      break;
    case Stage::preprocess:
      preprocess();
      break;
    case Stage::sample:
      sample();
      break;
    case Stage::train:
      train();
      break;
    case Stage::evaluate:
      evaluate();
      break;
    case Stage::explain:
      explain();
      break;
    case Stage::causal:
      causal();
      break;
    case Stage::fairness:
      fairness();
      break;
    case Stage::mitigate:
      mitigate();
      break;
    case Stage::report:
      report();
      break;
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  record_timing(to_string(stage), elapsed.count());
}

void Pipeline::run_all() {
  fs::create_directories(config_.out);
  fs::remove(out("report.json"));
  fs::remove(out("timings.csv"));
  timings_.clear();
  input_dir_ = config_.out;
  for (Stage s : kStages) run(s);
}

// ---- generate / link ------------------------------------------------------

void Pipeline::generate() {
  cohort::GeneratorSpec spec = config_.generator;
  spec.seed = stage_seed(config_, "generate");
  const auto cohort = cohort::generate_cohort(spec);
  const auto h = hash(Stage::generate);
  cohort::write_cohort_csv(out("cohort.csv"), cohort, artifact_header("ipsrs.cohort/1", h));
  cohort::write_residence_csv(out("residence.csv"), cohort.records,
                              artifact_header("ipsrs.residence/1", h));
  cohort::write_contextual_csv(out("contextual.csv"), cohort.cells,
                               artifact_header("ipsrs.contextual/1", h));
  cohort::write_feature_dictionary(out("features.json"), cohort.feature_dictionary, h);
}

void Pipeline::link() {
  const auto h = hash(Stage::generate);
  verify_artifact(in("features.json"), "ipsrs.feature_dictionary/1", h);
  verify_artifact(in("cohort.csv"), "ipsrs.cohort/1", h);
  verify_artifact(in("residence.csv"), "ipsrs.residence/1", h);
  verify_artifact(in("contextual.csv"), "ipsrs.contextual/1", h);
  const auto dict = cohort::read_feature_dictionary(in("features.json"));
  auto records = cohort::read_cohort_csv(in("cohort.csv"), dict);
  cohort::read_residence_csv(in("residence.csv"), records);
  const auto cells = cohort::read_contextual_csv(in("contextual.csv"));
  std::vector<std::map<std::string, double>> linked(records.size());
  if (!cells.empty() && !cells.front().measures.empty()) {
    linked = cohort::link_all(records, cells, config_.generator.buffer_radius, config_.workers);
  }
  cohort::write_linked_csv(out("linked.csv"), records, linked,
                           artifact_header("ipsrs.linked/1", hash(Stage::link)));
}

// ---- preprocess / sample --------------------------------------------------

void Pipeline::preprocess() {
  const auto gh = hash(Stage::generate);
  verify_artifact(in("cohort.csv"), "ipsrs.cohort/1", gh);
  verify_artifact(in("features.json"), "ipsrs.feature_dictionary/1", gh);
  verify_artifact(in("linked.csv"), "ipsrs.linked/1", hash(Stage::link));
  const auto dict = cohort::read_feature_dictionary(in("features.json"));
  const auto records = cohort::read_cohort_csv(in("cohort.csv"), dict);
  const auto linked = cohort::read_linked_csv(in("linked.csv"), records);

  const auto prepared = detail::prepare(records, linked, dict, config_.feature_set, config_);
  const auto h = hash(Stage::preprocess);
  preprocess::write_matrix_csv(out("matrix.csv"), prepared.matrix,
                               artifact_header("ipsrs.matrix/1", h));
  preprocess::write_state(out("preprocess_state.json"), prepared.state, h);
  csv::Writer w(out("split.csv"));
  w.comment(artifact_header("ipsrs.split/1", h));
  w.row({"patient_id", "partition"});
  for (std::size_t i = 0; i < prepared.matrix.rows(); ++i) {
    w.row({std::to_string(prepared.matrix.patient_ids[i]),
           std::string(preprocess::to_string(prepared.split.partition[i]))});
  }
  w.close();
}

void Pipeline::sample() {
  const auto data = load_modeling(input_dir_, hash(Stage::preprocess), config_.cutoff_year);
  const auto demo = load_demographics(input_dir_, hash(Stage::generate), data.matrix.patient_ids);
  const auto rows = detail::resample_rows(data.matrix, data.split, demo.cci, config_);
  csv::Writer w(out("sample.csv"));
  w.comment(artifact_header("ipsrs.sample/1", hash(Stage::sample)));
  w.comment("method=" + std::string(sampling::to_string(config_.sampling.method)));
  w.row({"patient_id", "label"});
  for (std::size_t r : rows) {
    w.row({std::to_string(data.matrix.patient_ids[r]), std::to_string(data.matrix.labels[r])});
  }
  w.close();
}

// ---- train / evaluate -----------------------------------------------------

void Pipeline::train() {
  const auto data = load_modeling(input_dir_, hash(Stage::preprocess), config_.cutoff_year);
  const auto rows = load_resampled(input_dir_, hash(Stage::sample), data.matrix);
  const auto trained = detail::train_models(data.matrix, data.split, rows, config_);
  const auto h = hash(Stage::train);
  models::write_model(out("model_linear.json"), trained.linear, h);
  models::write_model(out("model_gbdt.json"), trained.gbdt, h);
  auto doc = artifact_json("ipsrs.cv/1", h);
  doc["folds"] = config_.models.folds;
  doc["training_rows"] = data.split.rows(Partition::train).size();
  doc["resampled_rows"] = rows.size();
  doc["linear"] = detail::cv_json(trained.cv_linear);
  doc["gbdt"] = detail::cv_json(trained.cv_gbdt);
  const auto& ens = std::get<models::TreeEnsemble>(trained.gbdt);
  doc["gbdt"]["best_round"] = ens.best_round;
  doc["gbdt"]["trees"] = ens.trees.size();
  write_json(out("cv.json"), doc);
}

void Pipeline::evaluate() {
  const auto data = load_modeling(input_dir_, hash(Stage::preprocess), config_.cutoff_year);
  const auto demo = load_demographics(input_dir_, hash(Stage::generate), data.matrix.patient_ids);
  const auto th = hash(Stage::train);
  const auto h = hash(Stage::evaluate);
  const auto& m = data.matrix;
  const auto train_rows = data.split.rows(Partition::train);
  const std::string feature_set(preprocess::to_string(config_.feature_set));

  std::map<std::string, std::vector<double>> scores;
  std::map<std::string, double> thresholds;
  for (const char* fam : kFamilies) {
    scores[fam] = scores_of(load_model(input_dir_, fam, th), m.values);
    thresholds[fam] = config_.evaluate.threshold
                          ? *config_.evaluate.threshold
                          : evaluate::default_threshold(select(scores[fam], train_rows),
                                                        select(m.labels, train_rows));
  }

  {
    csv::Writer w(out("scores.csv"));
    w.comment(artifact_header("ipsrs.scores/1", h));
    w.row({"patient_id", "partition", "label", "group", "linear", "gbdt"});
    for (std::size_t i = 0; i < m.rows(); ++i) {
      w.row({std::to_string(m.patient_ids[i]),
             std::string(preprocess::to_string(data.split.partition[i])),
             std::to_string(m.labels[i]), m.groups[i], fmt(scores["linear"][i]),
             fmt(scores["gbdt"][i])});
    }
    w.close();
  }

  {
    csv::Writer w(out("metrics.csv"));
    w.comment(artifact_header("ipsrs.metrics/1", h));
    w.row({"model", "feature_set", "partition", "n", "positives", "auroc", "threshold", "precision",
           "recall", "specificity", "f1", "accuracy", "tp", "fp", "fn", "tn"});
    for (const char* fam : kFamilies) {
      for (Partition p : kPartitions) {
        const auto rows = data.split.rows(p);
        if (rows.empty()) continue;
        const auto s = select(scores[fam], rows);
        const auto y = select(m.labels, rows);
        const auto r = evaluate::threshold_metrics(s, y, thresholds[fam]);
        const double auc = safe_auroc(s, y);
        if (std::isnan(auc)) {
          warn("partition " + std::string(preprocess::to_string(p)) +
               " holds one class; AUROC undefined");
        }
        w.row({fam, feature_set, std::string(preprocess::to_string(p)), std::to_string(r.n),
               std::to_string(r.positives), fmt(auc), fmt(r.threshold), fmt(r.precision),
               fmt(r.recall), fmt(r.specificity), fmt(r.f1), fmt(r.accuracy), std::to_string(r.tp),
               std::to_string(r.fp), std::to_string(r.fn), std::to_string(r.tn)});
      }
    }
    w.close();
  }

  const auto test_rows = data.split.rows(Partition::test);
  for (const char* fam : kFamilies) {
    csv::Writer w(out("roc_" + std::string(fam) + ".csv"));
    w.comment(artifact_header("ipsrs.roc/1", h));
    w.row({"fpr", "tpr"});
    for (const auto& pt : evaluate::roc_curve(select(scores[fam], test_rows),
                                              select(m.labels, test_rows))) {
      w.row({fmt(pt.x), fmt(pt.y)});
    }
    w.close();
  }

  // Risk stratification on held-out rows with the primary model.
  const auto held = detail::held_out_rows(data.split);
  const auto& primary = config_.evaluate.primary_model;
  const auto held_scores = select(scores[primary], held);
  const auto held_labels = select(m.labels, held);
  const auto table =
      evaluate::risk_groups(held_scores, held_labels, select(m.patient_ids, held));
  {
    csv::Writer w(out("risk_groups.csv"));
    w.comment(artifact_header("ipsrs.risk_groups/1", h));
    w.row({"group", "n", "events", "event_rate", "min_score", "max_score"});
    for (const auto& g : table.groups) {
      w.row({std::to_string(g.index), std::to_string(g.n), std::to_string(g.events),
             fmt(g.event_rate), fmt(g.min_score), fmt(g.max_score)});
    }
    w.close();
  }

  // Missing ages take the training mean for the adjustment model.
  double age_total = 0.0;
  std::size_t age_count = 0;
  for (std::size_t r : train_rows) {
    if (std::isnan(demo.age[r])) continue;
    age_total += demo.age[r];
    ++age_count;
  }
  const double age_mean = age_count ? age_total / static_cast<double>(age_count) : 0.0;
  std::vector<double> age;
  std::vector<double> cci;
  for (std::size_t r : held) {
    age.push_back(std::isnan(demo.age[r]) ? age_mean : demo.age[r]);
    cci.push_back(demo.cci[r]);
  }
  const auto female = select(demo.female, held);
  const auto race = select(demo.race, held);
  const evaluate::Adjusters adjusters{age, female, race, cci};
  const auto odds = evaluate::adjusted_or_per_decile(table.assignment, adjusters, held_labels);
  const Matrix base = evaluate::adjuster_design(adjusters);
  const double fraction = evaluate::explained_risk_fraction(base, table.assignment, held_labels);

  auto doc = artifact_json("ipsrs.evaluate/1", h);
  doc["feature_set"] = feature_set;
  doc["thresholds"] = {{"linear", thresholds["linear"]}, {"gbdt", thresholds["gbdt"]}};
  doc["threshold_rule"] = config_.evaluate.threshold ? "configured" : "train_prevalence_quantile";
  doc["primary_model"] = primary;
  doc["held_out_rows"] = held.size();
  doc["risk_groups"] = {{"quantiles", table.quantiles},
                        {"top_bottom_ratio", number(table.top_bottom_ratio)}};
  doc["adjusted_or"] = {{"estimate", odds.estimate},
                        {"lower", odds.lower},
                        {"upper", odds.upper},
                        {"beta", odds.beta},
                        {"standard_error", odds.standard_error},
                        {"formatted", evaluate::format_odds_ratio(odds)},
                        {"adjusters", "age, sex, race/ethnicity, cci"}};
  doc["explained_risk_fraction"] = {
      {"value", number(fraction)},
      {"definition",
       "(R2(adjusters + group index) - R2(adjusters)) / R2(adjusters + group index), McFadden R2"}};
  write_json(out("evaluate.json"), doc);
}

// ---- explain / causal -----------------------------------------------------

void Pipeline::explain() {
  const auto data = load_modeling(input_dir_, hash(Stage::preprocess), config_.cutoff_year);
  const auto th = hash(Stage::train);
  const auto h = hash(Stage::explain);
  const auto& m = data.matrix;
  const auto train_rows = data.split.rows(Partition::train);
  auto test_rows = data.split.rows(Partition::test);
  if (test_rows.empty()) throw ValidationError("explain: the test partition is empty");

  std::vector<std::size_t> bg_rows;
  for (std::size_t i : explain::sample_background(train_rows.size(), config_.explain.background_size,
                                                  stage_seed(config_, "explain.background"))) {
    bg_rows.push_back(train_rows[i]);
  }
  std::vector<std::size_t> rows;
  for (std::size_t i : explain::sample_background(test_rows.size(), config_.explain.max_rows,
                                                  stage_seed(config_, "explain.rows"))) {
    rows.push_back(test_rows[i]);
  }
  const Matrix background = m.values.select_rows(bg_rows);
  const Matrix x = m.values.select_rows(rows);
  const auto names = column_names(m);

  auto doc = artifact_json("ipsrs.explain/1", h);
  doc["background_rows"] = bg_rows.size();
  doc["explained_rows"] = rows.size();
  for (const char* fam : kFamilies) {
    const auto model = load_model(input_dir_, fam, th);
    const auto attr = explain::shap(model, x, background, names, config_.workers);
    const auto ranking = explain::global_ranking(attr);

    {
      csv::Writer w(out("shap_" + std::string(fam) + ".csv"));
      w.comment(artifact_header("ipsrs.shap/1", h));
      std::vector<std::string> header{"patient_id", "base_value"};
      header.insert(header.end(), names.begin(), names.end());
      w.row(header);
      for (std::size_t r = 0; r < attr.rows(); ++r) {
        std::vector<std::string> row{std::to_string(m.patient_ids[rows[r]]), fmt(attr.base_value)};
        for (double v : attr.phi.row(r)) row.push_back(fmt(v));
        w.row(row);
      }
      w.close();
    }
    {
      csv::Writer w(out("ranking_" + std::string(fam) + ".csv"));
      w.comment(artifact_header("ipsrs.ranking/1", h));
      w.row({"rank", "column", "mean_abs"});
      for (const auto& r : ranking) w.row({std::to_string(r.rank), r.column, fmt(r.mean_abs)});
      w.close();
    }

    std::vector<std::string> pool;
    for (const auto& r : ranking) {
      if (pool.size() >= config_.explain.combination_pool) break;
      pool.push_back(r.column);
    }
    const auto combos = explain::combination_attribution(
        attr, explain::enumerate_combinations(pool, 3));
    {
      csv::Writer w(out("combinations_" + std::string(fam) + ".csv"));
      w.comment(artifact_header("ipsrs.combinations/1", h));
      w.row({"rank_by_score", "rank_by_abs", "size", "columns", "mean_score", "mean_abs_score"});
      for (const auto& c : combos) {
        std::string joined;
        for (const auto& col : c.columns) joined += (joined.empty() ? "" : "+") + col;
        w.row({std::to_string(c.rank_by_score), std::to_string(c.rank_by_abs),
               std::to_string(c.columns.size()), joined, fmt(c.mean_score),
               fmt(c.mean_abs_score)});
      }
      w.close();
    }

    ordered_json fj;
    fj["base_value"] = attr.base_value;
    fj["top_features"] = ordered_json::array();
    for (const auto& r : ranking) {
      if (static_cast<std::size_t>(r.rank) > config_.explain.top_k) break;
      fj["top_features"].push_back({{"rank", r.rank}, {"column", r.column}, {"mean_abs", r.mean_abs}});
    }
    auto top_combos = [&](bool by_abs) {
      std::vector<const explain::CombinationScore*> sorted;
      for (const auto& c : combos) sorted.push_back(&c);
      std::sort(sorted.begin(), sorted.end(), [&](auto* a, auto* b) {
        return by_abs ? a->rank_by_abs < b->rank_by_abs : a->rank_by_score < b->rank_by_score;
      });
      ordered_json arr = ordered_json::array();
      for (std::size_t i = 0; i < std::min<std::size_t>(10, sorted.size()); ++i) {
        arr.push_back({{"columns", sorted[i]->columns},
                       {"mean_score", sorted[i]->mean_score},
                       {"mean_abs_score", sorted[i]->mean_abs_score}});
      }
      return arr;
    };
    fj["combinations_pool"] = pool;
    fj["combinations_evaluated"] = combos.size();
    fj["top_combinations_by_score"] = top_combos(false);
    fj["top_combinations_by_abs"] = top_combos(true);
    doc[fam] = fj;
  }
  write_json(out("explain.json"), doc);
}

void Pipeline::causal() {
  const auto data = load_modeling(input_dir_, hash(Stage::preprocess), config_.cutoff_year);
  const auto eh = hash(Stage::explain);
  const auto first = read_ranking(in("ranking_gbdt.csv"), eh);
  const auto second = read_ranking(in("ranking_linear.csv"), eh);
  const auto& m = data.matrix;

  std::map<std::string, std::string> source_of;
  for (const auto& c : m.columns) source_of[c.name] = c.source_feature;
  const auto features =
      causal::select_causal_features(first, second, config_.causal.top_k, source_of);

  // A categorical feature enters through its dummy with the largest mean
  // |phi| in the first ranking, then the second.
  auto weight_of = [&](const std::string& column) {
    for (const auto* ranking : {&first, &second}) {
      for (const auto& r : *ranking) {
        if (r.column == column) return r.mean_abs;
      }
    }
    return 0.0;
  };
  std::vector<std::string> names;
  std::vector<std::size_t> cols;
  ordered_json encoding = ordered_json::object();
  for (const auto& f : features) {
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < m.columns.size(); ++c) {
      if (m.columns[c].source_feature != f) continue;
      if (!best || weight_of(m.columns[c].name) > weight_of(m.columns[*best].name)) best = c;
    }
    if (!best) continue;
    names.push_back(f);
    cols.push_back(*best);
    encoding[f] = m.columns[*best].name;
  }

  const auto train_rows = data.split.rows(Partition::train);
  Matrix selected = m.values.select_rows(train_rows).select_cols(cols);
  std::vector<std::size_t> keep;
  std::vector<std::string> kept_names;
  ordered_json dropped = ordered_json::array();
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto col = selected.column(j);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    if (*lo == *hi) {
      warn("causal: column '" + names[j] + "' is constant on the training rows and is dropped");
      dropped.push_back(names[j]);
      continue;
    }
    keep.push_back(j);
    kept_names.push_back(names[j]);
  }
  Matrix nodes_data(train_rows.size(), keep.size() + 1);
  for (std::size_t r = 0; r < train_rows.size(); ++r) {
    for (std::size_t j = 0; j < keep.size(); ++j) nodes_data(r, j) = selected(r, keep[j]);
    nodes_data(r, keep.size()) = m.labels[train_rows[r]];
  }
  kept_names.push_back("outcome");

  const auto allowed = causal::mgm_prefilter(nodes_data, kept_names, config_.causal.prefilter_penalty);
  causal::PcConfig pc;
  pc.test.alpha = config_.causal.alpha;
  pc.test.max_condition_size = config_.causal.max_condition_size;
  if (config_.causal.forbid_outcome_out) pc.forbid_out_of = "outcome";
  pc.workers = config_.workers;
  const auto graph = causal::pc_stable(nodes_data, kept_names, allowed, pc);

  const auto h = hash(Stage::causal);
  causal::write_edge_list(out("causal_edges.txt"), graph,
                          artifact_header("ipsrs.causal_edges/1", h));
  auto doc = artifact_json("ipsrs.causal/1", h);
  doc["nodes"] = graph.nodes;
  doc["node_columns"] = encoding;
  doc["dropped_constant"] = dropped;
  doc["prefilter_pairs"] = allowed.size();
  doc["prefilter_penalty"] =
      config_.causal.prefilter_penalty
          ? *config_.causal.prefilter_penalty
          : causal::default_prefilter_penalty(nodes_data.rows(), nodes_data.cols());
  doc["edges"] = ordered_json::array();
  for (const auto& e : graph.edges) {
    doc["edges"].push_back({{"from", e.from}, {"to", e.to}, {"directed", e.directed}});
  }
  doc["directed_edges"] = graph.directed_count();
  doc["undirected_edges"] = graph.undirected_count();
  write_json(out("causal.json"), doc);
}

// ---- fairness / mitigate --------------------------------------------------

namespace {

struct ScoreTable {
  std::vector<std::int64_t> ids;
  std::vector<Partition> partition;
  std::vector<int> labels;
  std::vector<std::string> groups;
  std::map<std::string, std::vector<double>> scores;
  std::vector<std::size_t> held_out;
};

ScoreTable read_scores(const fs::path& path, const std::string& hash) {
  verify_artifact(path, "ipsrs.scores/1", hash);
  const auto t = csv::read(path);
  ScoreTable s;
  const auto id = t.column("patient_id");
  const auto part = t.column("partition");
  const auto label = t.column("label");
  const auto group = t.column("group");
  std::map<std::string, std::size_t> fam_col;
  for (const char* fam : kFamilies) fam_col[fam] = t.column(fam);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    s.ids.push_back(csv::parse_int(r[id], path.string()));
    s.partition.push_back(preprocess::parse_partition(r[part]));
    s.labels.push_back(static_cast<int>(csv::parse_int(r[label], path.string())));
    s.groups.push_back(r[group]);
    for (const auto& [fam, col] : fam_col) {
      s.scores[fam].push_back(csv::parse_double(r[col], path.string()));
    }
    if (s.partition.back() == Partition::test || s.partition.back() == Partition::independent_test) {
      s.held_out.push_back(i);
    }
  }
  return s;
}

}  // namespace

void Pipeline::fairness() {
  const auto eh = hash(Stage::evaluate);
  const auto scores = read_scores(in("scores.csv"), eh);
  verify_artifact(in("evaluate.json"), "ipsrs.evaluate/1", eh);
  const auto eval = read_json(in("evaluate.json"));
  const auto& cfg = config_.fairness.metrics;
  const auto h = hash(Stage::fairness);
  const std::string feature_set(preprocess::to_string(config_.feature_set));
  const auto labels = select(scores.labels, scores.held_out);
  const auto groups = select(scores.groups, scores.held_out);

  std::vector<double> thresholds(config_.fairness.curve_points);
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    thresholds[i] = static_cast<double>(i) / static_cast<double>(thresholds.size() - 1);
  }

  auto doc = artifact_json("ipsrs.fairness/1", h);
  doc["rows"] = "held_out";
  doc["band"] = {cfg.band_lower, cfg.band_upper};
  doc["privileged"] = cfg.privileged;
  csv::Writer table(out("fairness.csv"));
  table.comment(artifact_header("ipsrs.fairness_table/1", h));
  std::vector<std::string> header{"model", "feature_set", "metric", "quantity"};
  for (const auto& g : cfg.protected_groups) {
    header.push_back(g + "_ratio");
    header.push_back(g + "_fair");
  }
  table.row(header);

  for (const char* fam : kFamilies) {
    const double threshold = eval.at("thresholds").at(fam).get<double>();
    const auto s = select(scores.scores.at(fam), scores.held_out);
    const auto result = assess(s, labels, groups, threshold, cfg);

    for (fairness::Metric metric : fairness::kMetrics) {
      std::vector<std::vector<std::string>> lines;
      for (const auto& g : cfg.protected_groups) {
        for (const auto& r : result.ratios) {
          if (r.metric != metric || r.protected_group != g) continue;
          if (lines.empty()) {
            for (const auto& c : r.components) {
              lines.push_back({fam, feature_set, std::string(fairness::to_string(metric)), c.quantity});
            }
          }
          for (std::size_t k = 0; k < r.components.size() && k < lines.size(); ++k) {
            const auto& ratio = r.components[k].ratio;
            lines[k].push_back(ratio ? fmt(*ratio) : "NA");
            lines[k].push_back(ratio ? (in_band(*ratio, cfg) ? "yes" : "no") : "NA");
          }
        }
      }
      for (const auto& l : lines) table.row(l);
    }

    const auto curve = fairness::fnr_curve(s, labels, groups, thresholds);
    {
      csv::Writer w(out("fnr_curve_" + std::string(fam) + ".csv"));
      w.comment(artifact_header("ipsrs.fnr_curve/1", h));
      std::vector<std::string> head{"threshold"};
      for (const auto& series : curve.series) head.push_back(series.group);
      w.row(head);
      for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
        std::vector<std::string> row{fmt(curve.thresholds[i])};
        for (const auto& series : curve.series) row.push_back(fmt(series.fnr[i]));
        w.row(row);
      }
      w.close();
    }

    ordered_json fj;
    fj["threshold"] = threshold;
    fj["groups"] = confusion_json(result.confusions);
    fj["metrics"] = metrics_json(result.ratios);
    doc[fam] = fj;
  }
  table.close();
  write_json(out("fairness.json"), doc);
}

void Pipeline::mitigate() {
  const auto data = load_modeling(input_dir_, hash(Stage::preprocess), config_.cutoff_year);
  const auto rows_fit = load_resampled(input_dir_, hash(Stage::sample), data.matrix);
  const auto eh = hash(Stage::evaluate);
  verify_artifact(in("evaluate.json"), "ipsrs.evaluate/1", eh);
  const auto eval = read_json(in("evaluate.json"));
  const auto& fam = config_.mitigation.model;
  const auto model = load_model(input_dir_, fam, hash(Stage::train));
  const auto& cfg = config_.fairness.metrics;
  const auto& m = data.matrix;
  const auto h = hash(Stage::mitigate);

  const auto train_rows = data.split.rows(Partition::train);
  const auto held = detail::held_out_rows(data.split);
  const auto held_labels = select(m.labels, held);
  const auto held_groups = select(m.groups, held);
  const auto train_labels = select(m.labels, train_rows);
  const double base_threshold = eval.at("thresholds").at(fam).get<double>();
  const Matrix x_held = m.values.select_rows(held);
  const auto base_scores = scores_of(model, x_held);
  const auto baseline = assess(base_scores, held_labels, held_groups, base_threshold, cfg);
  const double base_auroc = safe_auroc(base_scores, held_labels);

  std::map<std::size_t, std::size_t> train_pos;
  for (std::size_t i = 0; i < train_rows.size(); ++i) train_pos[train_rows[i]] = i;
  std::vector<std::size_t> fit_pos;
  for (std::size_t r : rows_fit) fit_pos.push_back(train_pos.at(r));
  const auto fit_labels = select(m.labels, rows_fit);

  auto doc = artifact_json("ipsrs.mitigation/1", h);
  doc["model"] = fam;
  doc["rows"] = "held_out";
  ordered_json base;
  base["threshold"] = base_threshold;
  base["auroc"] = number(base_auroc);
  base["groups"] = confusion_json(baseline.confusions);
  base["metrics"] = metrics_json(baseline.ratios);
  doc["baseline"] = base;
  doc["methods"] = ordered_json::object();

  csv::Writer table(out("mitigation.csv"));
  table.comment(artifact_header("ipsrs.mitigation_table/1", h));
  table.row({"method", "group", "fnr_ratio_before", "fnr_ratio_after", "fair_before", "fair_after",
             "auroc_before", "auroc_after", "threshold"});
  auto fair_text = [&](std::optional<double> r) {
    return r ? (fairness::in_band(*r, cfg) ? "yes" : "no") : "NA";
  };
  auto ratio_text = [](std::optional<double> r) { return r ? fmt(*r) : "NA"; };

  auto record = [&](const std::string& method, const std::vector<double>& after_scores,
                    double threshold, ordered_json extra) {
    const auto after = assess(after_scores, held_labels, held_groups, threshold, cfg);
    const double auc = safe_auroc(after_scores, held_labels);
    for (const auto& g : cfg.protected_groups) {
      table.row({method, g, ratio_text(baseline.fnr_ratio(g)), ratio_text(after.fnr_ratio(g)),
                 fair_text(baseline.fnr_ratio(g)), fair_text(after.fnr_ratio(g)), fmt(base_auroc),
                 fmt(auc), fmt(threshold)});
    }
    extra["threshold"] = threshold;
    extra["auroc"] = number(auc);
    extra["auroc_change"] = number(auc - base_auroc);
    extra["fnr_ratio"] = ordered_json::object();
    for (const auto& g : cfg.protected_groups) {
      extra["fnr_ratio"][g] = {{"before", optional_number(baseline.fnr_ratio(g))},
                               {"after", optional_number(after.fnr_ratio(g))}};
    }
    extra["groups"] = confusion_json(after.confusions);
    extra["metrics"] = metrics_json(after.ratios);
    doc["methods"][method] = extra;
  };

  for (const auto& method : config_.mitigation.methods) {
    if (method == "dir") {
      std::vector<std::size_t> columns;
      for (std::size_t c = 0; c < m.columns.size(); ++c) {
        if (m.columns[c].kind == cohort::FeatureKind::continuous) columns.push_back(c);
      }
      if (columns.empty()) warn("dir: the feature set has no continuous columns; nothing repaired");
      const double lambda = config_.mitigation.dir_lambda;
      const Matrix x_train =
          fairness::mitigate_dir(m.values.select_rows(train_rows), select(m.groups, train_rows),
                                 columns, lambda);
      const Matrix x_held_fixed = fairness::mitigate_dir(x_held, held_groups, columns, lambda);
      const Matrix x_fit = x_train.select_rows(fit_pos);
      models::HyperPoint point;
      if (const auto* lin = std::get_if<models::LinearModel>(&model)) {
        point = lin->penalty;
      } else {
        point = std::get<models::TreeEnsemble>(model).config;
      }
      const auto refit = models::fit(point, x_fit, fit_labels);
      const double threshold =
          evaluate::default_threshold(scores_of(refit, x_train), train_labels);
      ordered_json extra;
      extra["lambda"] = lambda;
      extra["repaired_columns"] = ordered_json::array();
      for (std::size_t c : columns) extra["repaired_columns"].push_back(m.columns[c].name);
      extra["refit"] = models::describe(point);
      record("dir", scores_of(refit, x_held_fixed), threshold, extra);
    } else if (method == "adversarial") {
      const Matrix x_fit = m.values.select_rows(rows_fit);
      std::vector<int> z;
      for (std::size_t r : rows_fit) z.push_back(is_protected(m.groups[r], cfg) ? 1 : 0);
      auto settings = config_.mitigation.adversarial;
      settings.seed = stage_seed(config_, "mitigate.adversarial");
      const auto result = fairness::mitigate_adversarial(x_fit, fit_labels, z, settings);
      const models::Model predictor = result.predictor;
      const double threshold = evaluate::default_threshold(
          scores_of(predictor, m.values.select_rows(train_rows)), train_labels);
      ordered_json extra;
      extra["alpha"] = settings.alpha;
      extra["iterations"] = settings.iterations;
      extra["final_predictor_loss"] = result.final_predictor_loss;
      extra["final_adversary_loss"] = result.final_adversary_loss;
      record("adversarial", scores_of(predictor, x_held), threshold, extra);
    } else if (method == "calibrated_eo") {
      const auto& target = config_.mitigation.calibrated_eo_group;
      std::vector<std::size_t> subset;
      for (std::size_t i = 0; i < held.size(); ++i) {
        if (held_groups[i] == cfg.privileged || held_groups[i] == target) subset.push_back(i);
      }
      const auto s = select(base_scores, subset);
      const auto y = select(held_labels, subset);
      const auto g = select(held_groups, subset);
      const auto result =
          fairness::mitigate_calibrated_eo(s, y, g, stage_seed(config_, "mitigate.calibrated_eo"));
      fairness::FairnessConfig pair_cfg = cfg;
      pair_cfg.protected_groups = {target};
      const auto before = assess(s, y, g, base_threshold, pair_cfg);
      const auto after = assess(result.scores, y, g, base_threshold, pair_cfg);
      const double auc_before = safe_auroc(s, y);
      const double auc_after = safe_auroc(result.scores, y);
      table.row({"calibrated_eo", target, ratio_text(before.fnr_ratio(target)),
                 ratio_text(after.fnr_ratio(target)), fair_text(before.fnr_ratio(target)),
                 fair_text(after.fnr_ratio(target)), fmt(auc_before), fmt(auc_after),
                 fmt(base_threshold)});
      ordered_json extra;
      extra["groups"] = result.groups;
      extra["base_rate"] = result.base_rate;
      extra["generalized_fnr_before"] = result.generalized_fnr;
      extra["generalized_fnr_expected_after"] = result.expected_generalized_fnr;
      ordered_json realized = ordered_json::array();
      for (const auto& grp : result.groups) {
        realized.push_back(fairness::generalized_fnr(result.scores, y, g, grp));
      }
      extra["generalized_fnr_after"] = realized;
      extra["mixing_rate"] = result.mixing_rate;
      extra["mixed_group"] = result.mixed_group;
      extra["threshold"] = base_threshold;
      extra["auroc_before"] = number(auc_before);
      extra["auroc"] = number(auc_after);
      extra["fnr_ratio"] = {{target,
                             {{"before", optional_number(before.fnr_ratio(target))},
                              {"after", optional_number(after.fnr_ratio(target))}}}};
      extra["metrics"] = metrics_json(after.ratios);
      doc["methods"]["calibrated_eo"] = extra;
    }
  }
  table.close();
  write_json(out("mitigation.json"), doc);
}

// ---- report ---------------------------------------------------------------

void Pipeline::report() {
  ordered_json det;
  det["tool_version"] = kToolVersion;
  det["config"] = to_json(config_);
  det["config_hash"] = hash(Stage::report);
  ordered_json stage_hashes;
  for (Stage s : kStages) stage_hashes[std::string(to_string(s))] = hash(s);
  det["stage_hashes"] = stage_hashes;

  auto load = [&](const char* name, const char* schema, Stage producer) {
    verify_artifact(in(name), schema, hash(producer));
    return body(read_json(in(name)));
  };
  det["cv"] = load("cv.json", "ipsrs.cv/1", Stage::train);

  {
    verify_artifact(in("metrics.csv"), "ipsrs.metrics/1", hash(Stage::evaluate));
    const auto t = csv::read(in("metrics.csv"));
    ordered_json rows = ordered_json::array();
    for (const auto& r : t.rows) {
      ordered_json e;
      for (std::size_t c = 0; c < t.header.size(); ++c) {
        const auto& key = t.header[c];
        if (key == "model" || key == "feature_set" || key == "partition") {
          e[key] = r[c];
        } else {
          e[key] = number(csv::parse_double(r[c], "metrics.csv"));
        }
      }
      rows.push_back(e);
    }
    det["metrics"] = rows;
  }
  const auto eval = load("evaluate.json", "ipsrs.evaluate/1", Stage::evaluate);
  det["evaluate"] = eval;
  {
    verify_artifact(in("risk_groups.csv"), "ipsrs.risk_groups/1", hash(Stage::evaluate));
    const auto t = csv::read(in("risk_groups.csv"));
    ordered_json rows = ordered_json::array();
    for (const auto& r : t.rows) {
      ordered_json e;
      for (std::size_t c = 0; c < t.header.size(); ++c) {
        e[t.header[c]] = number(csv::parse_double(r[c], "risk_groups.csv"));
      }
      rows.push_back(e);
    }
    det["risk_groups"] = rows;
  }
  det["adjusted_or"] = eval.at("adjusted_or");
  det["explained_risk_fraction"] = eval.at("explained_risk_fraction");
  det["explain"] = load("explain.json", "ipsrs.explain/1", Stage::explain);
  det["causal"] = load("causal.json", "ipsrs.causal/1", Stage::causal);
  det["fairness"] = load("fairness.json", "ipsrs.fairness/1", Stage::fairness);
  det["mitigation"] = load("mitigation.json", "ipsrs.mitigation/1", Stage::mitigate);

  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(fnv1a64(det.dump())));

  ordered_json timings = ordered_json::array();
  if (fs::exists(in("timings.csv"))) {
    const auto t = csv::read(in("timings.csv"));
    for (const auto& r : t.rows) {
      timings.push_back({{"stage", r.at(0)}, {"seconds", csv::parse_double(r.at(1), "timings")}});
    }
  }
  ordered_json doc = artifact_json("ipsrs.report/1", hash(Stage::report));
  doc["deterministic_digest"] = digest;
  doc["deterministic"] = det;
  doc["timings"] = timings;
  doc["runtime"] = {{"workers", config_.workers},
                    {"out", config_.out.string()},
                    {"stage_input", input_dir_.string()}};
  write_json(out("report.json"), doc);
}

}  // namespace ipsrs::pipeline
