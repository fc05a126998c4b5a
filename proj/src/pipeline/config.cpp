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
#include "ipsrs/pipeline/config.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ipsrs/error.hpp"
#include "ipsrs/rng.hpp"

namespace ipsrs::pipeline {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Typed access to one JSON object; remembers which keys were read so the
// remaining ones can be reported as unknown.
class Section {
 public:
  Section(const json* node, std::string path, std::string_view source)
      : node_(node), path_(std::move(path)), source_(source) {
    if (node_ != nullptr && !node_->is_object()) fail(path_, "expected an object");
  }

  bool has(const char* key) const { return node_ != nullptr && node_->contains(key); }

  template <class T>
  void get(const char* key, T& out) {
    if (!has(key)) return;
    seen_.insert(key);
    try {
      out = node_->at(key).get<T>();
    } catch (const json::exception&) {
      fail(field(key), "has the wrong type");
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    if (!has(key)) return;
    seen_.insert(key);
    if (node_->at(key).is_null()) {
      out.reset();
      return;
    }
    T value{};
    try {
      value = node_->at(key).get<T>();
    } catch (const json::exception&) {
      fail(field(key), "has the wrong type");
    }
    out = value;
  }

  Section child(const char* key) {
    if (!has(key)) return Section(nullptr, field(key), source_);
    seen_.insert(key);
    return Section(&node_->at(key), field(key), source_);
  }

  // Elements of an array of objects.
  std::vector<Section> children(const char* key) {
    std::vector<Section> out;
    if (!has(key)) return out;
    seen_.insert(key);
    const json& arr = node_->at(key);
    if (!arr.is_array()) fail(field(key), "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      out.emplace_back(&arr[i], field(key) + "[" + std::to_string(i) + "]", source_);
    }
    return out;
  }

  void finish() const {
    if (node_ == nullptr) return;
    for (const auto& [key, value] : node_->items()) {
      if (!seen_.count(key)) fail(field(key.c_str()), "is not a known key");
    }
  }

  [[noreturn]] void fail(const std::string& where, const std::string& what) const {
    throw ConfigError(source_ + ": field '" + where + "' " + what);
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  bool present() const { return node_ != nullptr; }

 private:
  const json* node_;
  std::string path_;
  std::string source_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& source, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(source + ": field '" + field + "' " + what);
}

models::TreeConfig read_tree(Section s) {
  models::TreeConfig t;
  s.get("max_depth", t.max_depth);
  s.get("learning_rate", t.learning_rate);
  s.get("max_rounds", t.max_rounds);
  s.get("min_child_weight", t.min_child_weight);
  s.get("l2_leaf", t.l2_leaf);
  s.get("min_split_gain", t.min_split_gain);
  s.get("row_subsample", t.row_subsample);
  s.get("col_subsample", t.col_subsample);
  s.get("early_stopping_patience", t.early_stopping_patience);
  s.finish();
  return t;
}

ordered_json tree_json(const models::TreeConfig& t) {
  ordered_json j;
  j["max_depth"] = t.max_depth;
  j["learning_rate"] = t.learning_rate;
  j["max_rounds"] = t.max_rounds;
  j["min_child_weight"] = t.min_child_weight;
  j["l2_leaf"] = t.l2_leaf;
  j["min_split_gain"] = t.min_split_gain;
  j["row_subsample"] = t.row_subsample;
  j["col_subsample"] = t.col_subsample;
  j["early_stopping_patience"] = t.early_stopping_patience;
  return j;
}

void read_generator(Section s, cohort::GeneratorSpec& g) {
  s.get("n_patients", g.n_patients);
  s.get("race_mix", g.race_mix);
  s.get("age_mean", g.age_mean);
  s.get("age_sd", g.age_sd);
  s.get("female_share", g.female_share);
  s.get("cci_mean", g.cci_mean);
  s.get("index_years", g.index_years);
  s.get("index_year_weights", g.index_year_weights);
  s.get("plane_size", g.plane_size);
  s.get("cell_size", g.cell_size);
  s.get("group_location_shift", g.group_location_shift);
  s.get("move_probability", g.move_probability);
  s.get("planted_coefficients", g.planted_coefficients);
  s.get("intercept", g.intercept);
  s.get("group_label_shift", g.group_label_shift);
  s.get("missingness_rates", g.missingness_rates);
  s.get("group_missingness_rates", g.group_missingness_rates);
  if (s.has("categorical")) {
    g.categorical.clear();
    for (auto c : s.children("categorical")) {
      cohort::CategoricalSpec spec;
      c.get("name", spec.name);
      c.get("categories", spec.categories);
      c.get("prior", spec.prior);
      c.get("group_prior", spec.group_prior);
      c.finish();
      g.categorical.push_back(std::move(spec));
    }
  }
  if (s.has("contextual")) {
    g.contextual.clear();
    for (auto c : s.children("contextual")) {
      cohort::ContextualMeasureSpec spec;
      c.get("name", spec.name);
      c.get("mean", spec.mean);
      c.get("sd", spec.sd);
      c.get("x_gradient", spec.x_gradient);
      c.get("cell_noise", spec.cell_noise);
      c.get("nonnegative", spec.nonnegative);
      c.finish();
      g.contextual.push_back(std::move(spec));
    }
  }
  s.finish();
}

ordered_json generator_json(const cohort::GeneratorSpec& g) {
  ordered_json j;
  j["n_patients"] = g.n_patients;
  j["race_mix"] = g.race_mix;
  j["age_mean"] = g.age_mean;
  j["age_sd"] = g.age_sd;
  j["female_share"] = g.female_share;
  j["cci_mean"] = g.cci_mean;
  j["index_years"] = g.index_years;
  j["index_year_weights"] = g.index_year_weights;
  j["plane_size"] = g.plane_size;
  j["cell_size"] = g.cell_size;
  j["group_location_shift"] = g.group_location_shift;
  j["move_probability"] = g.move_probability;
  j["planted_coefficients"] = g.planted_coefficients;
  j["intercept"] = g.intercept;
  j["group_label_shift"] = g.group_label_shift;
  j["missingness_rates"] = g.missingness_rates;
  j["group_missingness_rates"] = g.group_missingness_rates;
  auto& cats = j["categorical"] = ordered_json::array();
  for (const auto& c : g.categorical) {
    ordered_json e;
    e["name"] = c.name;
    e["categories"] = c.categories;
    e["prior"] = c.prior;
    e["group_prior"] = c.group_prior;
    cats.push_back(e);
  }
  auto& ctx = j["contextual"] = ordered_json::array();
  for (const auto& c : g.contextual) {
    ordered_json e;
    e["name"] = c.name;
    e["mean"] = c.mean;
    e["sd"] = c.sd;
    e["x_gradient"] = c.x_gradient;
    e["cell_noise"] = c.cell_noise;
    e["nonnegative"] = c.nonnegative;
    ctx.push_back(e);
  }
  return j;
}

std::vector<models::Penalty> default_linear_grid() {
  return {{0.0, 0.0}, {0.0, 0.01}, {0.0, 0.1}, {0.0, 1.0}, {0.001, 0.0}, {0.01, 0.0}, {0.005, 0.05}};
}

std::vector<models::TreeConfig> default_tree_grid() {
  std::vector<models::TreeConfig> out;
  for (int depth : {2, 3}) {
    models::TreeConfig t;
    t.max_depth = depth;
    t.learning_rate = 0.1;
    t.max_rounds = 150;
    t.early_stopping_patience = 20;
    t.row_subsample = 0.8;
    t.col_subsample = 0.8;
    out.push_back(t);
  }
  return out;
}

void validate(PipelineConfig& c, const std::string& src) {
  double total = 0.0;
  for (double r : c.ratios) {
    require(r > 0.0, src, "split.ratios", "must be positive");
    total += r;
  }
  require(std::abs(total - 1.0) <= 1e-9, src, "split.ratios", "must sum to 1");
  require(c.models.folds >= 2, src, "models.folds", "must be at least 2");
  require(!c.models.linear.empty(), src, "models.linear", "must list at least one point");
  require(!c.models.gbdt.empty(), src, "models.gbdt", "must list at least one point");
  for (const auto& p : c.models.linear) {
    require(p.l1 >= 0.0 && p.l2 >= 0.0, src, "models.linear", "penalties must be >= 0");
  }
  for (const auto& t : c.models.gbdt) {
    require(t.max_depth >= 1 && t.max_rounds >= 0 && t.learning_rate > 0.0 &&
                t.learning_rate <= 1.0 && t.row_subsample > 0.0 && t.row_subsample <= 1.0 &&
                t.col_subsample > 0.0 && t.col_subsample <= 1.0 && t.l2_leaf >= 0.0 &&
                t.min_split_gain >= 0.0 && t.early_stopping_patience >= 1,
            src, "models.gbdt", "contains an invalid tree configuration");
  }
  require(c.sampling.match_ratio >= 1, src, "sampling.match_ratio", "must be >= 1");
  for (const std::string* m : {&c.evaluate.primary_model, &c.mitigation.model}) {
    require(*m == "linear" || *m == "gbdt", src, "model", "must be 'linear' or 'gbdt'");
  }
  require(c.explain.background_size >= 1, src, "explain.background_size", "must be >= 1");
  require(c.explain.top_k >= 1, src, "explain.top_k", "must be >= 1");
  require(c.causal.alpha > 0.0 && c.causal.alpha < 1.0, src, "causal.alpha", "must lie in (0, 1)");
  require(c.causal.max_condition_size >= 0, src, "causal.max_condition_size", "must be >= 0");
  require(c.fairness.curve_points >= 2, src, "fairness.curve_points", "must be >= 2");
  try {
    fairness::validate(c.fairness.metrics);
  } catch (const ValidationError& e) {
    throw ConfigError(src + ": fairness: " + e.what());
  }
  for (const auto& m : c.mitigation.methods) {
    require(m == "dir" || m == "adversarial" || m == "calibrated_eo", src, "mitigation.methods",
            "has unknown method '" + m + "'");
  }
  require(c.mitigation.dir_lambda >= 0.0 && c.mitigation.dir_lambda <= 1.0, src,
          "mitigation.dir_lambda", "must lie in [0, 1]");
  require(!c.out.empty(), src, "paths.out", "must not be empty");
  validate_paths(c);
  try {
    cohort::validate(c.generator);
  } catch (const ValidationError& e) {
    throw ConfigError(src + ": generator: " + e.what());
  }
}

}  // namespace

void validate_paths(const PipelineConfig& config) {
  if (config.stage_input && std::filesystem::weakly_canonical(*config.stage_input) ==
                                std::filesystem::weakly_canonical(config.out)) {
    throw ConfigError("paths: stage_input and out refer to the same directory '" +
                      config.out.string() + "'; omit stage_input to read from out");
  }
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::generate:
      return "generate";
    case Stage::link:
      return "link";
    case Stage::preprocess:
      return "preprocess";
    case Stage::sample:
      return "sample";
    case Stage::train:
      return "train";
    case Stage::evaluate:
      return "evaluate";
    case Stage::explain:
      return "explain";
    case Stage::causal:
      return "causal";
    case Stage::fairness:
      return "fairness";
    case Stage::mitigate:
      return "mitigate";
    case Stage::report:
      return "report";
  }
  return "unknown";
}

Stage parse_stage(std::string_view text) {
  for (Stage s : kStages) {
    if (to_string(s) == text) return s;
  }
  throw ValidationError("unknown stage '" + std::string(text) + "'");
}

PipelineConfig parse_config(const json& doc, std::string_view source) {
  const std::string src(source);
  PipelineConfig c;
  c.generator = cohort::default_generator_spec();
  c.models.linear = default_linear_grid();
  c.models.gbdt = default_tree_grid();

  Section root(&doc, "", src);
  root.get("seed", c.seed);
  root.get("workers", c.workers);
  read_generator(root.child("generator"), c.generator);
  {
    auto s = root.child("linkage");
    s.get("buffer_radius", c.generator.buffer_radius);
    s.finish();
  }
  {
    auto s = root.child("split");
    s.get("cutoff_year", c.cutoff_year);
    s.get("ratios", c.ratios);
    s.finish();
  }
  {
    auto s = root.child("preprocess");
    std::string set(preprocess::to_string(c.feature_set));
    s.get("feature_set", set);
    try {
      c.feature_set = preprocess::parse_feature_set(set);
    } catch (const ValidationError&) {
      s.fail(s.field("feature_set"), "must be individual, contextual or combined");
    }
    s.finish();
  }
  {
    auto s = root.child("sampling");
    std::string method(sampling::to_string(c.sampling.method));
    s.get("method", method);
    try {
      c.sampling.method = sampling::parse_method(method);
    } catch (const ValidationError&) {
      s.fail(s.field("method"), "must be none, ros, rus or cci_match");
    }
    s.get("match_ratio", c.sampling.match_ratio);
    s.finish();
  }
  {
    auto s = root.child("models");
    s.get("folds", c.models.folds);
    if (s.has("linear")) {
      c.models.linear.clear();
      for (auto p : s.children("linear")) {
        models::Penalty pen;
        p.get("l1", pen.l1);
        p.get("l2", pen.l2);
        p.finish();
        c.models.linear.push_back(pen);
      }
    }
    if (s.has("gbdt")) {
      c.models.gbdt.clear();
      for (auto p : s.children("gbdt")) c.models.gbdt.push_back(read_tree(p));
    }
    s.finish();
  }
  {
    auto s = root.child("evaluate");
    s.get("threshold", c.evaluate.threshold);
    s.get("primary_model", c.evaluate.primary_model);
    s.finish();
  }
  {
    auto s = root.child("explain");
    s.get("background_size", c.explain.background_size);
    s.get("max_rows", c.explain.max_rows);
    s.get("top_k", c.explain.top_k);
    s.get("combination_pool", c.explain.combination_pool);
    s.finish();
  }
  {
    auto s = root.child("causal");
    s.get("alpha", c.causal.alpha);
    s.get("max_condition_size", c.causal.max_condition_size);
    s.get("prefilter_penalty", c.causal.prefilter_penalty);
    s.get("forbid_outcome_out", c.causal.forbid_outcome_out);
    s.get("top_k", c.causal.top_k);
    s.finish();
  }
  {
    auto s = root.child("fairness");
    s.get("protected_groups", c.fairness.metrics.protected_groups);
    s.get("privileged", c.fairness.metrics.privileged);
    std::array<double, 2> band{c.fairness.metrics.band_lower, c.fairness.metrics.band_upper};
    s.get("band", band);
    c.fairness.metrics.band_lower = band[0];
    c.fairness.metrics.band_upper = band[1];
    s.get("curve_points", c.fairness.curve_points);
    s.finish();
  }
  {
    auto s = root.child("mitigation");
    s.get("methods", c.mitigation.methods);
    s.get("model", c.mitigation.model);
    s.get("dir_lambda", c.mitigation.dir_lambda);
    s.get("calibrated_eo_group", c.mitigation.calibrated_eo_group);
    auto a = s.child("adversarial");
    auto& adv = c.mitigation.adversarial;
    a.get("alpha", adv.alpha);
    a.get("learning_rate", adv.learning_rate);
    a.get("adversary_learning_rate", adv.adversary_learning_rate);
    a.get("iterations", adv.iterations);
    a.get("l2", adv.l2);
    a.get("adversary_sees_label", adv.adversary_sees_label);
    a.finish();
    s.finish();
  }
  {
    auto s = root.child("paths");
    std::string out = c.out.string();
    std::optional<std::string> input;
    s.get("out", out);
    s.get("stage_input", input);
    c.out = out;
    if (input) c.stage_input = std::filesystem::path(*input);
    s.finish();
  }
  root.finish();
  validate(c, src);
  return c;
}

PipelineConfig parse_config_text(std::string_view text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  return parse_config(doc, source);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

ordered_json to_json(const PipelineConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["generator"] = generator_json(c.generator);
  j["linkage"] = {{"buffer_radius", c.generator.buffer_radius}};
  j["split"] = {{"cutoff_year", c.cutoff_year}, {"ratios", c.ratios}};
  j["preprocess"] = {{"feature_set", preprocess::to_string(c.feature_set)}};
  j["sampling"] = {{"method", sampling::to_string(c.sampling.method)},
                   {"match_ratio", c.sampling.match_ratio}};
  ordered_json m;
  m["folds"] = c.models.folds;
  m["linear"] = ordered_json::array();
  for (const auto& p : c.models.linear) m["linear"].push_back({{"l1", p.l1}, {"l2", p.l2}});
  m["gbdt"] = ordered_json::array();
  for (const auto& t : c.models.gbdt) m["gbdt"].push_back(tree_json(t));
  j["models"] = m;
  ordered_json e;
  e["threshold"] = c.evaluate.threshold ? ordered_json(*c.evaluate.threshold) : ordered_json(nullptr);
  e["primary_model"] = c.evaluate.primary_model;
  j["evaluate"] = e;
  j["explain"] = {{"background_size", c.explain.background_size},
                  {"max_rows", c.explain.max_rows},
                  {"top_k", c.explain.top_k},
                  {"combination_pool", c.explain.combination_pool}};
  ordered_json k;
  k["alpha"] = c.causal.alpha;
  k["max_condition_size"] = c.causal.max_condition_size;
  k["prefilter_penalty"] =
      c.causal.prefilter_penalty ? ordered_json(*c.causal.prefilter_penalty) : ordered_json(nullptr);
  k["forbid_outcome_out"] = c.causal.forbid_outcome_out;
  k["top_k"] = c.causal.top_k;
  j["causal"] = k;
  j["fairness"] = {{"protected_groups", c.fairness.metrics.protected_groups},
                   {"privileged", c.fairness.metrics.privileged},
                   {"band", {c.fairness.metrics.band_lower, c.fairness.metrics.band_upper}},
                   {"curve_points", c.fairness.curve_points}};
  const auto& adv = c.mitigation.adversarial;
  ordered_json g;
  g["methods"] = c.mitigation.methods;
  g["model"] = c.mitigation.model;
  g["dir_lambda"] = c.mitigation.dir_lambda;
  g["calibrated_eo_group"] = c.mitigation.calibrated_eo_group;
  g["adversarial"] = {{"alpha", adv.alpha},
                      {"learning_rate", adv.learning_rate},
                      {"adversary_learning_rate", adv.adversary_learning_rate},
                      {"iterations", adv.iterations},
                      {"l2", adv.l2},
                      {"adversary_sees_label", adv.adversary_sees_label}};
  j["mitigation"] = g;
  return j;
}

std::string stage_hash(const PipelineConfig& config, Stage stage) {
  static const char* const kSections[] = {"generator", "linkage", "split",   "preprocess",
                                          "sampling",  "models",  "evaluate", "explain",
                                          "causal",    "fairness", "mitigation"};
  // Number of leading sections each stage depends on.
  std::size_t count = 0;
  switch (stage) {
    case Stage::generate:
    case Stage::link:
      count = 2;
      break;
    case Stage::preprocess:
      count = 4;
      break;
    case Stage::sample:
      count = 5;
      break;
    case Stage::train:
      count = 6;
      break;
    case Stage::evaluate:
      count = 7;
      break;
    case Stage::explain:
      count = 8;
      break;
    case Stage::causal:
      count = 9;
      break;
    case Stage::fairness:
      count = 10;
      break;
    case Stage::mitigate:
    case Stage::report:
      count = 11;
      break;
  }
  const ordered_json full = to_json(config);
  ordered_json part;
  part["seed"] = full["seed"];
  for (std::size_t i = 0; i < count; ++i) part[kSections[i]] = full[kSections[i]];
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(part.dump()));
  return buf;
}

std::uint64_t stage_seed(const PipelineConfig& config, std::string_view stage) {
  return derive_seed(config.seed, stage);
}

}  // namespace ipsrs::pipeline
