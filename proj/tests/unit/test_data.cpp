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
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <set>

#include "ipsrs/cohort.hpp"
#include "ipsrs/error.hpp"
#include "ipsrs/models/linear.hpp"
#include "ipsrs/preprocess.hpp"
#include "ipsrs/rng.hpp"
#include "ipsrs/sampling.hpp"

using namespace ipsrs;
using namespace ipsrs::cohort;
using namespace ipsrs::preprocess;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ipsrs_unit_" + name);
}

ContextualCell cell(std::int64_t id, Rect r, double value, int year = 2020) {
  return {id, r, year, {{"murder_rate", value}}};
}

PatientRecord resident(std::vector<ResidencePeriod> history, int year = 2020) {
  PatientRecord r;
  r.patient_id = 7;
  r.index_year = year;
  r.age = 50;
  r.residence_history = std::move(history);
  return r;
}

RawTable small_table() {
  RawTable t;
  t.patient_ids = {1, 2, 3};
  t.labels = {0, 1, 0};
  t.groups = {"NHW", "NHB", "NHW"};
  t.index_years = {2016, 2017, 2018};
  RawColumn cat{{"housing", FeatureKind::categorical, FeatureLevel::individual, {"a", "b", "unknown"}},
                {"a", "", "b"},
                {}};
  RawColumn num{{"rate", FeatureKind::continuous, FeatureLevel::contextual, {}}, {}, {1.0, kNaN, 3.0}};
  t.columns = {cat, num};
  return t;
}

}  // namespace

TEST_CASE("generator is deterministic and honours the race mix") {
  GeneratorSpec spec = default_generator_spec();
  spec.n_patients = 10000;
  spec.seed = 3;
  const Cohort a = generate_cohort(spec);
  const Cohort b = generate_cohort(spec);
  REQUIRE(a.records.size() == 10000);
  std::array<double, 4> share{};
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& r = a.records[i];
    const auto& s = b.records[i];
    CHECK(r.patient_id == s.patient_id);
    CHECK(r.age == s.age);
    CHECK(r.outcome == s.outcome);
    CHECK(r.individual_sdoh == s.individual_sdoh);
    CHECK(a.linked_contextual[i] == b.linked_contextual[i]);
    share[static_cast<std::size_t>(r.race_ethnicity)] += 1.0 / 10000.0;
    validate_record(r);
  }
  for (std::size_t g = 0; g < 4; ++g) CHECK(std::abs(share[g] - spec.race_mix[g]) <= 0.02);
}

TEST_CASE("generator spec validation") {
  GeneratorSpec spec = default_generator_spec();
  spec.race_mix = {0.5, 0.5, 0.1, 0.0};
  CHECK_THROWS_AS(validate(spec), ValidationError);
  spec = default_generator_spec();
  spec.n_patients = 0;
  CHECK_THROWS_AS(generate_cohort(spec), ValidationError);
  spec = default_generator_spec();
  spec.categorical[1].prior[0] += 0.01;
  CHECK_THROWS_AS(validate(spec), ValidationError);
}

TEST_CASE("ground truth probability by direct evaluation") {
  GeneratorSpec spec = default_generator_spec();
  PatientRecord r = resident({{0, 1, {50, 50}}});
  r.insurance = Insurance::Private;
  r.individual_sdoh = {{"housing", "stable"}};
  spec.intercept = 0.0;
  CHECK(ground_truth_probability(r, {}, spec) == 0.5);
  spec.intercept = -2.0;
  CHECK(ground_truth_probability(r, {}, spec) == doctest::Approx(0.1192029220));
  r.individual_sdoh["housing"] = "homeless";
  spec.planted_coefficients["housing=homeless"] = 1.0;
  CHECK(ground_truth_probability(r, {}, spec) == doctest::Approx(sigmoid(-1.0)));
  r.individual_sdoh["pets"] = "cat";
  CHECK_THROWS_AS(ground_truth_probability(r, {}, spec), ValidationError);
}

TEST_CASE("empirical outcome rate matches the mean planted probability") {
  GeneratorSpec spec = default_generator_spec();
  spec.n_patients = 50000;
  spec.seed = 19;
  spec.planted_coefficients = {{"smoking=ever", 0.5}, {"insurance=medicare", 0.4}, {"age", 0.3}};
  const Cohort c = generate_cohort(spec);
  double events = 0.0, expected = 0.0;
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    events += c.records[i].outcome;
    expected += ground_truth_probability(c.records[i], c.linked_contextual[i], spec);
  }
  CHECK(std::abs(events - expected) / 50000.0 <= 0.005);
}

TEST_CASE("planted coefficients are recovered by an unpenalized fit") {
  GeneratorSpec spec = default_generator_spec();
  spec.categorical.resize(2);  // insurance, education
  spec.contextual.clear();
  spec.n_patients = 50000;
  spec.intercept = -1.5;
  spec.planted_coefficients = {{"insurance=medicare", 0.6},
                               {"insurance=medicaid", 0.3},
                               {"education=college", -0.5}};
  // Reference categories: insurance=private, education=high_school.
  const std::vector<std::pair<std::string, std::string>> dummies{
      {"insurance", "medicare"}, {"insurance", "medicaid"}, {"insurance", "nopay"},
      {"insurance", "other"},    {"insurance", "unknown"},  {"education", "college"},
      {"education", "unknown"}};
  int covered = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    spec.seed = seed;
    const Cohort c = generate_cohort(spec);
    Matrix x(c.records.size(), dummies.size());
    std::vector<int> y(c.records.size());
    for (std::size_t i = 0; i < c.records.size(); ++i) {
      const auto& r = c.records[i];
      y[i] = r.outcome;
      for (std::size_t j = 0; j < dummies.size(); ++j) {
        const std::string value = dummies[j].first == "insurance"
                                      ? std::string(to_string(r.insurance))
                                      : r.individual_sdoh.at(dummies[j].first);
        x(i, j) = value == dummies[j].second ? 1.0 : 0.0;
      }
    }
    const auto fit = models::fit_logistic_irls(x, y);
    for (std::size_t j = 0; j < dummies.size(); ++j) {
      const auto it = spec.planted_coefficients.find(dummies[j].first + "=" + dummies[j].second);
      const double truth = it == spec.planted_coefficients.end() ? 0.0 : it->second;
      const auto ci = models::wald_interval(fit, j + 1);
      covered += ci.lower <= truth && truth <= ci.upper;
      ++total;
    }
  }
  CHECK(static_cast<double>(covered) / total >= 0.9);
}

TEST_CASE("circle and rectangle intersection areas") {
  const double pi = std::acos(-1.0);
  CHECK(circle_rect_intersection_area({5, 5}, 1.0, {0, 0, 10, 10}) == doctest::Approx(pi));
  CHECK(circle_rect_intersection_area({5, 5}, 1.0, {5, 0, 10, 10}) == doctest::Approx(pi / 2));
  CHECK(circle_rect_intersection_area({5, 5}, 1.0, {5, 5, 10, 10}) == doctest::Approx(pi / 4));
  CHECK(circle_rect_intersection_area({5, 5}, 1.0, {7, 7, 10, 10}) == 0.0);
  CHECK(circle_rect_intersection_area({0, 0}, 10.0, {0, 0, 1, 1}) == doctest::Approx(1.0));
}

TEST_CASE("contextual linkage examples") {
  const std::vector<ContextualCell> one{cell(1, {0, 0, 10, 10}, 0.0075)};
  CHECK(link_contextual(resident({{0, 1, {5, 5}}}), one, 1.0).at("murder_rate") ==
        doctest::Approx(0.0075));

  const std::vector<ContextualCell> two{cell(1, {0, 0, 5, 10}, 2.0), cell(2, {5, 0, 10, 10}, 4.0)};
  CHECK(link_contextual(resident({{0, 1, {5, 5}}}), two, 1.0).at("murder_rate") ==
        doctest::Approx(3.0));
  CHECK(link_contextual(resident({{0, 0.5, {2, 5}}, {0.5, 1, {8, 5}}}), two, 1.0).at("murder_rate") ==
        doctest::Approx(3.0));
  const double v =
      link_contextual(resident({{0, 0.25, {2, 5}}, {0.25, 1, {5.5, 5}}}), two, 1.0).at("murder_rate");
  CHECK(v >= 2.0);
  CHECK(v <= 4.0);

  const std::vector<ContextualCell> far{cell(1, {50, 50, 60, 60}, 1.0)};
  CHECK_THROWS_AS(link_contextual(resident({{0, 1, {5, 5}}}), far, 1.0), LinkageError);
  CHECK_THROWS_AS(link_contextual(resident({{0, 1, {5, 5}}}, 2019), one, 1.0), LinkageError);
}

TEST_CASE("linkage is independent of worker count") {
  GeneratorSpec spec = default_generator_spec();
  spec.n_patients = 500;
  const Cohort c = generate_cohort(spec);
  CHECK(link_all(c.records, c.cells, spec.buffer_radius, 1) ==
        link_all(c.records, c.cells, spec.buffer_radius, 4));
}

TEST_CASE("cohort files round trip") {
  GeneratorSpec spec = default_generator_spec();
  spec.n_patients = 200;
  spec.missingness_rates = {{"age", 0.1}, {"housing", 0.2}};
  const Cohort c = generate_cohort(spec);
  const auto dict_path = temp_path("dict.json");
  const auto cohort_path = temp_path("cohort.csv");
  const auto res_path = temp_path("res.csv");
  const auto ctx_path = temp_path("ctx.csv");
  const auto linked_path = temp_path("linked.csv");
  write_feature_dictionary(dict_path, c.feature_dictionary);
  write_cohort_csv(cohort_path, c, "test");
  write_residence_csv(res_path, c.records);
  write_contextual_csv(ctx_path, c.cells);
  write_linked_csv(linked_path, c.records, c.linked_contextual);

  const auto dict = read_feature_dictionary(dict_path);
  REQUIRE(dict.size() == c.feature_dictionary.size());
  auto records = read_cohort_csv(cohort_path, dict);
  read_residence_csv(res_path, records);
  REQUIRE(records.size() == c.records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& a = c.records[i];
    const auto& b = records[i];
    CHECK(a.patient_id == b.patient_id);
    CHECK((a.age == b.age || (std::isnan(a.age) && std::isnan(b.age))));
    CHECK(a.individual_sdoh == b.individual_sdoh);
    CHECK(a.insurance == b.insurance);
    CHECK(a.outcome == b.outcome);
    CHECK(a.residence_history.size() == b.residence_history.size());
  }
  const auto cells = read_contextual_csv(ctx_path);
  CHECK(cells.size() == c.cells.size());
  CHECK(cells[3].measures == c.cells[3].measures);
  CHECK(read_linked_csv(linked_path, records) == c.linked_contextual);
  for (const auto& p : {dict_path, cohort_path, res_path, ctx_path, linked_path}) {
    std::filesystem::remove(p);
  }
  CHECK_THROWS_AS(read_cohort_csv(cohort_path, dict), IoError);
}

TEST_CASE("imputation examples") {
  const RawTable t = small_table();
  const std::vector<std::size_t> all{0, 1, 2};
  const RawTable done = impute(t, all);
  CHECK(done.column("housing").categorical == std::vector<std::string>{"a", "unknown", "b"});
  CHECK(done.column("rate").continuous == std::vector<double>{1.0, 2.0, 3.0});
  const RawTable again = impute(done, all);
  CHECK(again.column("housing").categorical == done.column("housing").categorical);
  CHECK(again.column("rate").continuous == done.column("rate").continuous);
  CHECK_THROWS_AS(fit_imputation(t, std::vector<std::size_t>{1}), ValidationError);
}

TEST_CASE("encoding and min-max normalization") {
  RawTable t = small_table();
  t.columns[1].continuous = {0.0, 5.0, 10.0};
  t.columns[0].categorical = {"a", "unknown", "b"};
  const FeatureMatrix m = encode_and_normalize(t);
  REQUIRE(m.columns.size() == 4);
  const std::size_t rate = m.column_index("rate");
  CHECK(m.values(0, rate) == 0.0);
  CHECK(m.values(1, rate) == 0.5);
  CHECK(m.values(2, rate) == 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.columns.size(); ++j) {
      if (m.columns[j].source_feature == "housing") s += m.values(i, j);
    }
    CHECK(s == 1.0);
  }
  RawTable wide = t;
  wide.columns[1].continuous = {12.0, 0.0, 10.0};
  const FeatureMatrix tr = encode_and_normalize(wide, m.normalization);
  CHECK(tr.values(0, rate) == doctest::Approx(1.2));

  RawTable constant = t;
  constant.columns[1].continuous = {4.0, 4.0, 4.0};
  const FeatureMatrix c = encode_and_normalize(constant);
  for (std::size_t i = 0; i < 3; ++i) CHECK(c.values(i, rate) == 0.0);

  RawTable unseen = t;
  unseen.columns[0].categorical[0] = "z";
  CHECK_THROWS_AS(encode_and_normalize(unseen, m.normalization), ValidationError);

  RawTable unit = t;
  unit.columns[1].continuous = {0.0, 0.3, 1.0};
  const FeatureMatrix u = encode_and_normalize(unit);
  RawTable renorm = unit;
  renorm.columns[1].continuous = u.values.column(rate);
  CHECK(encode_and_normalize(renorm, u.normalization).values.column(rate) == u.values.column(rate));
}

TEST_CASE("split sizes, temporal rule and stratification") {
  std::vector<int> years(120, 2018), labels(120, 0);
  for (std::size_t i = 100; i < 120; ++i) years[i] = 2021;
  for (std::size_t i = 0; i < 100; i += 5) labels[i] = 1;
  const auto s = split(years, labels, 2020, {0.7, 0.1, 0.2}, 4);
  CHECK(s.rows(Partition::train).size() == 70);
  CHECK(s.rows(Partition::validation).size() == 10);
  CHECK(s.rows(Partition::test).size() == 20);
  CHECK(s.rows(Partition::independent_test).size() == 20);
  for (std::size_t i : s.rows(Partition::independent_test)) CHECK(years[i] > 2020);
  CHECK(s.partition == split(years, labels, 2020, {0.7, 0.1, 0.2}, 4).partition);
  CHECK_THROWS_AS(split(std::vector<int>(10, 2018), std::vector<int>(10, 0), 2020, {0.7, 0.1, 0.2}, 1),
                  ValidationError);
  CHECK_THROWS_AS(split(years, labels, 2020, {0.7, 0.2, 0.2}, 1), ValidationError);

  Rng rng(5);
  std::vector<int> y(10000), yr(10000, 2017);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = rng.bernoulli(0.1) ? 1 : 0;
    if (i % 10 == 0) yr[i] = 2021;
  }
  const auto big = split(yr, y, 2020, {0.7, 0.1, 0.2}, 9);
  double overall = 0.0;
  const auto modeling = [&] {
    std::vector<std::size_t> r;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (yr[i] <= 2020) r.push_back(i);
    }
    return r;
  }();
  for (std::size_t i : modeling) overall += y[i];
  overall /= static_cast<double>(modeling.size());
  for (Partition p : {Partition::train, Partition::validation, Partition::test}) {
    double rate = 0.0;
    const auto rows = big.rows(p);
    for (std::size_t i : rows) rate += y[i];
    CHECK(std::abs(rate / rows.size() - overall) <= 0.02);
  }
  CHECK(allocate(100, std::vector<double>{0.7, 0.1, 0.2}) == std::vector<std::size_t>{70, 10, 20});
  CHECK(allocate(11, std::vector<double>{0.7, 0.1, 0.2}) == std::vector<std::size_t>{8, 1, 2});
}

TEST_CASE("fitted state depends only on the train rows") {
  GeneratorSpec spec = default_generator_spec();
  spec.n_patients = 600;
  spec.missingness_rates = {{"housing", 0.3}};
  const Cohort c = generate_cohort(spec);
  RawTable t = build_table(c.records, c.linked_contextual, c.feature_dictionary, FeatureSet::combined);
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < 400; ++i) train.push_back(i);
  const auto state = fit_imputation(t, train);
  const RawTable train_only = t.select_rows(train);
  std::vector<std::size_t> all_train(400);
  for (std::size_t i = 0; i < 400; ++i) all_train[i] = i;
  CHECK(fit_imputation(train_only, all_train).means == state.means);
  const auto fitted = encode_and_normalize(impute(train_only, state));
  std::vector<std::size_t> reversed(train.rbegin(), train.rend());
  const auto permuted = encode_and_normalize(impute(t.select_rows(reversed), state));
  CHECK(fitted.normalization.ranges == permuted.normalization.ranges);
}

TEST_CASE("preprocess state and matrix files round trip") {
  GeneratorSpec spec = default_generator_spec();
  spec.n_patients = 150;
  const Cohort c = generate_cohort(spec);
  RawTable t = build_table(c.records, c.linked_contextual, c.feature_dictionary, FeatureSet::combined);
  std::vector<std::size_t> rows(150);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  PreprocessState state;
  state.imputation = fit_imputation(t, rows);
  const FeatureMatrix m = encode_and_normalize(impute(t, state.imputation));
  state.normalization = m.normalization;
  const auto sp = temp_path("state.json");
  const auto mp = temp_path("matrix.csv");
  write_state(sp, state, "abc");
  write_matrix_csv(mp, m, "matrix");
  const auto back = read_state(sp);
  CHECK(back.imputation.means == state.imputation.means);
  CHECK(back.normalization.ranges == state.normalization.ranges);
  const FeatureMatrix m2 = read_matrix_csv(mp);
  CHECK(m2.values == m.values);
  CHECK(m2.labels == m.labels);
  CHECK(m2.groups == m.groups);
  CHECK(m2.patient_ids == m.patient_ids);
  REQUIRE(m2.columns.size() == m.columns.size());
  CHECK(m2.columns[3].source_feature == m.columns[3].source_feature);
  const FeatureMatrix again = encode_and_normalize(impute(t, back.imputation), back.normalization);
  CHECK(again.values == m.values);
  std::filesystem::remove(sp);
  std::filesystem::remove(mp);
}

TEST_CASE("resampling examples") {
  using namespace ipsrs::sampling;
  std::vector<int> y(100, 0);
  for (std::size_t i = 0; i < 10; ++i) y[i * 10] = 1;
  auto count = [&](const std::vector<std::size_t>& rows) {
    std::pair<int, int> c{0, 0};
    for (std::size_t r : rows) (y[r] ? c.first : c.second)++;
    return c;
  };
  const TrainRows rows{y, {}, {}};
  const auto rus = resample(rows, {Method::rus, 3, 1});
  CHECK(count(rus) == std::pair{10, 10});
  CHECK(std::set<std::size_t>(rus.begin(), rus.end()).size() == rus.size());
  const auto ros = resample(rows, {Method::ros, 3, 1});
  CHECK(count(ros) == std::pair{90, 90});
  CHECK(ros == resample(rows, {Method::ros, 3, 1}));
  CHECK(resample(rows, {Method::none, 3, 1}).size() == 100);
  CHECK_THROWS_AS(resample({std::vector<int>(5, 1), {}, {}}, {Method::rus, 1, 1}), SingleClassError);
}

TEST_CASE("greedy CCI matching hand trace") {
  using namespace ipsrs::sampling;
  const std::vector<int> y{1, 1, 0, 0, 0, 0};
  const std::vector<std::int64_t> ids{1, 2, 3, 4, 5, 6};
  const std::vector<int> cci{2, 5, 2, 3, 5, 9};
  const auto out = resample({y, ids, cci}, {Method::cci_match, 0, 1});
  CHECK(out == std::vector<std::size_t>{0, 1, 2, 4});
  const auto two = resample({y, ids, cci}, {Method::cci_match, 0, 2});
  CHECK(two.size() == 6);
  CHECK_THROWS_AS(resample({y, ids, cci}, {Method::cci_match, 0, 3}), ValidationError);
}

TEST_CASE("CCI matching tracks comorbidity more closely than random undersampling") {
  using namespace ipsrs::sampling;
  Rng rng(6);
  const std::size_t n = 3000;
  std::vector<int> y(n), cci(n);
  std::vector<std::int64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = static_cast<std::int64_t>(i + 1);
    y[i] = rng.bernoulli(0.1) ? 1 : 0;
    cci[i] = static_cast<int>(rng.poisson(y[i] ? 5.0 : 1.5));
  }
  auto gap = [&](const std::vector<std::size_t>& rows) {
    double pos = 0, neg = 0, np = 0, nn = 0;
    for (std::size_t r : rows) {
      (y[r] ? pos : neg) += cci[r];
      (y[r] ? np : nn) += 1;
    }
    return std::abs(pos / np - neg / nn);
  };
  const TrainRows rows{y, ids, cci};
  CHECK(gap(resample(rows, {Method::cci_match, 1, 1})) < gap(resample(rows, {Method::rus, 1, 1})));
}
