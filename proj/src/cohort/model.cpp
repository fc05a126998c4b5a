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
#include <numeric>
#include <string>

#include "ipsrs/cohort.hpp"
#include "ipsrs/error.hpp"
#include "ipsrs/matrix.hpp"

namespace ipsrs::cohort {
namespace {

void check_distribution(const std::vector<double>& p, std::string_view what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string(what) + ": probabilities must be finite and >= 0");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError(std::string(what) + ": probabilities sum to " + std::to_string(total) +
                          ", expected 1");
  }
}

// Counts per group (NHW, NHB, Hispanic, Other) normalized to probabilities.
CategoricalSpec from_counts(std::string name, std::vector<std::string> categories,
                            const std::array<std::vector<double>, 4>& counts) {
  CategoricalSpec spec;
  spec.name = std::move(name);
  spec.categories = std::move(categories);
  std::vector<double> overall(spec.categories.size(), 0.0);
  for (std::size_t g = 0; g < 4; ++g) {
    const double total = std::accumulate(counts[g].begin(), counts[g].end(), 0.0);
    std::vector<double> p;
    for (std::size_t k = 0; k < counts[g].size(); ++k) {
      p.push_back(counts[g][k] / total);
      overall[k] += counts[g][k];
    }
    spec.group_prior[std::string(to_string(kRaces[g]))] = std::move(p);
  }
  const double total = std::accumulate(overall.begin(), overall.end(), 0.0);
  for (double& v : overall) v /= total;
  spec.prior = std::move(overall);
  return spec;
}

}  // namespace

std::string_view to_string(Sex sex) { return sex == Sex::male ? "male" : "female"; }

std::string_view to_string(Race race) {
  switch (race) {
    case Race::NHW:
      return "NHW";
    case Race::NHB:
      return "NHB";
    case Race::Hispanic:
      return "Hispanic";
    case Race::Other:
      return "Other";
  }
  return "Other";
}

std::string_view to_string(Insurance insurance) {
  switch (insurance) {
    case Insurance::Medicare:
      return "medicare";
    case Insurance::Private:
      return "private";
    case Insurance::Medicaid:
      return "medicaid";
    case Insurance::Nopay:
      return "nopay";
    case Insurance::Other:
      return "other";
    case Insurance::Unknown:
      return "unknown";
  }
  return "unknown";
}

Sex parse_sex(std::string_view text) {
  if (text == "male") return Sex::male;
  if (text == "female") return Sex::female;
  throw ValidationError("unknown sex '" + std::string(text) + "'");
}

Race parse_race(std::string_view text) {
  for (Race r : kRaces) {
    if (to_string(r) == text) return r;
  }
  throw ValidationError("unknown race_ethnicity '" + std::string(text) + "'");
}

Insurance parse_insurance(std::string_view text) {
  for (Insurance i : {Insurance::Medicare, Insurance::Private, Insurance::Medicaid, Insurance::Nopay,
                      Insurance::Other, Insurance::Unknown}) {
    if (to_string(i) == text) return i;
  }
  throw ValidationError("unknown insurance '" + std::string(text) + "'");
}

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::categorical ? "categorical" : "continuous";
}

std::string_view to_string(FeatureLevel level) {
  switch (level) {
    case FeatureLevel::demographic:
      return "demographic";
    case FeatureLevel::individual:
      return "individual";
    case FeatureLevel::contextual:
      return "contextual";
  }
  return "individual";
}

FeatureKind parse_kind(std::string_view text) {
  if (text == "categorical") return FeatureKind::categorical;
  if (text == "continuous") return FeatureKind::continuous;
  throw ValidationError("unknown feature kind '" + std::string(text) + "'");
}

FeatureLevel parse_level(std::string_view text) {
  if (text == "demographic") return FeatureLevel::demographic;
  if (text == "individual") return FeatureLevel::individual;
  if (text == "contextual") return FeatureLevel::contextual;
  throw ValidationError("unknown feature level '" + std::string(text) + "'");
}

const FeatureInfo* Cohort::feature(std::string_view name) const {
  for (const auto& f : feature_dictionary) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

void validate(const GeneratorSpec& spec) {
  if (spec.n_patients < 1) throw ValidationError("n_patients must be >= 1");
  check_distribution({spec.race_mix.begin(), spec.race_mix.end()}, "race_mix");
  if (!(spec.age_sd > 0.0)) throw ValidationError("age_sd must be positive");
  if (spec.cci_mean < 0.0) throw ValidationError("cci_mean must be >= 0");
  for (double f : spec.female_share) {
    if (!(f >= 0.0 && f <= 1.0)) throw ValidationError("female_share must lie in [0,1]");
  }
  if (spec.index_years.empty()) throw ValidationError("index_years is empty");
  if (!spec.index_year_weights.empty()) {
    if (spec.index_year_weights.size() != spec.index_years.size()) {
      throw ValidationError("index_year_weights size differs from index_years");
    }
    check_distribution(spec.index_year_weights, "index_year_weights");
  }
  if (!(spec.plane_size > 0.0) || !(spec.cell_size > 0.0) || !(spec.buffer_radius > 0.0)) {
    throw ValidationError("plane_size, cell_size and buffer_radius must be positive");
  }
  if (2.0 * spec.buffer_radius >= spec.plane_size) {
    throw ValidationError("buffer_radius too large for the plane");
  }
  if (!(spec.move_probability >= 0.0 && spec.move_probability <= 1.0)) {
    throw ValidationError("move_probability must lie in [0,1]");
  }

  bool has_insurance = false;
  for (const auto& c : spec.categorical) {
    if (c.categories.empty()) throw ValidationError("feature '" + c.name + "' has no categories");
    if (c.prior.size() != c.categories.size()) {
      throw ValidationError("feature '" + c.name + "': prior size differs from categories");
    }
    check_distribution(c.prior, "prior of '" + c.name + "'");
    for (const auto& [group, p] : c.group_prior) {
      parse_race(group);
      if (p.size() != c.categories.size()) {
        throw ValidationError("feature '" + c.name + "': group prior size differs for " + group);
      }
      check_distribution(p, "group prior of '" + c.name + "' for " + group);
    }
    if (c.name == "insurance") {
      has_insurance = true;
      for (const auto& cat : c.categories) parse_insurance(cat);
    }
  }
  if (!has_insurance) throw ValidationError("categorical features must include 'insurance'");
  for (const auto& m : spec.contextual) {
    if (!(m.sd > 0.0) || !std::isfinite(m.mean)) {
      throw ValidationError("contextual measure '" + m.name + "' needs finite mean and sd > 0");
    }
  }

  auto find_categorical = [&](std::string_view name) -> const CategoricalSpec* {
    for (const auto& c : spec.categorical) {
      if (c.name == name) return &c;
    }
    return nullptr;
  };
  auto is_continuous = [&](std::string_view name) {
    if (name == "age" || name == "cci") return true;
    for (const auto& m : spec.contextual) {
      if (m.name == name) return true;
    }
    return false;
  };
  for (const auto& [key, value] : spec.planted_coefficients) {
    if (!std::isfinite(value)) throw ValidationError("planted coefficient '" + key + "' not finite");
    const auto eq = key.find('=');
    if (eq == std::string::npos) {
      if (!is_continuous(key)) {
        throw ValidationError("planted coefficient '" + key + "' names no continuous feature");
      }
      continue;
    }
    const std::string feature = key.substr(0, eq);
    const std::string category = key.substr(eq + 1);
    if (feature == "sex") {
      parse_sex(category);
      continue;
    }
    const auto* c = find_categorical(feature);
    if (c == nullptr || std::find(c->categories.begin(), c->categories.end(), category) ==
                            c->categories.end()) {
      throw ValidationError("planted coefficient '" + key + "' names no declared category");
    }
  }
  for (const auto& [group, value] : spec.group_label_shift) {
    parse_race(group);
    if (!std::isfinite(value)) throw ValidationError("group_label_shift not finite");
  }
  auto check_rate = [&](const std::string& feature, double rate) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
      throw ValidationError("missingness rate for '" + feature + "' must lie in [0,1]");
    }
    if (feature == "age") return;
    const auto* c = find_categorical(feature);
    if (c == nullptr) {
      throw ValidationError("missingness declared for unsupported feature '" + feature + "'");
    }
    if (std::find(c->categories.begin(), c->categories.end(), kUnknown) == c->categories.end()) {
      throw ValidationError("feature '" + feature + "' has missingness but no 'unknown' category");
    }
  };
  for (const auto& [feature, rate] : spec.missingness_rates) check_rate(feature, rate);
  for (const auto& [feature, per_group] : spec.group_missingness_rates) {
    for (const auto& [group, rate] : per_group) {
      parse_race(group);
      check_rate(feature, rate);
    }
  }
}

void validate_record(const PatientRecord& record) {
  const std::string who = "patient " + std::to_string(record.patient_id);
  if (!std::isnan(record.age) && record.age < 18.0) throw ValidationError(who + ": age below 18");
  if (record.outcome != 0 && record.outcome != 1) throw ValidationError(who + ": outcome not 0/1");
  if (record.cci < 0) throw ValidationError(who + ": negative cci");
  if (record.residence_history.empty()) return;
  double expected_start = 0.0;
  for (const auto& period : record.residence_history) {
    if (!(period.start_fraction >= 0.0 && period.end_fraction <= 1.0 &&
          period.start_fraction < period.end_fraction)) {
      throw ValidationError(who + ": residence period outside [0,1] or empty");
    }
    if (std::abs(period.start_fraction - expected_start) > 1e-12) {
      throw ValidationError(who + ": residence periods overlap or leave a gap");
    }
    expected_start = period.end_fraction;
  }
  if (std::abs(expected_start - 1.0) > 1e-12) {
    throw ValidationError(who + ": residence periods do not cover [0,1]");
  }
}

GeneratorSpec default_generator_spec() {
  GeneratorSpec spec;
  const std::string unk(kUnknown);
  spec.categorical.push_back(from_counts(
      "insurance", {"medicare", "private", "medicaid", "nopay", "other", unk},
      {{{2214, 1663, 558, 228, 108, 362}, {1610, 1144, 804, 285, 84, 84}, {170, 148, 97, 38, 10, 32},
        {189, 214, 52, 28, 11, 59}}}));
  spec.categorical.push_back(from_counts(
      "education", {"college", "high_school", unk},
      {{{518, 461, 4154}, {376, 563, 3072}, {38, 50, 407}, {46, 36, 471}}}));
  spec.categorical.push_back(from_counts(
      "employment", {"employed", "unemployed", "retired_disabled", unk},
      {{{2078, 570, 1017, 1468}, {1489, 760, 782, 980}, {207, 57, 68, 163}, {222, 52, 81, 198}}}));
  spec.categorical.push_back(from_counts(
      "financial", {"constrained", unk}, {{{2386, 2747}, {2323, 1688}, {216, 279}, {247, 306}}}));
  spec.categorical.push_back(from_counts(
      "housing", {"homeless", "stable", unk},
      {{{32, 1971, 3130}, {44, 1933, 2034}, {3, 160, 332}, {1, 151, 401}}}));
  spec.categorical.push_back(from_counts(
      "food", {"insecure", unk}, {{{3416, 1717}, {2982, 1029}, {300, 195}, {354, 199}}}));
  spec.categorical.push_back(from_counts(
      "marital", {"single", "married", "widowed_divorced", unk},
      {{{743, 2073, 888, 1429}, {1221, 1069, 1052, 669}, {80, 179, 65, 171}, {72, 249, 45, 187}}}));
  spec.categorical.push_back(from_counts(
      "smoking", {"ever", "never", unk},
      {{{2331, 2525, 277}, {1473, 2380, 158}, {149, 321, 25}, {143, 362, 48}}}));
  spec.categorical.push_back(from_counts(
      "alcohol", {"yes", "no", unk},
      {{{1381, 3223, 529}, {1012, 2737, 262}, {123, 325, 47}, {115, 365, 73}}}));
  spec.categorical.push_back(from_counts(
      "drug", {"yes", "no", unk},
      {{{225, 4218, 690}, {253, 3409, 349}, {16, 417, 62}, {6, 443, 104}}}));

  spec.contextual = {
      {"murder_rate", 0.0075, 0.0043, 1.0, 0.6, true},
      {"aggravated_assault_rate", 0.3867, 0.1365, 0.6, 0.7, true},
      {"motor_vehicle_theft_rate", 0.2348, 0.0882, 1.0, 0.6, true},
      {"low_access_share", 0.2625, 0.1965, 1.2, 0.5, true},
  };
  spec.group_location_shift = {-0.05, 0.08, 0.0, 0.0};
  return spec;
}

Standardization standardize(const GeneratorSpec& spec, std::string_view feature) {
  if (feature == "age") {
    double mean = 0.0;
    for (std::size_t g = 0; g < 4; ++g) mean += spec.race_mix[g] * spec.age_mean[g];
    return {mean, spec.age_sd};
  }
  if (feature == "cci") return {spec.cci_mean, std::sqrt(std::max(spec.cci_mean, 1.0))};
  for (const auto& m : spec.contextual) {
    if (m.name == feature) return {m.mean, m.sd};
  }
  throw ValidationError("no continuous feature '" + std::string(feature) + "' in generator spec");
}

double ground_truth_margin(const PatientRecord& record, const std::map<std::string, double>& linked,
                           const GeneratorSpec& spec) {
  const std::string who = "patient " + std::to_string(record.patient_id);
  double margin = spec.intercept;
  auto coefficient = [&](const std::string& key) {
    const auto it = spec.planted_coefficients.find(key);
    return it == spec.planted_coefficients.end() ? 0.0 : it->second;
  };
  auto category_term = [&](const std::string& feature, const std::string& category) {
    const CategoricalSpec* c = nullptr;
    for (const auto& s : spec.categorical) {
      if (s.name == feature) c = &s;
    }
    if (c == nullptr) throw ValidationError(who + ": feature '" + feature + "' absent from spec");
    if (std::find(c->categories.begin(), c->categories.end(), category) == c->categories.end()) {
      throw ValidationError(who + ": category '" + category + "' of '" + feature +
                            "' absent from spec");
    }
    return coefficient(feature + "=" + category);
  };

  margin += category_term("insurance", std::string(to_string(record.insurance)));
  for (const auto& [feature, category] : record.individual_sdoh) {
    margin += category_term(feature, category);
  }
  margin += coefficient("sex=" + std::string(to_string(record.sex)));
  for (const std::string name : {"age", "cci"}) {
    const double beta = coefficient(name);
    if (beta == 0.0) continue;
    const double value = name == "age" ? record.age : static_cast<double>(record.cci);
    if (std::isnan(value)) throw ValidationError(who + ": '" + name + "' missing");
    const auto s = standardize(spec, name);
    margin += beta * (value - s.center) / s.scale;
  }
  for (const auto& m : spec.contextual) {
    const double beta = coefficient(m.name);
    if (beta == 0.0) continue;
    const auto it = linked.find(m.name);
    if (it == linked.end()) throw ValidationError(who + ": contextual '" + m.name + "' not linked");
    margin += beta * (it->second - m.mean) / m.sd;
  }
  const auto shift = spec.group_label_shift.find(std::string(to_string(record.race_ethnicity)));
  if (shift != spec.group_label_shift.end()) margin += shift->second;
  return margin;
}

double ground_truth_probability(const PatientRecord& record,
                                const std::map<std::string, double>& linked,
                                const GeneratorSpec& spec) {
  return sigmoid(ground_truth_margin(record, linked, spec));
}

}  // namespace ipsrs::cohort
