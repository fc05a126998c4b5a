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
#include <limits>

#include "ipsrs/cohort.hpp"
#include "ipsrs/error.hpp"
#include "ipsrs/matrix.hpp"
#include "ipsrs/rng.hpp"

namespace ipsrs::cohort {
namespace {

std::vector<ContextualCell> generate_cells(const GeneratorSpec& spec) {
  Rng rng(derive_seed(spec.seed, "cohort.cells"));
  const auto per_axis = static_cast<std::size_t>(std::ceil(spec.plane_size / spec.cell_size - 1e-9));
  // One persistent spatial field per measure, plus small year-to-year noise.
  std::vector<std::vector<double>> base(spec.contextual.size(),
                                        std::vector<double>(per_axis * per_axis));
  for (std::size_t m = 0; m < spec.contextual.size(); ++m) {
    const auto& ms = spec.contextual[m];
    for (std::size_t iy = 0; iy < per_axis; ++iy) {
      for (std::size_t ix = 0; ix < per_axis; ++ix) {
        const double cx = (static_cast<double>(ix) + 0.5) * spec.cell_size / spec.plane_size;
        base[m][iy * per_axis + ix] =
            ms.mean + ms.sd * (ms.x_gradient * (cx - 0.5) + ms.cell_noise * rng.normal());
      }
    }
  }
  std::vector<int> years = spec.index_years;
  std::sort(years.begin(), years.end());
  years.erase(std::unique(years.begin(), years.end()), years.end());

  std::vector<ContextualCell> cells;
  std::int64_t id = 1;
  for (int year : years) {
    for (std::size_t iy = 0; iy < per_axis; ++iy) {
      for (std::size_t ix = 0; ix < per_axis; ++ix) {
        ContextualCell cell;
        cell.cell_id = id++;
        cell.year = year;
        cell.bounds = {static_cast<double>(ix) * spec.cell_size,
                       static_cast<double>(iy) * spec.cell_size,
                       std::min(spec.plane_size, static_cast<double>(ix + 1) * spec.cell_size),
                       std::min(spec.plane_size, static_cast<double>(iy + 1) * spec.cell_size)};
        for (std::size_t m = 0; m < spec.contextual.size(); ++m) {
          const auto& ms = spec.contextual[m];
          double v = base[m][iy * per_axis + ix] + 0.1 * ms.cell_noise * ms.sd * rng.normal();
          if (ms.nonnegative) v = std::max(v, 0.0);
          cell.measures[ms.name] = v;
        }
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

Point draw_home(Rng& rng, const GeneratorSpec& spec, std::size_t group) {
  const double r = spec.buffer_radius;
  const double lo = r;
  const double hi = spec.plane_size - r;
  const double mean_x = spec.plane_size * (0.5 + spec.group_location_shift[group]);
  double x = rng.normal(mean_x, spec.plane_size / 5.0);
  while (x < lo || x > hi) x = rng.normal(mean_x, spec.plane_size / 5.0);
  return {x, rng.uniform(lo, hi)};
}

double missing_rate(const GeneratorSpec& spec, const std::string& feature, Race race) {
  const auto g = spec.group_missingness_rates.find(feature);
  if (g != spec.group_missingness_rates.end()) {
    const auto it = g->second.find(std::string(to_string(race)));
    if (it != g->second.end()) return it->second;
  }
  const auto it = spec.missingness_rates.find(feature);
  return it == spec.missingness_rates.end() ? 0.0 : it->second;
}

std::vector<FeatureInfo> dictionary_for(const GeneratorSpec& spec) {
  std::vector<FeatureInfo> dict;
  dict.push_back({"age", FeatureKind::continuous, FeatureLevel::demographic, {}});
  dict.push_back({"sex", FeatureKind::categorical, FeatureLevel::demographic, {"male", "female"}});
  std::vector<std::string> races;
  for (Race r : kRaces) races.emplace_back(to_string(r));
  dict.push_back({"race_ethnicity", FeatureKind::categorical, FeatureLevel::demographic, races});
  dict.push_back({"cci", FeatureKind::continuous, FeatureLevel::demographic, {}});
  for (const auto& c : spec.categorical) {
    dict.push_back({c.name, FeatureKind::categorical, FeatureLevel::individual, c.categories});
  }
  for (const auto& m : spec.contextual) {
    dict.push_back({m.name, FeatureKind::continuous, FeatureLevel::contextual, {}});
  }
  return dict;
}

}  // namespace

Cohort generate_cohort(const GeneratorSpec& spec) {
  validate(spec);
  Cohort cohort;
  cohort.feature_dictionary = dictionary_for(spec);
  cohort.cells = generate_cells(spec);

  Rng rng(derive_seed(spec.seed, "cohort.patients"));
  std::vector<double> year_weights = spec.index_year_weights;
  if (year_weights.empty()) year_weights.assign(spec.index_years.size(), 1.0);
  const std::vector<double> race_mix(spec.race_mix.begin(), spec.race_mix.end());

  cohort.records.reserve(spec.n_patients);
  for (std::size_t i = 0; i < spec.n_patients; ++i) {
    PatientRecord rec;
    rec.patient_id = static_cast<std::int64_t>(i + 1);
    const std::size_t group = rng.categorical(race_mix);
    rec.race_ethnicity = kRaces[group];
    rec.sex = rng.bernoulli(spec.female_share[group]) ? Sex::female : Sex::male;
    double age = rng.normal(spec.age_mean[group], spec.age_sd);
    while (age < 18.0 || age > 100.0) age = rng.normal(spec.age_mean[group], spec.age_sd);
    rec.age = age;
    rec.cci = static_cast<int>(rng.poisson(spec.cci_mean));
    rec.index_year = spec.index_years[rng.categorical(year_weights)];

    const std::string race_label(to_string(rec.race_ethnicity));
    for (const auto& c : spec.categorical) {
      const auto gp = c.group_prior.find(race_label);
      const auto& prior = gp == c.group_prior.end() ? c.prior : gp->second;
      std::string category = c.categories[rng.categorical(prior)];
      if (rng.bernoulli(missing_rate(spec, c.name, rec.race_ethnicity))) {
        category = std::string(kUnknown);
      }
      if (c.name == "insurance") {
        rec.insurance = parse_insurance(category);
      } else {
        rec.individual_sdoh[c.name] = std::move(category);
      }
    }

    const Point home = draw_home(rng, spec, group);
    if (rng.bernoulli(spec.move_probability)) {
      const double split = rng.uniform(0.2, 0.8);
      const Point moved = draw_home(rng, spec, group);
      rec.residence_history = {{0.0, split, home}, {split, 1.0, moved}};
    } else {
      rec.residence_history = {{0.0, 1.0, home}};
    }
    cohort.records.push_back(std::move(rec));
  }

  if (spec.contextual.empty()) {
    cohort.linked_contextual.assign(cohort.records.size(), {});
  } else {
    cohort.linked_contextual = link_all(cohort.records, cohort.cells, spec.buffer_radius);
  }

  Rng outcome_rng(derive_seed(spec.seed, "cohort.outcome"));
  for (std::size_t i = 0; i < cohort.records.size(); ++i) {
    auto& rec = cohort.records[i];
    rec.outcome = outcome_rng.bernoulli(
                      ground_truth_probability(rec, cohort.linked_contextual[i], spec))
                      ? 1
                      : 0;
  }

  Rng missing_rng(derive_seed(spec.seed, "cohort.missing_age"));
  for (auto& rec : cohort.records) {
    if (missing_rng.bernoulli(missing_rate(spec, "age", rec.race_ethnicity))) {
      rec.age = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return cohort;
}

}  // namespace ipsrs::cohort
