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

// Patient and contextual data model, the seeded synthetic cohort generator
// with a planted logistic ground truth, and area/time-weighted contextual
// linkage.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ipsrs::cohort {

enum class Sex { male, female };
enum class Race { NHW, NHB, Hispanic, Other };
enum class Insurance { Medicare, Private, Medicaid, Nopay, Other, Unknown };

inline constexpr std::array<Race, 4> kRaces{Race::NHW, Race::NHB, Race::Hispanic, Race::Other};

std::string_view to_string(Sex sex);
std::string_view to_string(Race race);
// Lower-case category label, also used as the encoded category name.
std::string_view to_string(Insurance insurance);
Sex parse_sex(std::string_view text);
Race parse_race(std::string_view text);
Insurance parse_insurance(std::string_view text);

inline constexpr std::string_view kUnknown = "unknown";

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct ResidencePeriod {
  double start_fraction = 0.0;
  double end_fraction = 1.0;
  Point point;
};

struct PatientRecord {
  std::int64_t patient_id = 0;
  int index_year = 0;
  double age = 0.0;  // NaN when unobserved
  Sex sex = Sex::female;
  Race race_ethnicity = Race::NHW;
  Insurance insurance = Insurance::Unknown;
  int cci = 0;
  std::map<std::string, std::string> individual_sdoh;
  std::vector<ResidencePeriod> residence_history;
  int outcome = 0;
};

struct Rect {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;
};

struct ContextualCell {
  std::int64_t cell_id = 0;
  Rect bounds;
  int year = 0;
  std::map<std::string, double> measures;
};

enum class FeatureKind { categorical, continuous };
// `demographic` columns feed adjustment models and grouping, not the score.
enum class FeatureLevel { demographic, individual, contextual };

std::string_view to_string(FeatureKind kind);
std::string_view to_string(FeatureLevel level);
FeatureKind parse_kind(std::string_view text);
FeatureLevel parse_level(std::string_view text);

struct FeatureInfo {
  std::string name;
  FeatureKind kind = FeatureKind::categorical;
  FeatureLevel level = FeatureLevel::individual;
  std::vector<std::string> categories;  // empty for continuous features
};

struct CategoricalSpec {
  std::string name;
  std::vector<std::string> categories;
  std::vector<double> prior;
  // Optional per-group override of `prior`, keyed by race label.
  std::map<std::string, std::vector<double>> group_prior;
};

struct ContextualMeasureSpec {
  std::string name;
  double mean = 0.0;
  double sd = 1.0;
  // Change in the field across the plane's x extent, in units of sd.
  double x_gradient = 0.0;
  // Cell-to-cell noise, in units of sd.
  double cell_noise = 0.5;
  bool nonnegative = true;
};

struct GeneratorSpec {
  std::size_t n_patients = 1000;
  std::uint64_t seed = 1;
  // NHW, NHB, Hispanic, Other.
  std::array<double, 4> race_mix{5133.0 / 10192, 4011.0 / 10192, 495.0 / 10192, 553.0 / 10192};

  // Per race group, in race_mix order.
  std::array<double, 4> age_mean{60.19, 56.39, 55.95, 59.42};
  double age_sd = 13.0;
  std::array<double, 4> female_share{0.519, 0.668, 0.572, 0.539};
  double cci_mean = 2.0;

  std::vector<int> index_years{2015, 2016, 2017, 2018, 2019, 2020, 2021};
  std::vector<double> index_year_weights;  // empty = uniform

  // Insurance is generated like any other categorical; its spec must be
  // named "insurance" and use the Insurance labels.
  std::vector<CategoricalSpec> categorical;
  std::vector<ContextualMeasureSpec> contextual;

  // Abstract planar geography: a square [0, plane_size]^2 tiled by cells.
  double plane_size = 100.0;
  double cell_size = 10.0;
  double buffer_radius = 2.5;
  // Mean x-position offset per race group, as a fraction of plane_size.
  std::array<double, 4> group_location_shift{0.0, 0.0, 0.0, 0.0};
  double move_probability = 0.3;

  // Keys: "feature=category" for categorical levels, or a continuous feature
  // name ("age", "cci", a contextual measure). Continuous features enter on
  // a standardized scale, see `standardize`.
  std::map<std::string, double> planted_coefficients;
  double intercept = -2.2;
  std::map<std::string, double> group_label_shift;  // race label -> log-odds

  // Categorical rates replace the category with "unknown" before the outcome
  // draw. The only continuous feature with planted missingness is "age",
  // blanked after the outcome draw.
  std::map<std::string, double> missingness_rates;
  std::map<std::string, std::map<std::string, double>> group_missingness_rates;
};

// Throws ValidationError describing the first violated invariant.
void validate(const GeneratorSpec& spec);

// Checks age, outcome, and that residence periods tile [0, 1] in order.
void validate_record(const PatientRecord& record);

// Default spec calibrated to the marginals of the study population: category
// priors per group, race mix, contextual crime-rate fields. No planted
// coefficients beyond the intercept.
GeneratorSpec default_generator_spec();

struct Cohort {
  std::vector<PatientRecord> records;
  std::vector<FeatureInfo> feature_dictionary;
  // Parallel to records; measure -> linked value.
  std::vector<std::map<std::string, double>> linked_contextual;
  std::vector<ContextualCell> cells;

  const FeatureInfo* feature(std::string_view name) const;
};

Cohort generate_cohort(const GeneratorSpec& spec);

// Scale used for a continuous feature in the planted linear predictor:
// (value - center) / scale.
struct Standardization {
  double center = 0.0;
  double scale = 1.0;
};
Standardization standardize(const GeneratorSpec& spec, std::string_view feature);

// Linear predictor of the planted model for one patient; `linked` holds the
// patient's contextual values. Throws ValidationError when the record holds a
// feature or category the generator does not declare.
double ground_truth_margin(const PatientRecord& record,
                           const std::map<std::string, double>& linked,
                           const GeneratorSpec& spec);

double ground_truth_probability(const PatientRecord& record,
                                const std::map<std::string, double>& linked,
                                const GeneratorSpec& spec);

// Area of the disk of `radius` around `center` intersected with `rect`.
double circle_rect_intersection_area(Point center, double radius, const Rect& rect);

// Area-weighted mean over cells of the record's index year intersecting the
// buffer, then duration-weighted across residence periods. Throws
// LinkageError naming patient and measure when a buffer meets no cell.
std::map<std::string, double> link_contextual(const PatientRecord& record,
                                              std::span<const ContextualCell> cells,
                                              double buffer_radius);

// Links every record; results are per patient and independent of `workers`.
std::vector<std::map<std::string, double>> link_all(std::span<const PatientRecord> records,
                                                    std::span<const ContextualCell> cells,
                                                    double buffer_radius, unsigned workers = 1);

// ---- file formats -------------------------------------------------------

void write_cohort_csv(const std::filesystem::path& path, const Cohort& cohort,
                      std::string_view header_comment = {});
void write_residence_csv(const std::filesystem::path& path, std::span<const PatientRecord> records,
                         std::string_view header_comment = {});
void write_contextual_csv(const std::filesystem::path& path, std::span<const ContextualCell> cells,
                          std::string_view header_comment = {});
void write_linked_csv(const std::filesystem::path& path, std::span<const PatientRecord> records,
                      const std::vector<std::map<std::string, double>>& linked,
                      std::string_view header_comment = {});
void write_feature_dictionary(const std::filesystem::path& path,
                              std::span<const FeatureInfo> features,
                              std::string_view producer_hash = {});

std::vector<FeatureInfo> read_feature_dictionary(const std::filesystem::path& path);
// Reads records (without residence history) using the dictionary's
// individual-SDoH columns.
std::vector<PatientRecord> read_cohort_csv(const std::filesystem::path& path,
                                           std::span<const FeatureInfo> dictionary);
void read_residence_csv(const std::filesystem::path& path, std::vector<PatientRecord>& records);
std::vector<ContextualCell> read_contextual_csv(const std::filesystem::path& path);
std::vector<std::map<std::string, double>> read_linked_csv(
    const std::filesystem::path& path, std::span<const PatientRecord> records);

}  // namespace ipsrs::cohort
