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

// Imputation, dummy encoding, min-max normalization and the temporal plus
// stratified 7:1:2 partitioning of a cohort.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ipsrs/cohort.hpp"
#include "ipsrs/matrix.hpp"

namespace ipsrs::preprocess {

using cohort::FeatureInfo;
using cohort::FeatureKind;
using cohort::FeatureLevel;

// One raw column; categorical cells use "" and continuous cells NaN for
// missing values.
struct RawColumn {
  FeatureInfo info;
  std::vector<std::string> categorical;
  std::vector<double> continuous;

  bool missing(std::size_t row) const;
};

struct RawTable {
  std::vector<std::int64_t> patient_ids;
  std::vector<int> labels;
  std::vector<std::string> groups;
  std::vector<int> index_years;
  std::vector<RawColumn> columns;

  std::size_t rows() const { return patient_ids.size(); }
  RawTable select_rows(std::span<const std::size_t> rows) const;
  const RawColumn& column(std::string_view name) const;
};

enum class FeatureSet { individual, contextual, combined };
std::string_view to_string(FeatureSet set);
FeatureSet parse_feature_set(std::string_view text);

// Model-input table for a feature set: individual-level and/or contextual
// features from the dictionary. Categorical SDoH absent from a record are
// missing; NaN linked values are missing.
RawTable build_table(std::span<const cohort::PatientRecord> records,
                     const std::vector<std::map<std::string, double>>& linked,
                     std::span<const FeatureInfo> dictionary, FeatureSet set);

struct ImputationState {
  std::map<std::string, double> means;  // continuous column -> train mean
};

// Means over non-missing values of `rows` (the train partition).
ImputationState fit_imputation(const RawTable& table, std::span<const std::size_t> rows);

// Categorical blanks -> "unknown", continuous blanks -> fitted mean.
RawTable impute(const RawTable& table, const ImputationState& state);

// Fits on `train_rows` and applies to the whole table.
RawTable impute(const RawTable& table, std::span<const std::size_t> train_rows);

struct ColumnInfo {
  std::string name;
  std::string source_feature;
  std::optional<std::string> category;
  FeatureLevel level = FeatureLevel::individual;
  FeatureKind kind = FeatureKind::categorical;
};

struct Range {
  double min = 0.0;
  double max = 0.0;

  friend bool operator==(const Range&, const Range&) = default;
};

struct NormalizationState {
  std::map<std::string, Range> ranges;                            // continuous
  std::map<std::string, std::vector<std::string>> categories;     // categorical rosters
  std::vector<std::string> feature_order;
};

struct FeatureMatrix {
  Matrix values;
  std::vector<ColumnInfo> columns;
  std::vector<int> labels;
  std::vector<std::string> groups;
  std::vector<std::int64_t> patient_ids;
  NormalizationState normalization;

  std::size_t rows() const { return values.rows(); }
  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
  // Index of a named column; throws ValidationError when absent.
  std::size_t column_index(std::string_view name) const;
};

// Fit mode (no state): rosters from the dictionary plus "unknown", ranges
// from the given rows. Transform mode: applies `state` without clamping and
// rejects categories outside the fitted rosters.
FeatureMatrix encode_and_normalize(const RawTable& completed,
                                   const std::optional<NormalizationState>& state = std::nullopt);

enum class Partition { train, validation, test, independent_test };
std::string_view to_string(Partition p);
Partition parse_partition(std::string_view text);

struct SplitAssignment {
  std::vector<Partition> partition;  // parallel to table rows
  int cutoff_year = 0;

  std::vector<std::size_t> rows(Partition p) const;
};

// Rows with index_year > cutoff become the independent test set; the rest
// (the modeling set) is split train/validation/test by `ratios`, stratified
// by label and deterministic in `seed`.
SplitAssignment split(std::span<const int> index_years, std::span<const int> labels,
                      int cutoff_year, std::array<double, 3> ratios, std::uint64_t seed);

// Largest-remainder allocation of n items to the given ratios.
std::vector<std::size_t> allocate(std::size_t n, std::span<const double> ratios);

// Fitted preprocessing state, serialized so a later invocation can transform
// new rows bit-identically.
struct PreprocessState {
  FeatureSet feature_set = FeatureSet::combined;
  ImputationState imputation;
  NormalizationState normalization;
};

void write_state(const std::filesystem::path& path, const PreprocessState& state,
                 std::string_view producer_hash = {});
PreprocessState read_state(const std::filesystem::path& path);

// CSV with header `patient_id,label,group,<columns>`; a leading comment line
// carries the column metadata.
void write_matrix_csv(const std::filesystem::path& path, const FeatureMatrix& matrix,
                      std::string_view header_comment = {});
FeatureMatrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace ipsrs::preprocess
