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
#include "ipsrs/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "ipsrs/csv.hpp"
#include "ipsrs/error.hpp"
#include "ipsrs/rng.hpp"

namespace ipsrs::preprocess {

bool RawColumn::missing(std::size_t row) const {
  return info.kind == FeatureKind::categorical ? categorical[row].empty()
                                               : std::isnan(continuous[row]);
}

RawTable RawTable::select_rows(std::span<const std::size_t> rows) const {
  RawTable out;
  out.patient_ids = select(patient_ids, rows);
  out.labels = select(labels, rows);
  out.groups = select(groups, rows);
  out.index_years = select(index_years, rows);
  for (const auto& c : columns) {
    RawColumn col{c.info, {}, {}};
    if (c.info.kind == FeatureKind::categorical) {
      col.categorical = select(c.categorical, rows);
    } else {
      col.continuous = select(c.continuous, rows);
    }
    out.columns.push_back(std::move(col));
  }
  return out;
}

const RawColumn& RawTable::column(std::string_view name) const {
  for (const auto& c : columns) {
    if (c.info.name == name) return c;
  }
  throw ValidationError("table has no column '" + std::string(name) + "'");
}

std::string_view to_string(FeatureSet set) {
  switch (set) {
    case FeatureSet::individual:
      return "individual";
    case FeatureSet::contextual:
      return "contextual";
    case FeatureSet::combined:
      break;
  }
  return "combined";
}

FeatureSet parse_feature_set(std::string_view text) {
  if (text == "individual") return FeatureSet::individual;
  if (text == "contextual") return FeatureSet::contextual;
  if (text == "combined") return FeatureSet::combined;
  throw ValidationError("unknown feature set '" + std::string(text) + "'");
}

RawTable build_table(std::span<const cohort::PatientRecord> records,
                     const std::vector<std::map<std::string, double>>& linked,
                     std::span<const FeatureInfo> dictionary, FeatureSet set) {
  if (linked.size() != records.size()) {
    throw ValidationError("linked contextual values missing for some patients");
  }
  RawTable table;
  for (const auto& r : records) {
    table.patient_ids.push_back(r.patient_id);
    table.labels.push_back(r.outcome);
    table.groups.emplace_back(cohort::to_string(r.race_ethnicity));
    table.index_years.push_back(r.index_year);
  }
  const bool want_individual = set != FeatureSet::contextual;
  const bool want_contextual = set != FeatureSet::individual;
  for (const auto& f : dictionary) {
    const bool take = (f.level == FeatureLevel::individual && want_individual) ||
                      (f.level == FeatureLevel::contextual && want_contextual);
    if (!take) continue;
    RawColumn col{f, {}, {}};
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (f.kind == FeatureKind::categorical) {
        if (f.name == "insurance") {
          const auto ins = records[i].insurance;
          col.categorical.emplace_back(ins == cohort::Insurance::Unknown
                                           ? std::string()
                                           : std::string(cohort::to_string(ins)));
        } else {
          const auto it = records[i].individual_sdoh.find(f.name);
          col.categorical.push_back(it == records[i].individual_sdoh.end() ? std::string()
                                                                           : it->second);
        }
      } else {
        const auto it = linked[i].find(f.name);
        col.continuous.push_back(it == linked[i].end() ? std::numeric_limits<double>::quiet_NaN()
                                                       : it->second);
      }
    }
    table.columns.push_back(std::move(col));
  }
  if (table.columns.empty()) {
    throw ValidationError("feature set '" + std::string(to_string(set)) + "' selects no features");
  }
  return table;
}

ImputationState fit_imputation(const RawTable& table, std::span<const std::size_t> rows) {
  ImputationState state;
  for (const auto& c : table.columns) {
    if (c.info.kind != FeatureKind::continuous) continue;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r : rows) {
      if (std::isnan(c.continuous[r])) continue;
      total += c.continuous[r];
      ++count;
    }
    if (count == 0) {
      throw ValidationError("continuous column '" + c.info.name +
                            "' is entirely missing in the training partition");
    }
    state.means[c.info.name] = total / static_cast<double>(count);
  }
  return state;
}

RawTable impute(const RawTable& table, const ImputationState& state) {
  RawTable out = table;
  for (auto& c : out.columns) {
    if (c.info.kind == FeatureKind::categorical) {
      for (auto& v : c.categorical) {
        if (v.empty()) v = std::string(cohort::kUnknown);
      }
      continue;
    }
    const auto it = state.means.find(c.info.name);
    const bool any_missing =
        std::any_of(c.continuous.begin(), c.continuous.end(), [](double v) { return std::isnan(v); });
    if (!any_missing) continue;
    if (it == state.means.end()) {
      throw ValidationError("no imputation mean for column '" + c.info.name + "'");
    }
    for (auto& v : c.continuous) {
      if (std::isnan(v)) v = it->second;
    }
  }
  return out;
}

RawTable impute(const RawTable& table, std::span<const std::size_t> train_rows) {
  return impute(table, fit_imputation(table, train_rows));
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.values = values.select_rows(rows);
  out.columns = columns;
  out.labels = select(labels, rows);
  out.groups = select(groups, rows);
  out.patient_ids = select(patient_ids, rows);
  out.normalization = normalization;
  return out;
}

std::size_t FeatureMatrix::column_index(std::string_view name) const {
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].name == name) return j;
  }
  throw ValidationError("matrix has no column '" + std::string(name) + "'");
}

FeatureMatrix encode_and_normalize(const RawTable& completed,
                                   const std::optional<NormalizationState>& state) {
  const bool fit = !state.has_value();
  NormalizationState norm;
  if (fit) {
    for (const auto& c : completed.columns) {
      norm.feature_order.push_back(c.info.name);
      if (c.info.kind == FeatureKind::categorical) {
        auto roster = c.info.categories;
        if (std::find(roster.begin(), roster.end(), cohort::kUnknown) == roster.end()) {
          roster.emplace_back(cohort::kUnknown);
        }
        norm.categories[c.info.name] = std::move(roster);
      } else {
        Range range{std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity()};
        for (double v : c.continuous) {
          if (std::isnan(v)) {
            throw ValidationError("column '" + c.info.name + "' has missing values; impute first");
          }
          range.min = std::min(range.min, v);
          range.max = std::max(range.max, v);
        }
        if (c.continuous.empty()) range = {0.0, 0.0};
        norm.ranges[c.info.name] = range;
      }
    }
  } else {
    norm = *state;
    std::vector<std::string> names;
    for (const auto& c : completed.columns) names.push_back(c.info.name);
    if (names != norm.feature_order) {
      throw ValidationError("table columns do not match the fitted normalization state");
    }
  }

  FeatureMatrix out;
  out.labels = completed.labels;
  out.groups = completed.groups;
  out.patient_ids = completed.patient_ids;
  for (const auto& c : completed.columns) {
    if (c.info.kind == FeatureKind::categorical) {
      for (const auto& cat : norm.categories.at(c.info.name)) {
        out.columns.push_back({c.info.name + "=" + cat, c.info.name, cat, c.info.level,
                               FeatureKind::categorical});
      }
    } else {
      out.columns.push_back({c.info.name, c.info.name, std::nullopt, c.info.level,
                             FeatureKind::continuous});
    }
  }

  const std::size_t n = completed.rows();
  out.values = Matrix(n, out.columns.size());
  std::size_t offset = 0;
  for (const auto& c : completed.columns) {
    if (c.info.kind == FeatureKind::categorical) {
      const auto& roster = norm.categories.at(c.info.name);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& v = c.categorical[i];
        if (v.empty()) {
          throw ValidationError("column '" + c.info.name + "' has missing values; impute first");
        }
        const auto it = std::find(roster.begin(), roster.end(), v);
        if (it == roster.end()) {
          throw ValidationError("unseen category '" + v + "' in feature '" + c.info.name + "'");
        }
        out.values(i, offset + static_cast<std::size_t>(it - roster.begin())) = 1.0;
      }
      offset += roster.size();
    } else {
      const Range range = norm.ranges.at(c.info.name);
      const double width = range.max - range.min;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = c.continuous[i];
        if (std::isnan(v)) {
          throw ValidationError("column '" + c.info.name + "' has missing values; impute first");
        }
        out.values(i, offset) = width > 0.0 ? (v - range.min) / width : 0.0;
      }
      offset += 1;
    }
  }
  out.normalization = std::move(norm);
  return out;
}

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::train:
      return "train";
    case Partition::validation:
      return "validation";
    case Partition::test:
      return "test";
    case Partition::independent_test:
      break;
  }
  return "independent_test";
}

Partition parse_partition(std::string_view text) {
  for (Partition p : {Partition::train, Partition::validation, Partition::test,
                      Partition::independent_test}) {
    if (to_string(p) == text) return p;
  }
  throw ValidationError("unknown partition '" + std::string(text) + "'");
}

std::vector<std::size_t> SplitAssignment::rows(Partition p) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < partition.size(); ++i) {
    if (partition[i] == p) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> allocate(std::size_t n, std::span<const double> ratios) {
  const double total = std::accumulate(ratios.begin(), ratios.end(), 0.0);
  std::vector<std::size_t> counts(ratios.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    const double exact = static_cast<double>(n) * ratios[k] / total;
    // Guard against 0.7 * 100 landing a hair under 70.
    counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += counts[k];
    remainders.emplace_back(exact - static_cast<double>(counts[k]), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i % ratios.size()].second];
  return counts;
}

SplitAssignment split(std::span<const int> index_years, std::span<const int> labels,
                      int cutoff_year, std::array<double, 3> ratios, std::uint64_t seed) {
  if (index_years.size() != labels.size()) throw ValidationError("split: size mismatch");
  for (double r : ratios) {
    if (!(r > 0.0)) throw ValidationError("split ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1");
  }
  SplitAssignment out;
  out.cutoff_year = cutoff_year;
  out.partition.assign(labels.size(), Partition::independent_test);

  std::array<std::vector<std::size_t>, 2> by_class;
  std::size_t independent = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (index_years[i] > cutoff_year) {
      ++independent;
      continue;
    }
    by_class[labels[i] != 0 ? 1 : 0].push_back(i);
  }
  const std::size_t modeling = by_class[0].size() + by_class[1].size();
  if (modeling == 0) throw ValidationError("modeling set is empty for cutoff year " +
                                           std::to_string(cutoff_year));
  if (independent == 0) {
    throw ValidationError("independent test set is empty: no index_year after " +
                          std::to_string(cutoff_year));
  }

  const auto totals = allocate(modeling, ratios);
  std::vector<double> shares(totals.begin(), totals.end());
  const auto positives = allocate(by_class[1].size(), shares);
  std::array<std::size_t, 3> negatives{};
  for (std::size_t k = 0; k < 3; ++k) negatives[k] = totals[k] - positives[k];

  Rng rng(seed);
  const Partition parts[3] = {Partition::train, Partition::validation, Partition::test};
  for (int cls = 0; cls < 2; ++cls) {
    auto rows = by_class[static_cast<std::size_t>(cls)];
    rng.shuffle(rows);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const std::size_t take = cls == 1 ? positives[k] : negatives[k];
      for (std::size_t t = 0; t < take; ++t) out.partition[rows[pos++]] = parts[k];
    }
  }
  return out;
}

namespace {

nlohmann::ordered_json columns_json(const std::vector<ColumnInfo>& columns) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : columns) {
    nlohmann::ordered_json e;
    e["name"] = c.name;
    e["source"] = c.source_feature;
    e["category"] = c.category ? nlohmann::ordered_json(*c.category) : nlohmann::ordered_json();
    e["level"] = cohort::to_string(c.level);
    e["kind"] = cohort::to_string(c.kind);
    arr.push_back(e);
  }
  return arr;
}

nlohmann::ordered_json normalization_json(const NormalizationState& n) {
  nlohmann::ordered_json j;
  j["feature_order"] = n.feature_order;
  auto& ranges = j["ranges"];
  ranges = nlohmann::ordered_json::object();
  for (const auto& [name, r] : n.ranges) ranges[name] = {r.min, r.max};
  auto& cats = j["categories"];
  cats = nlohmann::ordered_json::object();
  for (const auto& [name, roster] : n.categories) cats[name] = roster;
  return j;
}

NormalizationState normalization_from(const nlohmann::json& j) {
  NormalizationState n;
  n.feature_order = j.at("feature_order").get<std::vector<std::string>>();
  for (const auto& [name, r] : j.at("ranges").items()) {
    n.ranges[name] = {r.at(0).get<double>(), r.at(1).get<double>()};
  }
  for (const auto& [name, roster] : j.at("categories").items()) {
    n.categories[name] = roster.get<std::vector<std::string>>();
  }
  return n;
}

}  // namespace

void write_state(const std::filesystem::path& path, const PreprocessState& state,
                 std::string_view producer_hash) {
  nlohmann::ordered_json j;
  j["schema"] = "ipsrs.preprocess_state/1";
  if (!producer_hash.empty()) j["config_hash"] = producer_hash;
  j["feature_set"] = to_string(state.feature_set);
  j["imputation_means"] = state.imputation.means;
  j["normalization"] = normalization_json(state.normalization);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

PreprocessState read_state(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    const auto j = nlohmann::json::parse(in);
    PreprocessState s;
    s.feature_set = parse_feature_set(j.at("feature_set").get<std::string>());
    s.imputation.means = j.at("imputation_means").get<std::map<std::string, double>>();
    s.normalization = normalization_from(j.at("normalization"));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_matrix_csv(const std::filesystem::path& path, const FeatureMatrix& m,
                      std::string_view header_comment) {
  csv::Writer w(path);
  if (!header_comment.empty()) w.comment(header_comment);
  nlohmann::ordered_json meta;
  meta["columns"] = columns_json(m.columns);
  meta["normalization"] = normalization_json(m.normalization);
  w.comment("meta=" + meta.dump());
  std::vector<std::string> header{"patient_id", "label", "group"};
  for (const auto& c : m.columns) header.push_back(c.name);
  w.row(header);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::vector<std::string> row{std::to_string(m.patient_ids[i]), std::to_string(m.labels[i]),
                                 m.groups[i]};
    for (double v : m.values.row(i)) row.push_back(csv::format_double(v));
    w.row(row);
  }
  w.close();
}

FeatureMatrix read_matrix_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  FeatureMatrix m;
  bool have_meta = false;
  for (const auto& c : table.comments) {
    if (c.rfind("meta=", 0) != 0) continue;
    try {
      const auto meta = nlohmann::json::parse(c.substr(5));
      for (const auto& e : meta.at("columns")) {
        ColumnInfo info;
        info.name = e.at("name").get<std::string>();
        info.source_feature = e.at("source").get<std::string>();
        if (!e.at("category").is_null()) info.category = e.at("category").get<std::string>();
        info.level = cohort::parse_level(e.at("level").get<std::string>());
        info.kind = cohort::parse_kind(e.at("kind").get<std::string>());
        m.columns.push_back(std::move(info));
      }
      m.normalization = normalization_from(meta.at("normalization"));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ": bad column metadata: " + e.what());
    }
    have_meta = true;
  }
  if (!have_meta) throw IoError(path.string() + ": missing column metadata");
  if (table.header.size() != m.columns.size() + 3) {
    throw IoError(path.string() + ": header does not match column metadata");
  }
  m.values = Matrix(table.rows.size(), m.columns.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    m.patient_ids.push_back(csv::parse_int(row[0], path.string()));
    m.labels.push_back(static_cast<int>(csv::parse_int(row[1], path.string())));
    m.groups.push_back(row[2]);
    for (std::size_t j = 0; j < m.columns.size(); ++j) {
      m.values(i, j) = csv::parse_double(row[j + 3], path.string());
    }
  }
  return m;
}

}  // namespace ipsrs::preprocess
