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
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "ipsrs/cohort.hpp"
#include "ipsrs/csv.hpp"
#include "ipsrs/error.hpp"

namespace ipsrs::cohort {
namespace {

using csv::format_double;

std::vector<std::string> individual_columns(std::span<const FeatureInfo> dict) {
  std::vector<std::string> cols;
  for (const auto& f : dict) {
    if (f.level == FeatureLevel::individual && f.name != "insurance") cols.push_back(f.name);
  }
  return cols;
}

void maybe_comment(csv::Writer& w, std::string_view comment) {
  if (!comment.empty()) w.comment(comment);
}

}  // namespace

void write_cohort_csv(const std::filesystem::path& path, const Cohort& cohort,
                      std::string_view header_comment) {
  csv::Writer w(path);
  maybe_comment(w, header_comment);
  const auto sdoh = individual_columns(cohort.feature_dictionary);
  std::vector<std::string> header{"patient_id", "index_year", "age", "sex",
                                  "race_ethnicity", "insurance", "cci"};
  header.insert(header.end(), sdoh.begin(), sdoh.end());
  header.push_back("outcome");
  w.row(header);
  for (const auto& r : cohort.records) {
    std::vector<std::string> row{std::to_string(r.patient_id),
                                 std::to_string(r.index_year),
                                 format_double(r.age),
                                 std::string(to_string(r.sex)),
                                 std::string(to_string(r.race_ethnicity)),
                                 std::string(to_string(r.insurance)),
                                 std::to_string(r.cci)};
    for (const auto& name : sdoh) {
      const auto it = r.individual_sdoh.find(name);
      row.push_back(it == r.individual_sdoh.end() ? std::string() : it->second);
    }
    row.push_back(std::to_string(r.outcome));
    w.row(row);
  }
  w.close();
}

void write_residence_csv(const std::filesystem::path& path, std::span<const PatientRecord> records,
                         std::string_view header_comment) {
  csv::Writer w(path);
  maybe_comment(w, header_comment);
  w.row({"patient_id", "start_fraction", "end_fraction", "x", "y"});
  for (const auto& r : records) {
    for (const auto& p : r.residence_history) {
      w.row({std::to_string(r.patient_id), format_double(p.start_fraction),
             format_double(p.end_fraction), format_double(p.point.x), format_double(p.point.y)});
    }
  }
  w.close();
}

void write_contextual_csv(const std::filesystem::path& path, std::span<const ContextualCell> cells,
                          std::string_view header_comment) {
  csv::Writer w(path);
  maybe_comment(w, header_comment);
  std::vector<std::string> measures;
  if (!cells.empty()) {
    for (const auto& [name, v] : cells.front().measures) measures.push_back(name);
  }
  std::vector<std::string> header{"cell_id", "year", "xmin", "ymin", "xmax", "ymax"};
  header.insert(header.end(), measures.begin(), measures.end());
  w.row(header);
  for (const auto& c : cells) {
    std::vector<std::string> row{std::to_string(c.cell_id), std::to_string(c.year),
                                 format_double(c.bounds.xmin), format_double(c.bounds.ymin),
                                 format_double(c.bounds.xmax), format_double(c.bounds.ymax)};
    for (const auto& m : measures) {
      const auto it = c.measures.find(m);
      row.push_back(it == c.measures.end() ? std::string() : format_double(it->second));
    }
    w.row(row);
  }
  w.close();
}

void write_linked_csv(const std::filesystem::path& path, std::span<const PatientRecord> records,
                      const std::vector<std::map<std::string, double>>& linked,
                      std::string_view header_comment) {
  csv::Writer w(path);
  maybe_comment(w, header_comment);
  std::vector<std::string> measures;
  if (!linked.empty()) {
    for (const auto& [name, v] : linked.front()) measures.push_back(name);
  }
  std::vector<std::string> header{"patient_id"};
  header.insert(header.end(), measures.begin(), measures.end());
  w.row(header);
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::vector<std::string> row{std::to_string(records[i].patient_id)};
    for (const auto& m : measures) {
      const auto it = linked[i].find(m);
      row.push_back(it == linked[i].end() ? std::string() : format_double(it->second));
    }
    w.row(row);
  }
  w.close();
}

void write_feature_dictionary(const std::filesystem::path& path,
                              std::span<const FeatureInfo> features,
                              std::string_view producer_hash) {
  nlohmann::ordered_json doc;
  doc["schema"] = "ipsrs.feature_dictionary/1";
  if (!producer_hash.empty()) doc["config_hash"] = producer_hash;
  auto& list = doc["features"];
  list = nlohmann::ordered_json::array();
  for (const auto& f : features) {
    nlohmann::ordered_json entry;
    entry["name"] = f.name;
    entry["kind"] = to_string(f.kind);
    entry["level"] = to_string(f.level);
    entry["categories"] = f.categories;
    list.push_back(entry);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

std::vector<FeatureInfo> read_feature_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  std::vector<FeatureInfo> out;
  try {
    for (const auto& entry : doc.at("features")) {
      FeatureInfo f;
      f.name = entry.at("name").get<std::string>();
      f.kind = parse_kind(entry.at("kind").get<std::string>());
      f.level = parse_level(entry.at("level").get<std::string>());
      f.categories = entry.at("categories").get<std::vector<std::string>>();
      out.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return out;
}

std::vector<PatientRecord> read_cohort_csv(const std::filesystem::path& path,
                                           std::span<const FeatureInfo> dictionary) {
  const auto table = csv::read(path);
  const auto sdoh = individual_columns(dictionary);
  const auto c_id = table.column("patient_id");
  const auto c_year = table.column("index_year");
  const auto c_age = table.column("age");
  const auto c_sex = table.column("sex");
  const auto c_race = table.column("race_ethnicity");
  const auto c_ins = table.column("insurance");
  const auto c_cci = table.column("cci");
  const auto c_out = table.column("outcome");
  std::vector<std::size_t> c_sdoh;
  for (const auto& name : sdoh) c_sdoh.push_back(table.column(name));

  std::vector<PatientRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = path.string() + " row " + std::to_string(i + 1);
    PatientRecord r;
    try {
      r.patient_id = csv::parse_int(row[c_id], where);
      r.index_year = static_cast<int>(csv::parse_int(row[c_year], where));
      r.age = csv::parse_double(row[c_age], where);
      r.sex = parse_sex(row[c_sex]);
      r.race_ethnicity = parse_race(row[c_race]);
      r.insurance = row[c_ins].empty() ? Insurance::Unknown : parse_insurance(row[c_ins]);
      r.cci = static_cast<int>(csv::parse_int(row[c_cci], where));
      r.outcome = static_cast<int>(csv::parse_int(row[c_out], where));
    } catch (const ValidationError& e) {
      throw IoError(where + ": " + e.what());
    }
    for (std::size_t k = 0; k < sdoh.size(); ++k) {
      if (!row[c_sdoh[k]].empty()) r.individual_sdoh[sdoh[k]] = row[c_sdoh[k]];
    }
    validate_record(r);
    records.push_back(std::move(r));
  }
  return records;
}

void read_residence_csv(const std::filesystem::path& path, std::vector<PatientRecord>& records) {
  const auto table = csv::read(path);
  const auto c_id = table.column("patient_id");
  const auto c_start = table.column("start_fraction");
  const auto c_end = table.column("end_fraction");
  const auto c_x = table.column("x");
  const auto c_y = table.column("y");
  std::unordered_map<std::int64_t, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].residence_history.clear();
    index[records[i].patient_id] = i;
  }
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = path.string() + " row " + std::to_string(i + 1);
    const auto id = csv::parse_int(row[c_id], where);
    const auto it = index.find(id);
    if (it == index.end()) throw IoError(where + ": unknown patient_id " + std::to_string(id));
    records[it->second].residence_history.push_back(
        {csv::parse_double(row[c_start], where), csv::parse_double(row[c_end], where),
         {csv::parse_double(row[c_x], where), csv::parse_double(row[c_y], where)}});
  }
  for (const auto& r : records) validate_record(r);
}

std::vector<ContextualCell> read_contextual_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const std::vector<std::string> fixed{"cell_id", "year", "xmin", "ymin", "xmax", "ymax"};
  std::vector<std::size_t> fixed_idx;
  for (const auto& f : fixed) fixed_idx.push_back(table.column(f));
  std::vector<std::pair<std::string, std::size_t>> measures;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (std::find(fixed.begin(), fixed.end(), table.header[c]) == fixed.end()) {
      measures.emplace_back(table.header[c], c);
    }
  }
  std::vector<ContextualCell> cells;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = path.string() + " row " + std::to_string(i + 1);
    ContextualCell cell;
    cell.cell_id = csv::parse_int(row[fixed_idx[0]], where);
    cell.year = static_cast<int>(csv::parse_int(row[fixed_idx[1]], where));
    cell.bounds = {csv::parse_double(row[fixed_idx[2]], where),
                   csv::parse_double(row[fixed_idx[3]], where),
                   csv::parse_double(row[fixed_idx[4]], where),
                   csv::parse_double(row[fixed_idx[5]], where)};
    for (const auto& [name, c] : measures) {
      if (row[c].empty()) continue;
      const double v = csv::parse_double(row[c], where);
      if (!std::isfinite(v)) throw IoError(where + ": measure '" + name + "' not finite");
      cell.measures[name] = v;
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::vector<std::map<std::string, double>> read_linked_csv(const std::filesystem::path& path,
                                                           std::span<const PatientRecord> records) {
  const auto table = csv::read(path);
  const auto c_id = table.column("patient_id");
  std::unordered_map<std::int64_t, std::size_t> row_of;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    row_of[csv::parse_int(table.rows[i][c_id], path.string())] = i;
  }
  std::vector<std::map<std::string, double>> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto it = row_of.find(records[i].patient_id);
    if (it == row_of.end()) {
      throw IoError(path.string() + ": no linked row for patient " +
                    std::to_string(records[i].patient_id));
    }
    const auto& row = table.rows[it->second];
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c == c_id) continue;
      out[i][table.header[c]] = csv::parse_double(row[c], path.string());
    }
  }
  return out;
}

}  // namespace ipsrs::cohort
