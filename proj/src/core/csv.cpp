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
#include "ipsrs/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ipsrs/error.hpp"

namespace ipsrs::csv {

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw IoError(source + ": missing column '" + std::string(name) + "'");
}

std::vector<std::string> split(std::string_view line, char delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  Table table;
  table.source = path.string();
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header && !line.empty() && line.front() == '#') {
      table.comments.push_back(line.substr(1));
      continue;
    }
    if (!have_header) {
      table.header = split(line);
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != table.header.size()) {
      throw IoError(path.string() + ": row " + std::to_string(table.rows.size() + 1) + " has " +
                    std::to_string(fields.size()) + " fields, header has " +
                    std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw IoError("'" + path.string() + "' is empty");
  return table;
}

Writer::Writer(const std::filesystem::path& path) : path_(path) {}

Writer::~Writer() {
  if (closed_) return;
  try {
    close();
  } catch (const IoError&) {
  }
}

void Writer::close() {
  closed_ = true;
  std::ofstream out(path_, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path_.string() + "'");
  out << buffer_;
  if (!out) throw IoError("write failed for '" + path_.string() + "'");
}

void Writer::comment(std::string_view text) {
  buffer_ += '#';
  buffer_ += text;
  buffer_ += '\n';
}

void Writer::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i != 0) buffer_ += ',';
    buffer_ += fields[i];
  }
  buffer_ += '\n';
}

std::string format_double(double value) {
  if (std::isnan(value)) return "";
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

double parse_double(std::string_view text, std::string_view context) {
  if (text.empty()) return std::nan("");
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw IoError(std::string(context) + ": not a number: '" + std::string(text) + "'");
  }
  return value;
}

long long parse_int(std::string_view text, std::string_view context) {
  long long value = 0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw IoError(std::string(context) + ": not an integer: '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace ipsrs::csv
