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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ipsrs::csv {

struct Table {
  // Leading '#' lines, without the '#'.
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws IoError naming the file and column.
  std::size_t column(std::string_view name) const;
  std::string source;
};

// Plain comma-separated files without quoting; fields never contain commas.
Table read(const std::filesystem::path& path);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);

  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void comment(std::string_view text);
  void row(const std::vector<std::string>& fields);

  // Writes the buffered content; throws IoError when the file cannot be
  // written. Called by the destructor if not called explicitly.
  void close();

 private:
  std::filesystem::path path_;
  std::string buffer_;
  bool closed_ = false;
};

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text, std::string_view context);
long long parse_int(std::string_view text, std::string_view context);

std::vector<std::string> split(std::string_view line, char delimiter = ',');

}  // namespace ipsrs::csv
