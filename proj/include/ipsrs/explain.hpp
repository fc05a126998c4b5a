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

// Interventional Shapley attributions on the margin scale: closed form for
// linear models, a path algorithm for tree ensembles, and brute-force
// coalition enumeration as a reference.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ipsrs/matrix.hpp"
#include "ipsrs/models/model.hpp"

namespace ipsrs::explain {

struct Attribution {
  std::vector<std::string> columns;
  // Mean background margin; the same for every row.
  double base_value = 0.0;
  Matrix phi;  // rows x columns

  std::size_t rows() const { return phi.rows(); }
  // base_value + sum of row r's phi.
  double reconstructed_margin(std::size_t r) const;
};

// Names default to "c0", "c1", ... when `columns` is empty.
Attribution shap_linear(const models::LinearModel& model, const Matrix& rows,
                        const Matrix& background, std::span<const std::string> columns = {});

// Exact interventional values; work is O(rows * background * leaves * depth)
// and rows are split across `workers` without changing the result.
Attribution shap_tree(const models::TreeEnsemble& model, const Matrix& rows,
                      const Matrix& background, std::span<const std::string> columns = {},
                      unsigned workers = 1);

// Dispatches to the family's fast method.
Attribution shap(const models::Model& model, const Matrix& rows, const Matrix& background,
                 std::span<const std::string> columns = {}, unsigned workers = 1);

// Enumerates all 2^p coalitions; refuses p > 15.
Attribution shap_exact_oracle(const models::Model& model, const Matrix& rows,
                              const Matrix& background, std::span<const std::string> columns = {});

struct RankedColumn {
  std::string column;
  double mean_abs = 0.0;
  int rank = 0;  // 1-based
};

// Columns by descending mean |phi|; ties keep column order.
std::vector<RankedColumn> global_ranking(const Attribution& attribution);

struct CombinationScore {
  std::vector<std::string> columns;
  double mean_score = 0.0;
  double mean_abs_score = 0.0;
  int rank_by_score = 0;
  int rank_by_abs = 0;
};

// Score of a combination on a row is the sum of its members' phi. Results
// are ordered by descending mean score. Unknown columns are rejected.
std::vector<CombinationScore> combination_attribution(
    const Attribution& attribution, const std::vector<std::vector<std::string>>& combos);

// All subsets of `columns` with a size in [2, max_size], in lexicographic
// index order.
std::vector<std::vector<std::string>> enumerate_combinations(std::span<const std::string> columns,
                                                             int max_size = 3);

// Up to `count` distinct row indices out of n, sorted, seeded.
std::vector<std::size_t> sample_background(std::size_t n, std::size_t count, std::uint64_t seed);

}  // namespace ipsrs::explain
