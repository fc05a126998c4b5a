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

// Neighborhood-regression edge prefilter, Fisher-z conditional independence
// tests and PC-Stable structure search producing a CPDAG.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipsrs/explain.hpp"
#include "ipsrs/matrix.hpp"

namespace ipsrs::causal {

// Unordered pair of node names, stored with first < second.
using NodePair = std::pair<std::string, std::string>;
NodePair make_pair(std::string_view a, std::string_view b);

struct CITestConfig {
  double alpha = 0.05;
  int max_condition_size = 3;
};

struct CITestResult {
  bool independent = false;
  double p_value = 0.0;
  double partial_correlation = 0.0;
};

// Pairwise Pearson correlations of the columns of a data matrix. Each entry
// depends only on its two columns, so results do not depend on column order.
class CorrelationMatrix {
 public:
  CorrelationMatrix(const Matrix& data, std::span<const std::string> names);

  std::size_t n() const { return n_; }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  double operator()(std::size_t a, std::size_t b) const { return r_[a * names_.size() + b]; }

 private:
  std::size_t n_ = 0;
  std::vector<std::string> names_;
  std::vector<double> r_;
};

// Fisher-z test of the partial correlation of a and b given S; independent
// iff p >= alpha. Conditioning indices are processed in name order. Throws
// SingularMatrixError when the conditioning correlation matrix is singular.
CITestResult ci_test(const CorrelationMatrix& corr, std::size_t a, std::size_t b,
                     std::span<const std::size_t> s, const CITestConfig& config);

CITestResult ci_test(const Matrix& data, std::size_t a, std::size_t b,
                     std::span<const std::size_t> s, const CITestConfig& config);

// 4 * sqrt(log(max(p, 2)) / n) on standardized columns.
double default_prefilter_penalty(std::size_t n, std::size_t p);

// Node-wise L1 regressions (logistic for 0/1 columns, least squares
// otherwise) on standardized columns; a pair is allowed when either
// endpoint's regression keeps the other (OR rule). Throws ValidationError
// naming a constant column.
std::set<NodePair> mgm_prefilter(const Matrix& data, std::span<const std::string> names,
                                 std::optional<double> penalty = std::nullopt);

struct Edge {
  std::string from;
  std::string to;
  bool directed = false;  // from -> to; otherwise from < to and undirected

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct CausalGraph {
  std::vector<std::string> nodes;  // sorted
  std::vector<Edge> edges;         // sorted
  std::map<NodePair, std::vector<std::string>> sepsets;

  bool adjacent(std::string_view a, std::string_view b) const;
  bool directed(std::string_view from, std::string_view to) const;
  std::size_t directed_count() const;
  std::size_t undirected_count() const;
  std::set<NodePair> skeleton() const;
};

struct PcConfig {
  CITestConfig test;
  // When set, edges are never oriented out of this node.
  std::optional<std::string> forbid_out_of;
  unsigned workers = 1;
};

// Level-wise skeleton search with adjacency snapshots, v-structure
// orientation (conflicts stay undirected), Meek rules 1-4 and a final
// acyclicity check. `allowed` restricts candidate pairs; nullopt means all.
CausalGraph pc_stable(const Matrix& data, std::span<const std::string> names,
                      const std::optional<std::set<NodePair>>& allowed, const PcConfig& config);

// Orients a skeleton given the separating sets; exposed for the equivalence
// class reference in tests.
CausalGraph orient(const std::vector<std::string>& nodes, const std::set<NodePair>& skeleton,
                   const std::map<NodePair, std::vector<std::string>>& sepsets,
                   const std::optional<std::string>& forbid_out_of = std::nullopt);

// Union of the top-k source features of each ranking, collapsing dummy
// columns to their source feature via `source_of` (identity when absent).
// k is clamped, with a warning, to the features a ranking offers.
std::vector<std::string> select_causal_features(
    std::span<const explain::RankedColumn> first, std::span<const explain::RankedColumn> second,
    std::size_t k, const std::map<std::string, std::string>& source_of = {});

// "# nodes: a,b,c" header, then one `A -> B` or `A -- B` line per edge.
void write_edge_list(const std::filesystem::path& path, const CausalGraph& graph,
                     std::string_view header_comment = {});
CausalGraph read_edge_list(const std::filesystem::path& path);

}  // namespace ipsrs::causal
