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

// Second-order gradient-boosted trees for the logistic loss: exact greedy
// splits over presorted columns, level-wise growth, validation-AUROC early
// stopping.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ipsrs/matrix.hpp"

namespace ipsrs::models {

struct TreeNode {
  int column = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight = 0.0;  // leaf value before the learning rate
  double gain = 0.0;    // split gain, internal nodes
  double cover = 0.0;   // hessian sum of the node's training rows

  bool is_leaf() const { return column < 0; }
};

// Rows with value < threshold go left.
struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> row) const;
  // Index of the leaf reached by `row`.
  int leaf_index(std::span<const double> row) const;
};

struct TreeConfig {
  int max_depth = 3;
  double learning_rate = 0.1;
  int max_rounds = 100;
  double min_child_weight = 1.0;
  double l2_leaf = 1.0;
  double min_split_gain = 0.0;
  double row_subsample = 1.0;
  double col_subsample = 1.0;
  int early_stopping_patience = 10;
  std::uint64_t seed = 0;

  friend bool operator==(const TreeConfig&, const TreeConfig&) = default;
};

struct TreeEnsemble {
  double base_score = 0.0;  // logit of train prevalence
  double learning_rate = 0.1;
  std::size_t n_features = 0;
  std::vector<Tree> trees;
  TreeConfig config;
  // Validation AUROC after each round (index 0 = base score only); empty
  // without a validation set.
  std::vector<double> validation_auroc;
  int best_round = 0;

  std::size_t width() const { return n_features; }
};

struct ValidationData {
  const Matrix& x;
  std::span<const int> labels;
};

// Without validation data all max_rounds trees are kept. With it, training
// stops after `early_stopping_patience` rounds without improvement and the
// ensemble is truncated to the best round. A single-class validation set is
// rejected.
TreeEnsemble fit_gbdt(const Matrix& x, std::span<const int> labels, const TreeConfig& config,
                      std::optional<ValidationData> validation = std::nullopt);

std::vector<double> predict_margin(const TreeEnsemble& model, const Matrix& x);

}  // namespace ipsrs::models
