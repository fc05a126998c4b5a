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
#include "ipsrs/models/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ipsrs/error.hpp"
#include "ipsrs/evaluate.hpp"
#include "ipsrs/rng.hpp"

namespace ipsrs::models {
namespace {

void check_config(const TreeConfig& c) {
  if (c.max_depth < 0) throw ValidationError("max_depth must be >= 0");
  if (!(c.learning_rate > 0.0 && c.learning_rate <= 1.0)) {
    throw ValidationError("learning_rate must lie in (0, 1]");
  }
  if (c.max_rounds < 0) throw ValidationError("max_rounds must be >= 0");
  if (c.min_child_weight < 0.0) throw ValidationError("min_child_weight must be >= 0");
  if (c.l2_leaf < 0.0) throw ValidationError("l2_leaf must be >= 0");
  if (c.min_split_gain < 0.0) throw ValidationError("min_split_gain must be >= 0");
  if (!(c.row_subsample > 0.0 && c.row_subsample <= 1.0)) {
    throw ValidationError("row_subsample must lie in (0, 1]");
  }
  if (!(c.col_subsample > 0.0 && c.col_subsample <= 1.0)) {
    throw ValidationError("col_subsample must lie in (0, 1]");
  }
  if (c.early_stopping_patience < 1) throw ValidationError("early_stopping_patience must be >= 1");
}

struct Candidate {
  double gain = 0.0;
  int column = -1;
  double threshold = 0.0;
  double left_g = 0.0, left_h = 0.0;
};

double split_threshold(double lo, double hi) {
  const double mid = lo + (hi - lo) * 0.5;
  return mid > lo ? mid : hi;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<std::vector<std::size_t>>& order,
              const TreeConfig& config)
      : x_(x), order_(order), config_(config) {}

  Tree build(std::span<const double> g, std::span<const double> h,
             std::span<const std::size_t> rows, std::span<const int> columns) {
    const std::size_t n = x_.rows();
    Tree tree;
    std::vector<int> position(n, -1);  // frontier node of each row, -1 = unused
    std::vector<char> in_sample(n, 0);
    for (std::size_t r : rows) in_sample[r] = 1;

    tree.nodes.push_back({});
    double g0 = 0.0, h0 = 0.0;
    for (std::size_t r : rows) {
      position[r] = 0;
      g0 += g[r];
      h0 += h[r];
    }
    std::vector<int> frontier{0};
    std::vector<double> node_g{g0}, node_h{h0};

    for (int depth = 0; depth <= config_.max_depth && !frontier.empty(); ++depth) {
      std::vector<Candidate> best(tree.nodes.size());
      if (depth < config_.max_depth) {
        search(g, h, position, frontier, node_g, node_h, columns, best);
      }
      std::vector<int> next;
      for (int id : frontier) {
        const Candidate& c = best[id];
        TreeNode& node = tree.nodes[id];
        node.cover = node_h[id];
        if (c.column < 0) {
          node.weight = -node_g[id] / (node_h[id] + config_.l2_leaf);
          continue;
        }
        const int left = static_cast<int>(tree.nodes.size());
        const int right = left + 1;
        node.column = c.column;
        node.threshold = c.threshold;
        node.gain = c.gain;
        node.left = left;
        node.right = right;
        tree.nodes.push_back({});
        tree.nodes.push_back({});
        node_g.push_back(c.left_g);
        node_h.push_back(c.left_h);
        node_g.push_back(node_g[id] - c.left_g);
        node_h.push_back(node_h[id] - c.left_h);
        next.push_back(left);
        next.push_back(right);
      }
      // Route rows to the new children.
      for (std::size_t r = 0; r < n; ++r) {
        if (position[r] < 0) continue;
        const TreeNode& node = tree.nodes[position[r]];
        if (node.is_leaf()) {
          position[r] = -1;
          continue;
        }
        position[r] = x_(r, node.column) < node.threshold ? node.left : node.right;
      }
      frontier = std::move(next);
    }
    return tree;
  }

 private:
  void search(std::span<const double> g, std::span<const double> h,
              const std::vector<int>& position, const std::vector<int>& frontier,
              const std::vector<double>& node_g, const std::vector<double>& node_h,
              std::span<const int> columns, std::vector<Candidate>& best) const {
    const double lambda = config_.l2_leaf;
    const std::size_t m = node_g.size();
    std::vector<double> acc_g(m), acc_h(m), last(m);
    std::vector<char> seen(m), active(m, 0);
    for (int id : frontier) active[id] = 1;

    for (int col : columns) {
      std::fill(acc_g.begin(), acc_g.end(), 0.0);
      std::fill(acc_h.begin(), acc_h.end(), 0.0);
      std::fill(seen.begin(), seen.end(), 0);
      for (std::size_t r : order_[col]) {
        const int id = position[r];
        if (id < 0 || !active[id]) continue;
        const double v = x_(r, col);
        if (seen[id] && v != last[id]) {
          const double gl = acc_g[id], hl = acc_h[id];
          const double gr = node_g[id] - gl, hr = node_h[id] - hl;
          if (hl >= config_.min_child_weight && hr >= config_.min_child_weight) {
            const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                                       node_g[id] * node_g[id] / (node_h[id] + lambda));
            if (gain - config_.min_split_gain > 0.0 && gain > best[id].gain) {
              best[id] = {gain, col, split_threshold(last[id], v), gl, hl};
            }
          }
        }
        acc_g[id] += g[r];
        acc_h[id] += h[r];
        last[id] = v;
        seen[id] = 1;
      }
    }
  }

  const Matrix& x_;
  const std::vector<std::vector<std::size_t>>& order_;
  const TreeConfig& config_;
};

std::vector<double> tree_margins(const TreeEnsemble& model, const Matrix& x, std::size_t rounds) {
  std::vector<double> m(x.rows(), model.base_score);
  for (std::size_t t = 0; t < rounds; ++t) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      m[i] += model.learning_rate * model.trees[t].predict(x.row(i));
    }
  }
  return m;
}

}  // namespace

int Tree::leaf_index(std::span<const double> row) const {
  int id = 0;
  while (!nodes[id].is_leaf()) {
    const TreeNode& n = nodes[id];
    id = row[n.column] < n.threshold ? n.left : n.right;
  }
  return id;
}

double Tree::predict(std::span<const double> row) const { return nodes[leaf_index(row)].weight; }

std::vector<double> predict_margin(const TreeEnsemble& model, const Matrix& x) {
  if (x.cols() != model.width()) {
    throw ValidationError("model expects " + std::to_string(model.width()) +
                          " columns, input has " + std::to_string(x.cols()));
  }
  return tree_margins(model, x, model.trees.size());
}

TreeEnsemble fit_gbdt(const Matrix& x, std::span<const int> labels, const TreeConfig& config,
                      std::optional<ValidationData> validation) {
  check_config(config);
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (labels.size() != n) throw ValidationError("label count does not match the design rows");
  if (n == 0) throw ValidationError("cannot fit a model on zero rows");
  double positives = 0.0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("labels must be 0 or 1");
    positives += y;
  }
  if (positives == 0.0 || positives == static_cast<double>(n)) {
    throw SingleClassError("training labels contain a single class");
  }
  if (validation) {
    if (validation->x.cols() != p || validation->x.rows() != validation->labels.size()) {
      throw ValidationError("validation data shape does not match the training data");
    }
    int vp = 0;
    for (int y : validation->labels) vp += y;
    if (vp == 0 || vp == static_cast<int>(validation->labels.size())) {
      throw SingleClassError("validation labels contain a single class; early stopping is impossible");
    }
  }

  TreeEnsemble model;
  model.config = config;
  model.learning_rate = config.learning_rate;
  model.n_features = p;
  model.base_score = logit(positives / static_cast<double>(n));

  std::vector<std::vector<std::size_t>> order(p);
  for (std::size_t j = 0; j < p; ++j) {
    order[j].resize(n);
    std::iota(order[j].begin(), order[j].end(), 0);
    std::stable_sort(order[j].begin(), order[j].end(),
                     [&](std::size_t a, std::size_t b) { return x(a, j) < x(b, j); });
  }

  Rng rng(config.seed);
  TreeBuilder builder(x, order, config);
  std::vector<double> margin(n, model.base_score), g(n), h(n);
  std::vector<double> val_margin;
  double best_auc = 0.0;
  int since_best = 0;
  if (validation) {
    val_margin.assign(validation->x.rows(), model.base_score);
    best_auc = evaluate::auroc(val_margin, validation->labels);
    model.validation_auroc.push_back(best_auc);
  }

  const std::size_t n_rows = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.row_subsample * static_cast<double>(n))));
  const std::size_t n_cols = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(config.col_subsample * static_cast<double>(p))));

  for (int round = 1; round <= config.max_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double pr = sigmoid(margin[i]);
      g[i] = pr - labels[i];
      h[i] = pr * (1.0 - pr);
    }
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    if (n_rows < n) {
      rng.shuffle(rows);
      rows.resize(n_rows);
      std::sort(rows.begin(), rows.end());
    }
    std::vector<int> cols(p);
    std::iota(cols.begin(), cols.end(), 0);
    if (n_cols < p) {
      rng.shuffle(cols);
      cols.resize(n_cols);
      std::sort(cols.begin(), cols.end());
    }
    model.trees.push_back(builder.build(g, h, rows, cols));
    const Tree& tree = model.trees.back();
    for (std::size_t i = 0; i < n; ++i) margin[i] += model.learning_rate * tree.predict(x.row(i));

    if (validation) {
      for (std::size_t i = 0; i < val_margin.size(); ++i) {
        val_margin[i] += model.learning_rate * tree.predict(validation->x.row(i));
      }
      const double auc = evaluate::auroc(val_margin, validation->labels);
      model.validation_auroc.push_back(auc);
      if (auc > best_auc) {
        best_auc = auc;
        model.best_round = round;
        since_best = 0;
      } else if (++since_best >= config.early_stopping_patience) {
        break;
      }
    }
  }
  if (validation) {
    model.trees.resize(static_cast<std::size_t>(model.best_round));
  } else {
    model.best_round = static_cast<int>(model.trees.size());
  }
  return model;
}

}  // namespace ipsrs::models
