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
#include "ipsrs/explain.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <thread>

#include "ipsrs/error.hpp"
#include "ipsrs/rng.hpp"

namespace ipsrs::explain {
namespace {

std::vector<std::string> column_names(std::span<const std::string> columns, std::size_t p) {
  if (columns.empty()) {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < p; ++j) out.push_back("c" + std::to_string(j));
    return out;
  }
  if (columns.size() != p) throw ValidationError("column name count does not match the width");
  return {columns.begin(), columns.end()};
}

void check_shapes(std::size_t width, const Matrix& rows, const Matrix& background) {
  if (background.rows() == 0) throw ValidationError("background must contain at least one row");
  if (rows.cols() != width || background.cols() != width) {
    throw ValidationError("model expects " + std::to_string(width) +
                          " columns; rows have " + std::to_string(rows.cols()) +
                          " and background " + std::to_string(background.cols()));
  }
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Factorial table; tree paths are far shorter than its length.
const std::vector<double>& factorials() {
  static const std::vector<double> table = [] {
    std::vector<double> f(171, 1.0);
    for (std::size_t k = 1; k < f.size(); ++k) f[k] = f[k - 1] * static_cast<double>(k);
    return f;
  }();
  return table;
}

// One (row, background) pair through one tree. `from_x` / `from_b` hold the
// features whose splits sent the hybrid point along x's or b's branch.
class PairWalker {
 public:
  PairWalker(const models::Tree& tree, std::span<const double> x, std::span<const double> b,
             double scale, std::span<double> phi)
      : tree_(tree), x_(x), b_(b), scale_(scale), phi_(phi) {}

  void run() { visit(0); }

 private:
  static bool contains(const std::vector<int>& v, int j) {
    return std::find(v.begin(), v.end(), j) != v.end();
  }

  void visit(int id) {
    const models::TreeNode& node = tree_.nodes[id];
    if (node.is_leaf()) {
      const std::size_t a = from_x_.size(), c = from_b_.size();
      if (a + c == 0) return;
      const auto& f = factorials();
      const double v = scale_ * node.weight;
      if (a > 0) {
        const double w = v * f[a - 1] * f[c] / f[a + c];
        for (int j : from_x_) phi_[j] += w;
      }
      if (c > 0) {
        const double w = v * f[a] * f[c - 1] / f[a + c];
        for (int j : from_b_) phi_[j] -= w;
      }
      return;
    }
    const int j = node.column;
    const int x_child = x_[j] < node.threshold ? node.left : node.right;
    const int b_child = b_[j] < node.threshold ? node.left : node.right;
    if (contains(from_x_, j)) {
      visit(x_child);
    } else if (contains(from_b_, j)) {
      visit(b_child);
    } else if (x_child == b_child) {
      visit(x_child);
    } else {
      from_x_.push_back(j);
      visit(x_child);
      from_x_.pop_back();
      from_b_.push_back(j);
      visit(b_child);
      from_b_.pop_back();
    }
  }

  const models::Tree& tree_;
  std::span<const double> x_, b_;
  double scale_;
  std::span<double> phi_;
  std::vector<int> from_x_, from_b_;
};

template <class Fn>
void parallel_rows(std::size_t n, unsigned workers, Fn&& fn) {
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (w <= 1) {
    for (std::size_t r = 0; r < n; ++r) fn(r);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (std::size_t r = k; r < n; r += w) fn(r);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

double Attribution::reconstructed_margin(std::size_t r) const {
  double s = base_value;
  for (double v : phi.row(r)) s += v;
  return s;
}

Attribution shap_linear(const models::LinearModel& model, const Matrix& rows,
                        const Matrix& background, std::span<const std::string> columns) {
  const std::size_t p = model.width();
  check_shapes(p, rows, background);
  Attribution out;
  out.columns = column_names(columns, p);
  std::vector<double> mu(p, 0.0);
  for (std::size_t i = 0; i < background.rows(); ++i) {
    for (std::size_t j = 0; j < p; ++j) mu[j] += background(i, j);
  }
  for (double& m : mu) m /= static_cast<double>(background.rows());
  out.base_value = mean(models::predict_margin(model, background));
  out.phi = Matrix(rows.rows(), p);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t j = 0; j < p; ++j) out.phi(r, j) = model.weights[j] * (rows(r, j) - mu[j]);
  }
  return out;
}

Attribution shap_tree(const models::TreeEnsemble& model, const Matrix& rows,
                      const Matrix& background, std::span<const std::string> columns,
                      unsigned workers) {
  const std::size_t p = model.width();
  check_shapes(p, rows, background);
  Attribution out;
  out.columns = column_names(columns, p);
  out.base_value = mean(models::predict_margin(model, background));
  out.phi = Matrix(rows.rows(), p);
  const double inv_bg = 1.0 / static_cast<double>(background.rows());
  parallel_rows(rows.rows(), workers, [&](std::size_t r) {
    std::vector<double> acc(p, 0.0);
    for (std::size_t i = 0; i < background.rows(); ++i) {
      for (const auto& tree : model.trees) {
        PairWalker(tree, rows.row(r), background.row(i), model.learning_rate, acc).run();
      }
    }
    for (std::size_t j = 0; j < p; ++j) out.phi(r, j) = acc[j] * inv_bg;
  });
  return out;
}

Attribution shap(const models::Model& model, const Matrix& rows, const Matrix& background,
                 std::span<const std::string> columns, unsigned workers) {
  if (const auto* lin = std::get_if<models::LinearModel>(&model)) {
    return shap_linear(*lin, rows, background, columns);
  }
  return shap_tree(std::get<models::TreeEnsemble>(model), rows, background, columns, workers);
}

Attribution shap_exact_oracle(const models::Model& model, const Matrix& rows,
                              const Matrix& background, std::span<const std::string> columns) {
  const std::size_t p = models::model_width(model);
  if (p > 15) {
    throw ValidationError("exact Shapley enumeration supports at most 15 columns, got " +
                          std::to_string(p));
  }
  check_shapes(p, rows, background);
  Attribution out;
  out.columns = column_names(columns, p);
  out.base_value = mean(models::predict_margin(model, background));
  out.phi = Matrix(rows.rows(), p);
  const std::size_t subsets = std::size_t{1} << p;
  const auto& f = factorials();
  Matrix hybrid(background.rows(), p);
  std::vector<double> value(subsets);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t s = 0; s < subsets; ++s) {
      for (std::size_t i = 0; i < background.rows(); ++i) {
        for (std::size_t j = 0; j < p; ++j) {
          hybrid(i, j) = (s >> j) & 1U ? rows(r, j) : background(i, j);
        }
      }
      value[s] = mean(models::predict_margin(model, hybrid));
    }
    for (std::size_t j = 0; j < p; ++j) {
      double phi = 0.0;
      for (std::size_t s = 0; s < subsets; ++s) {
        if ((s >> j) & 1U) continue;
        const auto size = static_cast<std::size_t>(__builtin_popcountll(s));
        const double w = f[size] * f[p - size - 1] / f[p];
        phi += w * (value[s | (std::size_t{1} << j)] - value[s]);
      }
      out.phi(r, j) = phi;
    }
  }
  return out;
}

std::vector<RankedColumn> global_ranking(const Attribution& a) {
  std::vector<RankedColumn> out;
  for (std::size_t j = 0; j < a.columns.size(); ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) s += std::abs(a.phi(r, j));
    out.push_back({a.columns[j], a.rows() ? s / static_cast<double>(a.rows()) : 0.0, 0});
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedColumn& x, const RankedColumn& y) {
    return x.mean_abs > y.mean_abs;
  });
  for (std::size_t k = 0; k < out.size(); ++k) out[k].rank = static_cast<int>(k + 1);
  return out;
}

std::vector<CombinationScore> combination_attribution(
    const Attribution& a, const std::vector<std::vector<std::string>>& combos) {
  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < a.columns.size(); ++j) index[a.columns[j]] = j;
  std::vector<CombinationScore> out;
  for (const auto& combo : combos) {
    std::vector<std::size_t> cols;
    for (const auto& name : combo) {
      const auto it = index.find(name);
      if (it == index.end()) throw ValidationError("unknown attribution column '" + name + "'");
      cols.push_back(it->second);
    }
    CombinationScore c;
    c.columns = combo;
    for (std::size_t r = 0; r < a.rows(); ++r) {
      double s = 0.0;
      for (std::size_t j : cols) s += a.phi(r, j);
      c.mean_score += s;
      c.mean_abs_score += std::abs(s);
    }
    if (a.rows() > 0) {
      c.mean_score /= static_cast<double>(a.rows());
      c.mean_abs_score /= static_cast<double>(a.rows());
    }
    out.push_back(std::move(c));
  }
  std::vector<std::size_t> by_abs(out.size());
  std::iota(by_abs.begin(), by_abs.end(), 0);
  std::stable_sort(by_abs.begin(), by_abs.end(), [&](std::size_t x, std::size_t y) {
    return out[x].mean_abs_score > out[y].mean_abs_score;
  });
  for (std::size_t k = 0; k < by_abs.size(); ++k) out[by_abs[k]].rank_by_abs = static_cast<int>(k + 1);
  std::stable_sort(out.begin(), out.end(), [](const CombinationScore& x, const CombinationScore& y) {
    return x.mean_score > y.mean_score;
  });
  for (std::size_t k = 0; k < out.size(); ++k) out[k].rank_by_score = static_cast<int>(k + 1);
  return out;
}

std::vector<std::vector<std::string>> enumerate_combinations(std::span<const std::string> columns,
                                                             int max_size) {
  std::vector<std::vector<std::string>> out;
  const std::size_t n = columns.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      out.push_back({columns[i], columns[j]});
      if (max_size < 3) continue;
      for (std::size_t k = j + 1; k < n; ++k) out.push_back({columns[i], columns[j], columns[k]});
    }
  }
  return out;
}

std::vector<std::size_t> sample_background(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (count >= n) return idx;
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace ipsrs::explain
