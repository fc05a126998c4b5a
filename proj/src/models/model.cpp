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
#include "ipsrs/models/model.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ipsrs/error.hpp"
#include "ipsrs/evaluate.hpp"
#include "ipsrs/rng.hpp"

namespace ipsrs::models {
namespace {

using json = nlohmann::ordered_json;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double total_penalty(const HyperPoint& p) {
  return std::visit(overloaded{[](const Penalty& q) { return q.l1 + q.l2; },
                               [](const TreeConfig& c) { return c.l2_leaf + c.min_split_gain; }},
                    p);
}

int rounds_of(const HyperPoint& p) {
  return std::holds_alternative<TreeConfig>(p) ? std::get<TreeConfig>(p).max_rounds : 0;
}

std::vector<double> parameter_tuple(const HyperPoint& p) {
  return std::visit(
      overloaded{[](const Penalty& q) { return std::vector<double>{0.0, q.l1, q.l2}; },
                 [](const TreeConfig& c) {
                   return std::vector<double>{1.0,
                                              static_cast<double>(c.max_depth),
                                              c.learning_rate,
                                              static_cast<double>(c.max_rounds),
                                              c.min_child_weight,
                                              c.l2_leaf,
                                              c.min_split_gain,
                                              c.row_subsample,
                                              c.col_subsample,
                                              static_cast<double>(c.early_stopping_patience),
                                              static_cast<double>(c.seed)};
                 }},
      p);
}

// True when a should be preferred over b.
bool better(const HyperPoint& a, double auc_a, const HyperPoint& b, double auc_b) {
  if (auc_a != auc_b) return auc_a > auc_b;
  const double pa = total_penalty(a), pb = total_penalty(b);
  if (pa != pb) return pa > pb;
  const int ra = rounds_of(a), rb = rounds_of(b);
  if (ra != rb) return ra < rb;
  return parameter_tuple(a) < parameter_tuple(b);
}

json tree_json(const Tree& tree) {
  json nodes = json::array();
  std::function<void(int)> emit = [&](int id) {
    const TreeNode& n = tree.nodes[id];
    json e;
    if (n.is_leaf()) {
      e["weight"] = n.weight;
      e["cover"] = n.cover;
      nodes.push_back(std::move(e));
      return;
    }
    e["column"] = n.column;
    e["threshold"] = n.threshold;
    e["gain"] = n.gain;
    e["cover"] = n.cover;
    nodes.push_back(std::move(e));
    emit(n.left);
    emit(n.right);
  };
  emit(0);
  return nodes;
}

Tree tree_from_json(const nlohmann::json& nodes) {
  Tree tree;
  std::size_t cursor = 0;
  std::function<int()> read = [&]() -> int {
    if (cursor >= nodes.size()) throw IoError("truncated preorder tree in model file");
    const auto& e = nodes[cursor++];
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    TreeNode n;
    n.cover = e.value("cover", 0.0);
    if (e.contains("weight")) {
      n.weight = e.at("weight").get<double>();
      tree.nodes[id] = n;
      return id;
    }
    n.column = e.at("column").get<int>();
    n.threshold = e.at("threshold").get<double>();
    n.gain = e.value("gain", 0.0);
    n.left = read();
    n.right = read();
    tree.nodes[id] = n;
    return id;
  };
  read();
  if (cursor != nodes.size()) throw IoError("trailing nodes in preorder tree");
  return tree;
}

json config_json(const TreeConfig& c) {
  json j;
  j["max_depth"] = c.max_depth;
  j["learning_rate"] = c.learning_rate;
  j["max_rounds"] = c.max_rounds;
  j["min_child_weight"] = c.min_child_weight;
  j["l2_leaf"] = c.l2_leaf;
  j["min_split_gain"] = c.min_split_gain;
  j["row_subsample"] = c.row_subsample;
  j["col_subsample"] = c.col_subsample;
  j["early_stopping_patience"] = c.early_stopping_patience;
  j["seed"] = c.seed;
  return j;
}

TreeConfig config_from_json(const nlohmann::json& j) {
  TreeConfig c;
  c.max_depth = j.at("max_depth").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_rounds = j.at("max_rounds").get<int>();
  c.min_child_weight = j.at("min_child_weight").get<double>();
  c.l2_leaf = j.at("l2_leaf").get<double>();
  c.min_split_gain = j.at("min_split_gain").get<double>();
  c.row_subsample = j.at("row_subsample").get<double>();
  c.col_subsample = j.at("col_subsample").get<double>();
  c.early_stopping_patience = j.at("early_stopping_patience").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json model_json(const Model& model) {
  return std::visit(
      overloaded{
          [](const LinearModel& m) {
            json j;
            j["type"] = "linear";
            j["intercept"] = m.intercept;
            j["weights"] = m.weights;
            j["penalty"] = {{"l1", m.penalty.l1}, {"l2", m.penalty.l2}};
            j["converged"] = m.converged;
            j["iterations"] = m.iterations;
            if (m.covariance) j["covariance"] = m.covariance->data();
            return j;
          },
          [](const TreeEnsemble& m) {
            json j;
            j["type"] = "gbdt";
            j["base_score"] = m.base_score;
            j["learning_rate"] = m.learning_rate;
            j["n_features"] = m.n_features;
            j["best_round"] = m.best_round;
            j["config"] = config_json(m.config);
            j["validation_auroc"] = m.validation_auroc;
            json trees = json::array();
            for (const auto& t : m.trees) trees.push_back(tree_json(t));
            j["trees"] = std::move(trees);
            return j;
          }},
      model);
}

}  // namespace

std::vector<double> predict_margin(const Model& model, const Matrix& x) {
  return std::visit([&](const auto& m) { return predict_margin(m, x); }, model);
}

std::vector<double> predict_proba(const Model& model, const Matrix& x) {
  auto m = predict_margin(model, x);
  for (double& v : m) v = sigmoid(v);
  return m;
}

std::size_t model_width(const Model& model) {
  return std::visit([](const auto& m) { return m.width(); }, model);
}

std::string describe(const HyperPoint& point) {
  return std::visit(overloaded{[](const Penalty& q) {
                                 json j{{"l1", q.l1}, {"l2", q.l2}};
                                 return "linear" + j.dump();
                               },
                               [](const TreeConfig& c) { return "gbdt" + config_json(c).dump(); }},
                    point);
}

Model fit(const HyperPoint& point, const Matrix& x, std::span<const int> labels,
          std::optional<ValidationData> validation) {
  if (const auto* pen = std::get_if<Penalty>(&point)) {
    return fit_penalized_logistic(x, labels, *pen);
  }
  return fit_gbdt(x, labels, std::get<TreeConfig>(point), validation);
}

std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("cross-validation needs k >= 2");
  Rng rng(seed);
  std::vector<int> folds(labels.size(), 0);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) rows.push_back(i);
    }
    rng.shuffle(rows);
    for (std::size_t r = 0; r < rows.size(); ++r) folds[rows[r]] = static_cast<int>(r % k);
  }
  return folds;
}

CVSelection grid_search_cv(const Matrix& x, std::span<const int> labels,
                           const std::vector<HyperPoint>& grid, int k, std::uint64_t seed,
                           unsigned workers) {
  if (grid.empty()) throw ValidationError("hyperparameter grid is empty");
  if (x.rows() != labels.size()) throw ValidationError("design rows and labels differ in length");
  CVSelection sel;
  sel.grid = grid;
  sel.folds = stratified_folds(labels, k, seed);

  std::vector<std::vector<std::size_t>> train(k), held(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int f = 0; f < k; ++f) (sel.folds[i] == f ? held[f] : train[f]).push_back(i);
  }
  for (int f = 0; f < k; ++f) {
    for (const auto* part : {&train[f], &held[f]}) {
      int pos = 0;
      for (std::size_t i : *part) pos += labels[i];
      if (pos == 0 || pos == static_cast<int>(part->size())) {
        throw SingleClassError("fold " + std::to_string(f) +
                               " contains a single class; use fewer folds or more rows");
      }
    }
  }
  std::vector<Matrix> train_x(k), held_x(k);
  std::vector<std::vector<int>> train_y(k), held_y(k);
  for (int f = 0; f < k; ++f) {
    train_x[f] = x.select_rows(train[f]);
    held_x[f] = x.select_rows(held[f]);
    train_y[f] = select(std::vector<int>(labels.begin(), labels.end()), train[f]);
    held_y[f] = select(std::vector<int>(labels.begin(), labels.end()), held[f]);
  }

  const std::size_t tasks = grid.size() * static_cast<std::size_t>(k);
  std::vector<double> result(tasks, 0.0);
  std::vector<std::exception_ptr> errors(tasks);
  auto run = [&](std::size_t t) {
    const std::size_t point = t / k;
    const int f = static_cast<int>(t % k);
    try {
      const Model m = fit(grid[point], train_x[f], train_y[f]);
      result[t] = evaluate::auroc(predict_margin(m, held_x[f]), held_y[f]);
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(workers, tasks));
  if (n_workers == 1) {
    for (std::size_t t = 0; t < tasks; ++t) run(t);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < tasks; t += n_workers) run(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  sel.fold_auroc.assign(grid.size(), {});
  sel.mean_auroc.assign(grid.size(), 0.0);
  for (std::size_t pnt = 0; pnt < grid.size(); ++pnt) {
    double s = 0.0;
    for (int f = 0; f < k; ++f) {
      const double a = result[pnt * k + f];
      sel.fold_auroc[pnt].push_back(a);
      s += a;
    }
    sel.mean_auroc[pnt] = s / k;
  }
  for (std::size_t pnt = 1; pnt < grid.size(); ++pnt) {
    if (better(grid[pnt], sel.mean_auroc[pnt], grid[sel.selected],
               sel.mean_auroc[sel.selected])) {
      sel.selected = pnt;
    }
  }
  sel.rule =
      "max mean fold AUROC; ties: larger total penalty, fewer boosting rounds, smaller "
      "parameter tuple";
  return sel;
}

std::string to_json(const Model& model) { return model_json(model).dump(); }

Model model_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto type = j.at("type").get<std::string>();
    if (type == "linear") {
      LinearModel m;
      m.intercept = j.at("intercept").get<double>();
      m.weights = j.at("weights").get<std::vector<double>>();
      m.penalty.l1 = j.at("penalty").at("l1").get<double>();
      m.penalty.l2 = j.at("penalty").at("l2").get<double>();
      m.converged = j.value("converged", false);
      m.iterations = j.value("iterations", 0);
      if (j.contains("covariance")) {
        const auto values = j.at("covariance").get<std::vector<double>>();
        const std::size_t d = m.weights.size() + 1;
        if (values.size() != d * d) throw IoError("covariance size does not match the weights");
        m.covariance.emplace(d, d);
        m.covariance->data() = values;
      }
      return m;
    }
    if (type == "gbdt") {
      TreeEnsemble m;
      m.base_score = j.at("base_score").get<double>();
      m.learning_rate = j.at("learning_rate").get<double>();
      m.n_features = j.at("n_features").get<std::size_t>();
      m.best_round = j.value("best_round", 0);
      m.config = config_from_json(j.at("config"));
      m.validation_auroc = j.value("validation_auroc", std::vector<double>{});
      for (const auto& t : j.at("trees")) {
        m.trees.push_back(tree_from_json(t));
        for (const auto& n : m.trees.back().nodes) {
          if (!n.is_leaf() && (n.column < 0 || static_cast<std::size_t>(n.column) >= m.n_features)) {
            throw IoError("tree node references column outside the model width");
          }
        }
      }
      return m;
    }
    throw IoError("unknown model type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed model JSON: ") + e.what());
  }
}

void write_model(const std::filesystem::path& path, const Model& model,
                 std::string_view producer_hash) {
  json j;
  j["schema"] = "ipsrs.model/1";
  if (!producer_hash.empty()) j["config_hash"] = producer_hash;
  j["model"] = model_json(model);
  std::ofstream out(path);
  out << j.dump(1) << '\n';
  if (!out) throw IoError("cannot write model file " + path.string());
}

Model read_model(const std::filesystem::path& path, std::string* producer_hash) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    const auto j = nlohmann::json::parse(buf.str());
    if (j.value("schema", "") != "ipsrs.model/1") {
      throw IoError(path.string() + " is not a model file");
    }
    if (producer_hash) *producer_hash = j.value("config_hash", "");
    return model_from_json(j.at("model").dump());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed model file " + path.string() + ": " + e.what());
  }
}

}  // namespace ipsrs::models
