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
#include "ipsrs/causal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "ipsrs/diagnostics.hpp"
#include "ipsrs/error.hpp"
#include "ipsrs/models/linear.hpp"

namespace ipsrs::causal {
namespace {

std::vector<std::size_t> order_by_name(std::span<const std::string> names) {
  std::vector<std::size_t> ord(names.size());
  std::iota(ord.begin(), ord.end(), 0);
  std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return names[a] < names[b]; });
  for (std::size_t k = 1; k < ord.size(); ++k) {
    if (names[ord[k]] == names[ord[k - 1]]) {
      throw ValidationError("duplicate node name '" + names[ord[k]] + "'");
    }
  }
  return ord;
}

bool is_binary(std::span<const double> v) {
  for (double x : v) {
    if (x != 0.0 && x != 1.0) return false;
  }
  return true;
}

// Lasso on standardized predictors and a centered response:
// (1/2n)|y - Xb|^2 + lambda |b|_1, cyclic coordinate descent.
std::vector<double> gaussian_lasso(const std::vector<std::vector<double>>& cols,
                                   std::span<const double> y, double lambda) {
  const std::size_t p = cols.size();
  const std::size_t n = y.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> beta(p, 0.0), resid(y.begin(), y.end()), sq(p);
  for (std::size_t j = 0; j < p; ++j) {
    double s = 0.0;
    for (double v : cols[j]) s += v * v;
    sq[j] = s * inv_n;
  }
  for (int sweep = 0; sweep < 1000; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      double rho = 0.0;
      for (std::size_t i = 0; i < n; ++i) rho += cols[j][i] * resid[i];
      rho = rho * inv_n + sq[j] * beta[j];
      double next = 0.0;
      if (rho > lambda) next = (rho - lambda) / sq[j];
      if (rho < -lambda) next = (rho + lambda) / sq[j];
      const double step = next - beta[j];
      if (step != 0.0) {
        for (std::size_t i = 0; i < n; ++i) resid[i] -= step * cols[j][i];
        beta[j] = next;
        max_change = std::max(max_change, std::abs(step));
      }
    }
    if (max_change < 1e-10) break;
  }
  return beta;
}

struct Pdag {
  std::size_t p = 0;
  std::vector<char> adj;  // symmetric
  std::vector<char> dir;  // dir[i*p+j]: i -> j

  bool adjacent(std::size_t a, std::size_t b) const { return adj[a * p + b] != 0; }
  bool directed(std::size_t a, std::size_t b) const { return dir[a * p + b] != 0; }
  bool undirected(std::size_t a, std::size_t b) const {
    return adjacent(a, b) && !directed(a, b) && !directed(b, a);
  }
  void orient(std::size_t a, std::size_t b) { dir[a * p + b] = 1; }
  void unorient(std::size_t a, std::size_t b) {
    dir[a * p + b] = 0;
    dir[b * p + a] = 0;
  }
};

// Meek rules 1-4 to closure. Orientations out of `forbidden` are skipped.
void apply_meek(Pdag& g, std::optional<std::size_t> forbidden) {
  const std::size_t p = g.p;
  auto allowed = [&](std::size_t from) { return !forbidden || *forbidden != from; };
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = 0; b < p; ++b) {
        if (a == b || !g.undirected(a, b) || !allowed(a)) continue;
        bool orient = false;
        // R1: c -> a - b with c, b nonadjacent.
        for (std::size_t c = 0; c < p && !orient; ++c) {
          if (c != b && g.directed(c, a) && !g.adjacent(c, b)) orient = true;
        }
        // R2: a -> c -> b with a - b.
        for (std::size_t c = 0; c < p && !orient; ++c) {
          if (g.directed(a, c) && g.directed(c, b)) orient = true;
        }
        // R3: a - c -> b, a - d -> b, c and d nonadjacent.
        for (std::size_t c = 0; c < p && !orient; ++c) {
          if (!(g.undirected(a, c) && g.directed(c, b))) continue;
          for (std::size_t d = c + 1; d < p && !orient; ++d) {
            if (g.undirected(a, d) && g.directed(d, b) && !g.adjacent(c, d)) orient = true;
          }
        }
        // R4: c -> d -> b with a - d, a adjacent to c, and c, b nonadjacent.
        for (std::size_t c = 0; c < p && !orient; ++c) {
          if (c == b || !g.adjacent(a, c) || g.adjacent(c, b)) continue;
          for (std::size_t d = 0; d < p && !orient; ++d) {
            if (d != c && g.undirected(a, d) && g.directed(c, d) && g.directed(d, b)) orient = true;
          }
        }
        if (orient) {
          g.orient(a, b);
          changed = true;
        }
      }
    }
  }
}

// Directed edges inside a directed cycle are returned to undirected.
void break_cycles(Pdag& g, const std::vector<std::string>& names) {
  const std::size_t p = g.p;
  std::vector<char> reach(g.dir);
  for (std::size_t k = 0; k < p; ++k) {
    for (std::size_t i = 0; i < p; ++i) {
      if (!reach[i * p + k]) continue;
      for (std::size_t j = 0; j < p; ++j) {
        if (reach[k * p + j]) reach[i * p + j] = 1;
      }
    }
  }
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < p; ++b) {
      if (g.directed(a, b) && reach[b * p + a]) {
        warn("directed cycle through " + names[a] + " -> " + names[b] +
             "; edge left undirected");
        g.unorient(a, b);
      }
    }
  }
}

CausalGraph to_graph(const Pdag& g, const std::vector<std::string>& names) {
  CausalGraph out;
  out.nodes = names;
  for (std::size_t a = 0; a < g.p; ++a) {
    for (std::size_t b = 0; b < g.p; ++b) {
      if (g.directed(a, b)) {
        out.edges.push_back({names[a], names[b], true});
      } else if (a < b && g.undirected(a, b)) {
        out.edges.push_back({names[a], names[b], false});
      }
    }
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

template <class Fn>
void run_tasks(std::size_t n, unsigned workers, Fn&& fn) {
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (w <= 1) {
    for (std::size_t t = 0; t < n; ++t) fn(t);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      for (std::size_t t = k; t < n; t += w) {
        try {
          fn(t);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Next combination of `k` indices out of `n` in lexicographic order.
bool next_combination(std::vector<std::size_t>& c, std::size_t n) {
  const std::size_t k = c.size();
  for (std::size_t i = k; i-- > 0;) {
    if (c[i] < n - k + i) {
      ++c[i];
      for (std::size_t j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

NodePair make_pair(std::string_view a, std::string_view b) {
  return a < b ? NodePair{std::string(a), std::string(b)} : NodePair{std::string(b), std::string(a)};
}

CorrelationMatrix::CorrelationMatrix(const Matrix& data, std::span<const std::string> names)
    : n_(data.rows()), names_(names.begin(), names.end()) {
  const std::size_t p = data.cols();
  if (names_.size() != p) throw ValidationError("node name count does not match the data width");
  const auto cols = data.columns();
  std::vector<std::vector<double>> centered(p);
  std::vector<double> ss(p);
  for (std::size_t j = 0; j < p; ++j) {
    double m = 0.0;
    for (double v : cols[j]) m += v;
    m /= static_cast<double>(n_);
    centered[j].resize(n_);
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      centered[j][i] = cols[j][i] - m;
      s += centered[j][i] * centered[j][i];
    }
    if (!(s > 0.0)) throw ValidationError("column '" + names_[j] + "' is constant");
    ss[j] = s;
  }
  r_.assign(p * p, 1.0);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a + 1; b < p; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n_; ++i) s += centered[a][i] * centered[b][i];
      const double r = std::clamp(s / std::sqrt(ss[a] * ss[b]), -1.0, 1.0);
      r_[a * p + b] = r;
      r_[b * p + a] = r;
    }
  }
}

CITestResult ci_test(const CorrelationMatrix& corr, std::size_t a, std::size_t b,
                     std::span<const std::size_t> s, const CITestConfig& config) {
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (static_cast<int>(s.size()) > config.max_condition_size) {
    throw ValidationError("conditioning set exceeds the configured maximum size");
  }
  const double dof = static_cast<double>(corr.n()) - static_cast<double>(s.size()) - 3.0;
  if (dof <= 0.0) throw ValidationError("too few rows for the conditioning set size");
  const auto& names = corr.names();
  if (names[b] < names[a]) std::swap(a, b);
  std::vector<std::size_t> cond(s.begin(), s.end());
  std::sort(cond.begin(), cond.end(),
            [&](std::size_t x, std::size_t y) { return names[x] < names[y]; });

  double r = corr(a, b);
  if (!cond.empty()) {
    const auto k = static_cast<Eigen::Index>(cond.size());
    Eigen::MatrixXd sss(k, k);
    Eigen::VectorXd sa(k), sb(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      sa(i) = corr(a, cond[i]);
      sb(i) = corr(b, cond[i]);
      for (Eigen::Index j = 0; j < k; ++j) sss(i, j) = corr(cond[i], cond[j]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sss);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
      throw SingularMatrixError("conditioning correlation matrix is singular");
    }
    const Eigen::VectorXd ia = llt.solve(sa);
    const Eigen::VectorXd ib = llt.solve(sb);
    const double caa = 1.0 - sa.dot(ia);
    const double cbb = 1.0 - sb.dot(ib);
    const double cab = r - sa.dot(ib);
    if (caa <= 1e-12 || cbb <= 1e-12) {
      throw SingularMatrixError("a tested variable is determined by the conditioning set");
    }
    r = std::clamp(cab / std::sqrt(caa * cbb), -1.0, 1.0);
  }
  const double z = std::atanh(r) * std::sqrt(dof);
  CITestResult out;
  out.partial_correlation = r;
  out.p_value = std::isfinite(z) ? std::erfc(std::abs(z) / std::sqrt(2.0)) : 0.0;
  out.independent = out.p_value >= config.alpha;
  return out;
}

CITestResult ci_test(const Matrix& data, std::size_t a, std::size_t b,
                     std::span<const std::size_t> s, const CITestConfig& config) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < data.cols(); ++j) names.push_back("v" + std::to_string(100000 + j));
  return ci_test(CorrelationMatrix(data, names), a, b, s, config);
}

double default_prefilter_penalty(std::size_t n, std::size_t p) {
  return 4.0 * std::sqrt(std::log(static_cast<double>(std::max<std::size_t>(p, 2))) /
                         static_cast<double>(n));
}

std::set<NodePair> mgm_prefilter(const Matrix& data, std::span<const std::string> names,
                                 std::optional<double> penalty) {
  const std::size_t n = data.rows();
  const std::size_t p = data.cols();
  if (names.size() != p) throw ValidationError("node name count does not match the data width");
  std::set<NodePair> allowed;
  if (p < 2) return allowed;
  if (n <= 10 * p) {
    warn("prefilter has " + std::to_string(n) + " rows for " + std::to_string(p) +
         " nodes; estimates may be unstable");
  }
  const double lambda = penalty.value_or(default_prefilter_penalty(n, p));
  auto cols = data.columns();
  std::vector<bool> binary(p);
  std::vector<std::vector<double>> z(p);
  for (std::size_t j = 0; j < p; ++j) {
    binary[j] = is_binary(cols[j]);
    double m = 0.0, s = 0.0;
    for (double v : cols[j]) m += v;
    m /= static_cast<double>(n);
    for (double v : cols[j]) s += (v - m) * (v - m);
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 0.0)) throw ValidationError("column '" + names[j] + "' is constant");
    z[j].resize(n);
    for (std::size_t i = 0; i < n; ++i) z[j][i] = (cols[j][i] - m) / s;
  }
  std::vector<std::vector<char>> keep(p, std::vector<char>(p, 0));
  for (std::size_t t = 0; t < p; ++t) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < p; ++j) {
      if (j != t) others.push_back(j);
    }
    std::vector<double> beta;
    if (binary[t]) {
      Matrix x(n, others.size());
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < others.size(); ++k) x(i, k) = z[others[k]][i];
      }
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = cols[t][i] == 1.0 ? 1 : 0;
      beta = models::fit_penalized_logistic(x, y, {lambda, 0.0}).weights;
    } else {
      std::vector<std::vector<double>> xs;
      for (std::size_t j : others) xs.push_back(z[j]);
      beta = gaussian_lasso(xs, z[t], lambda);
    }
    for (std::size_t k = 0; k < others.size(); ++k) {
      if (beta[k] != 0.0) keep[t][others[k]] = 1;
    }
  }
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a + 1; b < p; ++b) {
      if (keep[a][b] || keep[b][a]) allowed.insert(make_pair(names[a], names[b]));
    }
  }
  return allowed;
}

bool CausalGraph::adjacent(std::string_view a, std::string_view b) const {
  for (const auto& e : edges) {
    if ((e.from == a && e.to == b) || (e.from == b && e.to == a)) return true;
  }
  return false;
}

bool CausalGraph::directed(std::string_view from, std::string_view to) const {
  for (const auto& e : edges) {
    if (e.directed && e.from == from && e.to == to) return true;
  }
  return false;
}

std::size_t CausalGraph::directed_count() const {
  return static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [](const Edge& e) { return e.directed; }));
}

std::size_t CausalGraph::undirected_count() const { return edges.size() - directed_count(); }

std::set<NodePair> CausalGraph::skeleton() const {
  std::set<NodePair> s;
  for (const auto& e : edges) s.insert(make_pair(e.from, e.to));
  return s;
}

CausalGraph orient(const std::vector<std::string>& nodes_in, const std::set<NodePair>& skeleton,
                   const std::map<NodePair, std::vector<std::string>>& sepsets,
                   const std::optional<std::string>& forbid_out_of) {
  std::vector<std::string> nodes = nodes_in;
  std::sort(nodes.begin(), nodes.end());
  const std::size_t p = nodes.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < p; ++i) index[nodes[i]] = i;
  Pdag g;
  g.p = p;
  g.adj.assign(p * p, 0);
  g.dir.assign(p * p, 0);
  for (const auto& [a, b] : skeleton) {
    const std::size_t i = index.at(a), j = index.at(b);
    g.adj[i * p + j] = g.adj[j * p + i] = 1;
  }
  std::optional<std::size_t> forbidden;
  if (forbid_out_of) {
    const auto it = index.find(*forbid_out_of);
    if (it == index.end()) throw ValidationError("unknown node '" + *forbid_out_of + "'");
    forbidden = it->second;
  }

  // Collider proposals from unshielded triples a - c - b with c outside
  // sepset(a, b). Pairs without a recorded sepset (never tested) are not
  // oriented.
  std::vector<char> proposed(p * p, 0);
  for (std::size_t c = 0; c < p; ++c) {
    for (std::size_t a = 0; a < p; ++a) {
      if (a == c || !g.adjacent(a, c)) continue;
      for (std::size_t b = a + 1; b < p; ++b) {
        if (b == c || !g.adjacent(b, c) || g.adjacent(a, b)) continue;
        const auto it = sepsets.find(make_pair(nodes[a], nodes[b]));
        if (it == sepsets.end()) continue;
        if (std::find(it->second.begin(), it->second.end(), nodes[c]) != it->second.end()) continue;
        proposed[a * p + c] = 1;
        proposed[b * p + c] = 1;
      }
    }
  }
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < p; ++b) {
      if (!proposed[a * p + b] || proposed[b * p + a]) continue;
      if (forbidden && *forbidden == a) continue;
      g.orient(a, b);
    }
  }
  if (forbidden) {
    for (std::size_t b = 0; b < p; ++b) {
      if (g.undirected(*forbidden, b)) g.orient(b, *forbidden);
    }
  }
  apply_meek(g, forbidden);
  break_cycles(g, nodes);
  return to_graph(g, nodes);
}

CausalGraph pc_stable(const Matrix& data, std::span<const std::string> names,
                      const std::optional<std::set<NodePair>>& allowed, const PcConfig& config) {
  if (names.size() != data.cols()) throw ValidationError("node name count does not match the data width");
  const auto ord = order_by_name(names);
  std::vector<std::string> nodes;
  for (std::size_t j : ord) nodes.push_back(names[j]);
  const Matrix canon = data.select_cols(ord);
  const CorrelationMatrix corr(canon, nodes);
  const std::size_t p = nodes.size();

  std::vector<char> adj(p * p, 0);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a + 1; b < p; ++b) {
      const bool ok = !allowed || allowed->count(make_pair(nodes[a], nodes[b])) > 0;
      adj[a * p + b] = adj[b * p + a] = ok ? 1 : 0;
    }
  }
  std::map<NodePair, std::vector<std::string>> sepsets;

  for (int level = 0; level <= config.test.max_condition_size; ++level) {
    const std::vector<char> snapshot = adj;
    auto neighbors = [&](std::size_t x, std::size_t exclude) {
      std::vector<std::size_t> out;
      for (std::size_t k = 0; k < p; ++k) {
        if (k != exclude && snapshot[x * p + k]) out.push_back(k);
      }
      return out;
    };
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = a + 1; b < p; ++b) {
        if (snapshot[a * p + b]) pairs.emplace_back(a, b);
      }
    }
    struct Outcome {
      bool remove = false;
      std::vector<std::size_t> sepset;
    };
    std::vector<Outcome> outcomes(pairs.size());
    run_tasks(pairs.size(), config.workers, [&](std::size_t t) {
      const auto [a, b] = pairs[t];
      for (const auto& pool : {neighbors(a, b), neighbors(b, a)}) {
        if (pool.size() < static_cast<std::size_t>(level)) continue;
        std::vector<std::size_t> pick(static_cast<std::size_t>(level));
        std::iota(pick.begin(), pick.end(), 0);
        do {
          std::vector<std::size_t> s;
          for (std::size_t k : pick) s.push_back(pool[k]);
          if (ci_test(corr, a, b, s, config.test).independent) {
            outcomes[t] = {true, s};
            return;
          }
        } while (!pick.empty() && next_combination(pick, pool.size()));
      }
    });
    for (std::size_t t = 0; t < pairs.size(); ++t) {
      if (!outcomes[t].remove) continue;
      const auto [a, b] = pairs[t];
      adj[a * p + b] = adj[b * p + a] = 0;
      std::vector<std::string> s;
      for (std::size_t k : outcomes[t].sepset) s.push_back(nodes[k]);
      std::sort(s.begin(), s.end());
      sepsets[make_pair(nodes[a], nodes[b])] = std::move(s);
    }
    bool deeper = false;
    for (std::size_t a = 0; a < p && !deeper; ++a) {
      std::size_t degree = 0;
      for (std::size_t k = 0; k < p; ++k) degree += adj[a * p + k];
      if (degree >= static_cast<std::size_t>(level) + 2) deeper = true;
    }
    if (!deeper) break;
  }

  std::set<NodePair> skeleton;
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a + 1; b < p; ++b) {
      if (adj[a * p + b]) skeleton.insert({nodes[a], nodes[b]});
    }
  }
  CausalGraph g = orient(nodes, skeleton, sepsets, config.forbid_out_of);
  g.sepsets = std::move(sepsets);
  return g;
}

std::vector<std::string> select_causal_features(std::span<const explain::RankedColumn> first,
                                                std::span<const explain::RankedColumn> second,
                                                std::size_t k,
                                                const std::map<std::string, std::string>& source_of) {
  std::vector<std::string> out;
  auto take = [&](std::span<const explain::RankedColumn> ranking, std::string_view label) {
    std::vector<std::string> chosen;
    for (const auto& r : ranking) {
      if (chosen.size() == k) break;
      const auto it = source_of.find(r.column);
      const std::string feature = it == source_of.end() ? r.column : it->second;
      if (std::find(chosen.begin(), chosen.end(), feature) == chosen.end()) chosen.push_back(feature);
    }
    if (chosen.size() < k) {
      warn(std::string(label) + " ranking offers " + std::to_string(chosen.size()) +
           " features; k clamped from " + std::to_string(k));
    }
    for (auto& f : chosen) {
      if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(std::move(f));
    }
  };
  take(first, "first");
  take(second, "second");
  return out;
}

void write_edge_list(const std::filesystem::path& path, const CausalGraph& graph,
                     std::string_view header_comment) {
  std::ostringstream out;
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "# nodes:";
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) out << (i ? "," : " ") << graph.nodes[i];
  out << '\n';
  for (const auto& e : graph.edges) {
    out << e.from << (e.directed ? " -> " : " -- ") << e.to << '\n';
  }
  std::ofstream file(path);
  file << out.str();
  if (!file) throw IoError("cannot write edge list " + path.string());
}

CausalGraph read_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge list " + path.string());
  CausalGraph g;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# nodes:", 0) == 0) {
      std::string rest = line.substr(8);
      if (!rest.empty() && rest[0] == ' ') rest.erase(0, 1);
      std::stringstream ss(rest);
      std::string node;
      while (std::getline(ss, node, ',')) {
        if (!node.empty()) g.nodes.push_back(node);
      }
      continue;
    }
    if (line[0] == '#') continue;
    for (const std::string mark : {" -> ", " -- "}) {
      const auto pos = line.find(mark);
      if (pos == std::string::npos) continue;
      g.edges.push_back({line.substr(0, pos), line.substr(pos + mark.size()), mark == " -> "});
      break;
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

}  // namespace ipsrs::causal
