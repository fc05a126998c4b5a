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
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "ipsrs/causal.hpp"
#include "ipsrs/diagnostics.hpp"
#include "ipsrs/error.hpp"
#include "ipsrs/rng.hpp"
#include "support/dag.hpp"

using namespace ipsrs;
using namespace ipsrs::causal;

using namespace dagsim;

TEST_CASE("partial correlation matches the three-variable formula") {
  const Dag chain{{"x", "y", "z"}, {{0, 1}, {1, 2}, {0, 2}}};
  const Matrix data = simulate(chain, 3000, 11, 0.5);
  const std::vector<std::string> names{"x", "y", "z"};
  const CorrelationMatrix r(data, names);
  const double expected = (r(0, 2) - r(0, 1) * r(1, 2)) /
                          std::sqrt((1 - r(0, 1) * r(0, 1)) * (1 - r(1, 2) * r(1, 2)));
  const std::vector<std::size_t> s{1};
  const auto t = ci_test(r, 0, 2, s, {});
  CHECK(t.partial_correlation == doctest::Approx(expected).epsilon(1e-12));
  const double z = std::atanh(expected) * std::sqrt(3000.0 - 1 - 3);
  CHECK(t.p_value == doctest::Approx(std::erfc(std::abs(z) / std::sqrt(2.0))));
}

TEST_CASE("chain endpoints are independent given the middle node") {
  const Dag chain{{"x", "y", "z"}, {{0, 1}, {1, 2}}};
  const Matrix data = simulate(chain, 5000, 3);
  CITestConfig cfg;
  CHECK_FALSE(ci_test(data, 0, 2, std::vector<std::size_t>{}, cfg).independent);
  CHECK(ci_test(data, 0, 2, std::vector<std::size_t>{1}, cfg).independent);
}

TEST_CASE("collider parents become dependent given the child") {
  const Dag collider{{"x", "y", "z"}, {{0, 2}, {1, 2}}};
  const Matrix data = simulate(collider, 5000, 4);
  CITestConfig cfg;
  CHECK(ci_test(data, 0, 1, std::vector<std::size_t>{}, cfg).independent);
  CHECK_FALSE(ci_test(data, 0, 1, std::vector<std::size_t>{2}, cfg).independent);
}

TEST_CASE("test failure modes") {
  Matrix dup(50, 3);
  Rng rng(2);
  for (std::size_t i = 0; i < 50; ++i) {
    dup(i, 0) = rng.normal();
    dup(i, 1) = rng.normal();
    dup(i, 2) = dup(i, 1);
  }
  CHECK_THROWS_AS(ci_test(dup, 0, 1, std::vector<std::size_t>{2}, {}), SingularMatrixError);
  CHECK_THROWS_AS(ci_test(dup.select_rows(std::vector<std::size_t>{0, 1, 2, 3}), 0, 1,
                          std::vector<std::size_t>{2}, {}),
                  ValidationError);
  Matrix constant(10, 2, 1.0);
  CHECK_THROWS_AS(CorrelationMatrix(constant, std::vector<std::string>{"a", "b"}), ValidationError);
}

TEST_CASE("structure search recovers a collider and leaves a chain undirected") {
  const std::vector<std::string> names{"x", "y", "z"};
  const auto collider = pc_stable(simulate({names, {{0, 2}, {1, 2}}}, 4000, 5), names,
                                  std::nullopt, {});
  CHECK(collider.directed("x", "z"));
  CHECK(collider.directed("y", "z"));
  CHECK_FALSE(collider.adjacent("x", "y"));

  const auto chain = pc_stable(simulate({names, {{0, 1}, {1, 2}}}, 4000, 6), names, std::nullopt, {});
  CHECK(chain.undirected_count() == 2);
  CHECK(chain.directed_count() == 0);
  REQUIRE(chain.sepsets.count({"x", "z"}));
  CHECK(chain.sepsets.at({"x", "z"}) == std::vector<std::string>{"y"});
}

TEST_CASE("orientation of a true skeleton reproduces the equivalence class") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const Dag dag = random_dag(6, 0.45, seed);
    if (dag.edges.size() > 12) continue;
    const auto g = orient(dag.nodes, dag_skeleton(dag), dag_sepsets(dag));
    const std::set<Edge> got(g.edges.begin(), g.edges.end());
    CAPTURE(seed);
    CHECK(got == reference_cpdag(dag));
  }
}

TEST_CASE("structure search on large samples matches the equivalence class") {
  int exact = 0, total = 0;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const Dag dag = random_dag(6, 0.4, seed);
    const Matrix data = simulate(dag, 20000, seed);
    PcConfig cfg;
    cfg.test.alpha = 0.01;
    const auto g = pc_stable(data, dag.nodes, std::nullopt, cfg);
    const std::set<Edge> got(g.edges.begin(), g.edges.end());
    exact += got == reference_cpdag(dag);
    ++total;
  }
  CHECK(exact >= 8);
}

TEST_CASE("structure search ignores column order and worker count") {
  const Dag dag = random_dag(7, 0.35, 71);
  const Matrix data = simulate(dag, 3000, 71);
  const auto base = pc_stable(data, dag.nodes, std::nullopt, {});
  const std::vector<std::size_t> perm{4, 2, 6, 0, 5, 1, 3};
  std::vector<std::string> names;
  for (std::size_t j : perm) names.push_back(dag.nodes[j]);
  PcConfig four;
  four.workers = 4;
  const auto shuffled = pc_stable(data.select_cols(perm), names, std::nullopt, four);
  CHECK(base.edges == shuffled.edges);
  CHECK(base.sepsets == shuffled.sepsets);
}

TEST_CASE("edges are never oriented out of the forbidden node") {
  const std::vector<std::string> nodes{"a", "o", "z"};
  const std::set<NodePair> skeleton{{"a", "o"}, {"o", "z"}};
  const std::map<NodePair, std::vector<std::string>> sepsets{{{"a", "z"}, {"o"}}};
  const auto free = orient(nodes, skeleton, sepsets);
  CHECK(free.undirected_count() == 2);
  const auto g = orient(nodes, skeleton, sepsets, std::string("o"));
  CHECK(g.directed("a", "o"));
  CHECK(g.directed("z", "o"));
  CHECK_THROWS_AS(orient(nodes, skeleton, sepsets, std::string("q")), ValidationError);
}

TEST_CASE("conflicting collider proposals stay undirected") {
  // a - b - c - d with empty sepsets: b - c is proposed in both directions.
  const std::vector<std::string> nodes{"a", "b", "c", "d"};
  const std::set<NodePair> skeleton{{"a", "b"}, {"b", "c"}, {"c", "d"}};
  const std::map<NodePair, std::vector<std::string>> sepsets{
      {{"a", "c"}, {}}, {{"b", "d"}, {}}, {{"a", "d"}, {}}};
  const auto g = orient(nodes, skeleton, sepsets);
  CHECK(g.directed("a", "b"));
  CHECK(g.directed("d", "c"));
  CHECK(g.adjacent("b", "c"));
  CHECK_FALSE((g.directed("b", "c") && g.directed("c", "b")));
}

TEST_CASE("prefilter keeps strong pairs and drops independent ones") {
  Rng rng(8);
  const std::size_t n = 2000;
  Matrix x(n, 5);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 4; ++j) x(i, j) = rng.normal();
    x(i, 1) = 0.9 * x(i, 0) + std::sqrt(1 - 0.81) * x(i, 1);
    x(i, 4) = rng.bernoulli(1.0 / (1.0 + std::exp(-2.0 * x(i, 3)))) ? 1.0 : 0.0;
  }
  const std::vector<std::string> names{"a", "b", "c", "d", "e"};
  const auto allowed = mgm_prefilter(x, names);
  CHECK(allowed.count({"a", "b"}));
  CHECK(allowed.count({"d", "e"}));
  CHECK_FALSE(allowed.count({"a", "c"}));
  CHECK_FALSE(allowed.count({"b", "c"}));
  CHECK(default_prefilter_penalty(100, 1) == doctest::Approx(4.0 * std::sqrt(std::log(2.0) / 100)));
  Matrix constant = x;
  for (std::size_t i = 0; i < n; ++i) constant(i, 2) = 3.0;
  CHECK_THROWS_AS(mgm_prefilter(constant, names), ValidationError);
}

TEST_CASE("prefilter on independent columns allows nothing") {
  Rng rng(9);
  Matrix x(3000, 6);
  for (auto& v : x.data()) v = rng.normal();
  const std::vector<std::string> names{"a", "b", "c", "d", "e", "f"};
  CHECK(mgm_prefilter(x, names).empty());
}

TEST_CASE("causal feature selection unions the two top-k lists") {
  std::vector<explain::RankedColumn> first, second;
  for (int j = 0; j < 15; ++j) first.push_back({"s" + std::to_string(j), 1.0, j + 1});
  for (int j = 0; j < 12; ++j) second.push_back({"s" + std::to_string(j), 1.0, j + 1});
  for (int j = 0; j < 3; ++j) second.push_back({"t" + std::to_string(j), 1.0, 13 + j});
  // shared 12 + first-only 3 + second-only 3
  CHECK(select_causal_features(first, second, 15).size() == 18);

  std::vector<explain::RankedColumn> dummies{{"race_NHB", 2, 1}, {"race_Hispanic", 1.5, 2}, {"age", 1, 3}};
  const std::map<std::string, std::string> source{{"race_NHB", "race"}, {"race_Hispanic", "race"}};
  ScopedWarningCapture w;
  const auto picked = select_causal_features(dummies, dummies, 5, source);
  CHECK(picked == std::vector<std::string>{"race", "age"});
  CHECK(w.contains("clamped"));
}

TEST_CASE("edge list round trip") {
  CausalGraph g;
  g.nodes = {"age", "outcome", "smoke"};
  g.edges = {{"age", "outcome", true}, {"age", "smoke", false}};
  const auto path = std::filesystem::temp_directory_path() / "ipsrs_edges_test.txt";
  write_edge_list(path, g, "structure");
  const auto back = read_edge_list(path);
  CHECK(back.nodes == g.nodes);
  CHECK(back.edges == g.edges);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_edge_list(path), IoError);
}
