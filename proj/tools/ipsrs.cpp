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
// Command-line driver: one subcommand per pipeline stage, the full pipeline,
// and the feature-set comparison.
//
// Exit codes: 0 success, 2 config or usage error, 3 stage error.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ipsrs/error.hpp"
#include "ipsrs/pipeline/config.hpp"
#include "ipsrs/pipeline/pipeline.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kStageError = 3;

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> stage_input;
  std::optional<unsigned> workers;
};

void add_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "pipeline config (JSON)")->required();
  cmd->add_option("--out", o.out, "output directory (overrides paths.out)");
  cmd->add_option("--seed", o.seed, "global seed (overrides seed)");
  cmd->add_option("--stage-input", o.stage_input,
                  "directory holding upstream artifacts (default: the output directory)");
  cmd->add_option("--workers", o.workers, "worker threads (results do not depend on it)");
}

ipsrs::pipeline::PipelineConfig load(const Options& o) {
  auto config = ipsrs::pipeline::load_config(o.config);
  if (o.out) config.out = *o.out;
  if (o.seed) config.seed = *o.seed;
  if (o.stage_input) config.stage_input = std::filesystem::path(*o.stage_input);
  if (o.workers) config.workers = *o.workers;
  ipsrs::pipeline::validate_paths(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace ipsrs::pipeline;
  CLI::App app{"ipsrs: fairness-aware clinical risk scoring pipeline"};
  app.require_subcommand(1);
  Options options;

  std::vector<std::pair<CLI::App*, Stage>> stage_commands;
  for (Stage s : kStages) {
    auto* cmd = app.add_subcommand(std::string(to_string(s)), "run the " +
                                                                  std::string(to_string(s)) +
                                                                  " stage");
    add_options(cmd, options);
    stage_commands.emplace_back(cmd, s);
  }
  auto* pipeline_cmd = app.add_subcommand("pipeline", "run every stage and write report.json");
  add_options(pipeline_cmd, options);
  auto* compare_cmd = app.add_subcommand(
      "compare-feature-sets", "test AUROC of both model families on each feature set");
  add_options(compare_cmd, options);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  PipelineConfig config;
  try {
    config = load(options);
  } catch (const ipsrs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (pipeline_cmd->parsed()) {
      Pipeline p(config);
      p.run_all();
      for (const auto& t : p.timings()) std::printf("%-11s %8.3f s\n", t.stage.c_str(), t.seconds);
      std::printf("report: %s\n", (config.out / "report.json").string().c_str());
      return 0;
    }
    if (compare_cmd->parsed()) {
      for (const auto& r : run_compare_feature_sets(config)) {
        std::printf("%-10s %-6s auroc=%.4f\n",
                    std::string(ipsrs::preprocess::to_string(r.feature_set)).c_str(),
                    r.family.c_str(), r.test_auroc);
      }
      return 0;
    }
    for (const auto& [cmd, stage] : stage_commands) {
      if (!cmd->parsed()) continue;
      Pipeline p(config);
      p.run(stage);
      std::printf("%s: done in %.3f s\n", std::string(to_string(stage)).c_str(),
                  p.timings().back().seconds);
    }
  } catch (const ipsrs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "stage error: " << e.what() << '\n';
    return kStageError;
  }
  return 0;
}
