// Copyright 2026 The narl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NARL_EXP_CONFIG_HPP_
#define NARL_EXP_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "narl/curriculum/scheduler.hpp"
#include "narl/env/domain.hpp"
#include "narl/noise/noise.hpp"
#include "narl/optim/optim.hpp"
#include "narl/policy/policy.hpp"

namespace narl::exp {

enum class Variant { kGrpo, kGspo, kHybridCurriculum };

std::string name(Variant v);  // "grpo", "gspo", "hybrid-curriculum"
Variant variant_from_name(const std::string& s);  // throws ConfigError

// Environment variable that roots relative output directories.
inline constexpr const char* kOutputRootEnv = "NARL_OUTPUT_ROOT";

struct TaskCounts {
  int train = 300;
  int eval = 60;
  int min_chain = 2;
  int max_chain = 4;
};

struct EvalConfig {
  int k = 4;
  int level = 2;  // noisy settings
  std::vector<noise::Category> categories{noise::kTaxonomy.begin(), noise::kTaxonomy.end()};
};

struct ExperimentConfig {
  std::string name;  // run directory; defaults to "<variant>-s<seed>"
  std::uint64_t seed = 0;
  Variant variant = Variant::kHybridCurriculum;
  env::DomainSize domain;
  TaskCounts tasks;
  int rollouts_per_task = 16;  // N
  int batch_size = 8;          // tasks per iteration
  int iterations = 100;
  double temperature = 1.0;
  int workers = 1;
  policy::AdamConfig optimizer;
  optim::ObjectiveConfig objective;
  curriculum::SchedulerConfig scheduler;
  EvalConfig eval;
  bool log_features = false;
  std::string output_dir = "runs";

  void validate() const;  // throws ConfigError
};

// Strict parse: unknown keys are rejected with their JSON path. Absent keys
// take the defaults above; objective defaults come from the variant's preset.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
// Top-level keys of `overrides` replace those in the file before parsing.
ExperimentConfig load_config(const std::string& path, const nlohmann::json& overrides);
// Fully resolved form; config_from_json(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& c);
std::string config_hash(const ExperimentConfig& c);  // FNV-1a of the canonical dump, hex

// output_dir resolved against $NARL_OUTPUT_ROOT when relative, then joined
// with the run name.
std::string run_directory(const ExperimentConfig& c);

}  // namespace narl::exp

#endif  // NARL_EXP_CONFIG_HPP_
