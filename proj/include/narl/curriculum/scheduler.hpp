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

#ifndef NARL_CURRICULUM_SCHEDULER_HPP_
#define NARL_CURRICULUM_SCHEDULER_HPP_

#include <array>
#include <vector>

#include <json.hpp>

#include "narl/rollout/rollout.hpp"

namespace narl::curriculum {

inline constexpr std::size_t kCategories = noise::kTaxonomy.size();

struct SchedulerConfig {
  double theta = 0.05;
  double frac_step = 1.0 / 16.0;
  double cap = 0.5;  // rho_max
  int window = 5;    // iterations between probes
  int probe_tasks = 8;
  int probe_runs = 4;

  void validate() const;  // throws ConfigError
};

struct CategoryState {
  int level = 0;
  double frac = 0.0;
  std::vector<double> deltas;
};

struct SchedulerState {
  SchedulerConfig config;
  std::array<CategoryState, kCategories> categories;
  int windows = 0;  // schedule_step calls so far

  double total_fraction() const;
  rollout::Levels levels() const;
  nlohmann::json to_json() const;
  static SchedulerState from_json(const nlohmann::json& j);
};

SchedulerState initial_state(const SchedulerConfig& config);

// mean(clean) - mean(noisy). Throws PreconditionError on an empty list.
double compute_delta(const std::vector<int>& clean, const std::vector<int>& noisy);

struct ProbeResult {
  noise::Category category = noise::Category::kFailure;
  int level = 1;
  double clean_rate = 0.0;
  double noisy_rate = 0.0;
  int tasks = 0;
  int runs = 0;
  std::vector<int> clean_rewards;
  std::vector<int> noisy_rewards;

  double delta() const { return compute_delta(clean_rewards, noisy_rewards); }
};

struct ProbeOptions {
  double temperature = 0.0;
};

// Paired clean and noisy runs on each probe task, the noisy ones at level
// max(level_c, 1). Run r of task i uses a seed derived from (seed, i, r).
ProbeResult probe(const policy::PolicyParams& params, const policy::FeatureLayout& layout,
                  const env::DomainGraph& domain, const std::vector<env::SynthesizedTask>& tasks,
                  const SchedulerState& state, noise::Category category, std::uint64_t seed,
                  const ProbeOptions& options = {});

// All categories; the clean runs are executed once and shared.
std::array<ProbeResult, kCategories> probe_all(const policy::PolicyParams& params, const policy::FeatureLayout& layout,
                                               const env::DomainGraph& domain,
                                               const std::vector<env::SynthesizedTask>& tasks,
                                               const SchedulerState& state, std::uint64_t seed,
                                               const ProbeOptions& options = {});

// Escalates every category with delta < theta, in taxonomy order: level + 1
// always, frac + step unless that would push the total above the cap.
SchedulerState schedule_step(const SchedulerState& state, const std::array<double, kCategories>& deltas);
SchedulerState schedule_step(const SchedulerState& state, const std::array<ProbeResult, kCategories>& probes);

// round(frac_c * N), then trimmed one at a time in reverse taxonomy order
// until the total is at most floor(cap * N).
rollout::Allocation allocate_noise(const SchedulerState& state, int n);

}  // namespace narl::curriculum

#endif  // NARL_CURRICULUM_SCHEDULER_HPP_
