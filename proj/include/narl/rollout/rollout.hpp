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

#ifndef NARL_ROLLOUT_ROLLOUT_HPP_
#define NARL_ROLLOUT_ROLLOUT_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "narl/noise/noise.hpp"
#include "narl/policy/policy.hpp"

namespace narl::rollout {

struct StepRecord {
  env::Observation observation;  // latest observation before acting (Silence if none)
  std::vector<env::Action> candidates;
  std::vector<policy::FeatureVector> features;  // parallel to candidates
  std::size_t chosen = 0;
  double logprob = 0.0;  // behavior policy, temperature 1
};

struct Trajectory {
  std::string task_id;
  std::vector<StepRecord> steps;
  int reward = 0;
  bool terminated = false;  // Finish issued (otherwise the turn limit hit)
  std::optional<noise::NoiseRealization> realization;  // absent: clean
  std::size_t user_turns = 0;  // scripted user messages delivered

  bool clean() const { return !realization.has_value(); }
  std::size_t length() const { return steps.size(); }
  std::string noise_tag() const;  // "clean" or "<category>@<level>"
};

// Per-category noisy rollout counts, indexed in taxonomy order.
using Allocation = std::array<int, noise::kTaxonomy.size()>;
// Per-category difficulty levels, taxonomy order.
using Levels = std::array<int, noise::kTaxonomy.size()>;

inline constexpr double kMaxNoiseFraction = 0.5;

struct RolloutGroup {
  std::string task_id;
  std::vector<Trajectory> trajectories;
  std::vector<std::size_t> clean;
  std::array<std::vector<std::size_t>, noise::kTaxonomy.size()> noisy;  // by category

  std::vector<std::size_t> noisy_pooled() const;  // ascending
  std::size_t noise_count() const;
};

struct EpisodeOptions {
  double temperature = 1.0;
  int max_turns = 0;  // 0: the task's turn budget
};

// One episode. The policy acts at every agent turn; user-side noise is
// applied to the script before the episode, tool-side noise to every ok
// tool result. Deterministic in `seed`.
Trajectory run_episode(const policy::PolicyParams& params, const policy::FeatureLayout& layout,
                       const env::DomainGraph& domain, const env::SynthesizedTask& task,
                       const std::optional<noise::NoiseSpec>& noise, std::uint64_t seed,
                       const EpisodeOptions& options = {});

// N rollouts on one task: N - sum(allocation) clean, then the noisy ones with
// categories assigned round-robin over the allocation in taxonomy order.
// Rejects allocations above N or above the 50% cap.
RolloutGroup run_group(const policy::PolicyParams& params, const policy::FeatureLayout& layout,
                       const env::DomainGraph& domain, const env::SynthesizedTask& task, int n,
                       const Allocation& allocation, const Levels& levels, std::uint64_t seed,
                       const EpisodeOptions& options = {});

// Log-probabilities of the recorded choices under `params`, from the stored
// candidate features; the environment is not re-run.
std::vector<double> replay_logprobs(const policy::PolicyParams& params, const Trajectory& trajectory);

// One JSONL record. Features are large and omitted unless asked for.
nlohmann::json to_json(const Trajectory& t, bool include_features = false);

}  // namespace narl::rollout

#endif  // NARL_ROLLOUT_ROLLOUT_HPP_
