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

#ifndef NARL_OPTIM_OPTIM_HPP_
#define NARL_OPTIM_OPTIM_HPP_

#include <string>
#include <vector>

#include <json.hpp>

#include "narl/policy/policy.hpp"
#include "narl/rollout/rollout.hpp"

namespace narl::optim {

enum class RatioMode { kPerStep, kSequence };
enum class Aggregation { kTokenMean, kSeqMeanTokenMean };

std::string name(RatioMode m);
std::string name(Aggregation a);
RatioMode ratio_mode_from_name(const std::string& s);
Aggregation aggregation_from_name(const std::string& s);

struct ObjectiveConfig {
  double clip_lo = 0.2;
  double clip_hi = 0.28;
  RatioMode ratio_mode = RatioMode::kSequence;
  Aggregation aggregation = Aggregation::kSeqMeanTokenMean;
  double ratio_cap = 3.0;
  int ppo_epochs = 1;
  int reuse_epochs = 2;

  void validate() const;  // throws ConfigError
};

// Loss presets: "grpo" (symmetric clip, per-step ratios, token mean, cap 10),
// "gspo" and "hybrid" (asymmetric clip, sequence ratio, seq-mean-token-mean, cap 3).
ObjectiveConfig preset(const std::string& name);

// (r - mean) / population std. Throws DegenerateGroupError on zero variance
// and PreconditionError on fewer than two rewards.
std::vector<double> normalize_advantages(const std::vector<double>& rewards);

enum class Subset { kClean, kNoise };

struct AdvantageRecord {
  std::size_t trajectory = 0;
  Subset subset = Subset::kClean;
  double value = 0.0;
};

// Clean and pooled-noisy subsets normalized separately. Subsets with fewer
// than two members or zero variance contribute nothing.
std::vector<AdvantageRecord> groupwise_advantages(const rollout::RolloutGroup& group);

// One normalization over the whole group, ignoring the partition.
std::vector<AdvantageRecord> plain_advantages(const rollout::RolloutGroup& group);

struct FilterReport {
  int all_pass = 0;
  int all_fail = 0;
  int retained = 0;
};

// Indices of groups whose rewards are not all equal.
std::vector<std::size_t> filter_degenerate(const std::vector<rollout::RolloutGroup>& groups, FilterReport* report = nullptr);

// Per-step or sequence ratios, each capped at `cap`. Throws NumericError
// naming the step if a ratio is not finite.
std::vector<double> importance_ratio(const std::vector<double>& new_logprobs, const std::vector<double>& old_logprobs,
                                     RatioMode mode, double cap);

double clipped_surrogate(double ratio, double advantage, double clip_lo, double clip_hi);

// d clipped_surrogate / d ratio: the advantage where the unclipped term is
// the minimum, zero where the clipped term is.
double clipped_surrogate_slope(double ratio, double advantage, double clip_lo, double clip_hi);

double aggregate_loss(const std::vector<std::vector<double>>& per_trajectory, Aggregation mode);

// A trajectory with its advantage, as fed to the surrogate.
struct WeightedTrajectory {
  const rollout::Trajectory* trajectory = nullptr;
  double advantage = 0.0;
  Subset subset = Subset::kClean;
};

std::vector<WeightedTrajectory> collect(const std::vector<rollout::RolloutGroup>& groups,
                                        const std::vector<std::size_t>& retained, bool partitioned);

struct SurrogateStats {
  double objective = 0.0;
  double mean_ratio = 0.0;
  double max_ratio = 0.0;
  double clip_fraction = 0.0;  // steps with zero slope (clipped or capped)
  std::size_t steps = 0;
};

// Surrogate objective J and its gradient w.r.t. the weights.
SurrogateStats surrogate(const std::vector<WeightedTrajectory>& batch, const policy::PolicyParams& params,
                         const ObjectiveConfig& config, std::vector<double>* gradient = nullptr);

struct UpdateDiagnostics {
  FilterReport filter;
  std::size_t trajectories = 0;
  std::size_t steps = 0;
  SurrogateStats first;  // at the behavior params
  SurrogateStats last;   // before the final Adam step
  double grad_norm = 0.0;
  int adam_steps = 0;
  struct SubsetStats {
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;
  } clean, noise;
  int degenerate_subsets = 0;  // non-empty subsets dropped (size 1 or zero variance)

  nlohmann::json to_json() const;
};

// filter_degenerate -> groupwise_advantages -> ratios -> clipped surrogate
// -> aggregation, ascended with Adam for ppo_epochs * reuse_epochs steps.
UpdateDiagnostics update_policy(const std::vector<rollout::RolloutGroup>& groups, policy::PolicyParams& params,
                                policy::OptimizerState& opt, const ObjectiveConfig& config);

// Same pipeline with plain whole-group normalization.
UpdateDiagnostics update_policy_plain(const std::vector<rollout::RolloutGroup>& groups, policy::PolicyParams& params,
                                      policy::OptimizerState& opt, const ObjectiveConfig& config);

}  // namespace narl::optim

#endif  // NARL_OPTIM_OPTIM_HPP_
