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

#ifndef NARL_POLICY_POLICY_HPP_
#define NARL_POLICY_POLICY_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "narl/core/rng.hpp"
#include "narl/env/env.hpp"
#include "narl/env/knowledge.hpp"

namespace narl::policy {

using FeatureVector = std::vector<double>;

// Named feature slots for one domain. The dimension is fixed once the tool
// set is known.
class FeatureLayout {
 public:
  explicit FeatureLayout(const env::DomainGraph& domain);

  std::size_t dim() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t index(const std::string& name) const;  // throws PreconditionError if absent
  std::size_t tool_index(const std::string& tool) const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::size_t tool_offset_ = 0;
  std::vector<std::string> tools_;
};

// Feature vector of one candidate. `k` must have been built from `env`.
FeatureVector featurize(const FeatureLayout& layout, const env::Knowledge& k, const env::EnvState& env,
                        const env::Action& candidate, const env::EpisodeContext& ctx);

std::vector<FeatureVector> featurize_all(const FeatureLayout& layout, const env::Knowledge& k,
                                         const env::EnvState& env, const std::vector<env::Action>& candidates,
                                         const env::EpisodeContext& ctx);

struct PolicyParams {
  std::vector<double> weights;
  std::uint64_t version = 0;
};

// Small Gaussian weights, N(0, scale^2).
PolicyParams init_params(std::size_t dim, std::uint64_t seed, double scale = 0.01);

double score(const PolicyParams& params, const FeatureVector& phi);

// Log-softmax of the dot-product scores.
std::vector<double> action_logprobs(const PolicyParams& params, const std::vector<FeatureVector>& candidates);

struct Sample {
  std::size_t index = 0;
  double logprob = 0.0;  // temperature-1 log-probability of the chosen action
};

// Temperature 0: argmax, lowest index on ties. Otherwise samples
// proportionally to exp(logprob / temperature).
Sample sample_action(const std::vector<double>& logprobs, double temperature, Rng& rng);

// d log pi(chosen) / d weights = phi_chosen - sum_a pi_a phi_a.
std::vector<double> logprob_gradient(const PolicyParams& params, const std::vector<FeatureVector>& candidates,
                                     std::size_t chosen);

struct AdamConfig {
  double lr = 5e-2;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double clip_norm = 1.0;
};

struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  AdamConfig config;
};

OptimizerState make_optimizer(std::size_t dim, const AdamConfig& config = {});

struct AdamDiagnostics {
  double grad_norm = 0.0;  // before clipping
  bool clipped = false;
};

// One bias-corrected Adam ascent step on an objective gradient, after
// clipping the gradient to config.clip_norm. Throws NumericError and leaves
// everything untouched if the gradient has a non-finite entry.
AdamDiagnostics adam_update(OptimizerState& state, PolicyParams& params, const std::vector<double>& gradient);

// Checkpoints: JSON with format tag, feature dimension, feature names,
// version and weights.
nlohmann::json checkpoint_to_json(const PolicyParams& params, const FeatureLayout& layout);
PolicyParams checkpoint_from_json(const nlohmann::json& j, std::size_t expected_dim);
void save_checkpoint(const std::string& path, const PolicyParams& params, const FeatureLayout& layout);
PolicyParams load_checkpoint(const std::string& path, std::size_t expected_dim);

}  // namespace narl::policy

#endif  // NARL_POLICY_POLICY_HPP_
