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

#include "narl/rollout/rollout.hpp"

#include <numeric>

#include "narl/core/error.hpp"
#include "narl/env/json_io.hpp"

namespace narl::rollout {

std::string Trajectory::noise_tag() const {
  if (!realization) return "clean";
  return noise::name(realization->spec.category) + "@" + std::to_string(realization->spec.level);
}

std::vector<std::size_t> RolloutGroup::noisy_pooled() const {
  std::vector<std::size_t> out;
  for (const auto& v : noisy) out.insert(out.end(), v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t RolloutGroup::noise_count() const {
  std::size_t n = 0;
  for (const auto& v : noisy) n += v.size();
  return n;
}

Trajectory run_episode(const policy::PolicyParams& params, const policy::FeatureLayout& layout,
                       const env::DomainGraph& domain, const env::SynthesizedTask& task,
                       const std::optional<noise::NoiseSpec>& noise, std::uint64_t seed,
                       const EpisodeOptions& options) {
  if (options.max_turns < 0) throw PreconditionError("run_episode: max_turns must be >= 1 (0 means the task budget)");
  const int max_turns = options.max_turns > 0 ? options.max_turns : task.task.turn_budget;
  if (max_turns < 1) throw PreconditionError("run_episode: max_turns must be >= 1");

  Trajectory traj;
  traj.task_id = task.task.task_id;
  const std::uint64_t noise_seed = derive_seed(seed, {tag(Stream::kNoise)});
  Rng rng(derive_seed(seed, {tag(Stream::kRollout)}));

  env::InteractionScript script = task.task.interaction_script;
  std::optional<noise::ToolNoise> filter;
  if (noise) {
    noise::NoiseSpec spec = *noise;
    if (spec.side() == noise::Side::kUser) {
      spec = noise::make_spec(spec.category, noise::clamp_level(spec.category, spec.level, task.task));
      auto perturbed = noise::perturb_interaction(script, spec, noise_seed,
                                                  noise::PerturbContext{domain, task.initial, task.task});
      script = std::move(perturbed.script);
      traj.realization = std::move(perturbed.realization);
    } else {
      filter.emplace(domain, spec, noise_seed);
      traj.realization = noise::NoiseRealization{spec, noise_seed, {}, {}};
    }
  }

  const env::EpisodeContext ctx{domain, task.task, script};
  env::EnvState state = env::make_env(task.initial);
  env::begin_episode(state, ctx);
  const env::ToolResultFilter* f = filter ? &*filter : nullptr;

  while (!state.terminated && state.turn_index < static_cast<std::size_t>(max_turns)) {
    const env::Knowledge k = env::build_knowledge(state, ctx);
    StepRecord rec;
    rec.observation = env::last_observation(state).value_or(env::Observation{env::Silence{}});
    rec.candidates = env::enumerate_actions(k, ctx);
    rec.features = policy::featurize_all(layout, k, state, rec.candidates, ctx);
    const auto lp = policy::action_logprobs(params, rec.features);
    const auto pick = policy::sample_action(lp, options.temperature, rng);
    rec.chosen = pick.index;
    rec.logprob = pick.logprob;
    if (!(rec.logprob <= 0.0))
      throw InvariantError("run_episode: invalid stored log-probability at step " +
                           std::to_string(traj.steps.size()) + " of task " + traj.task_id);
    env::advance(state, rec.candidates[rec.chosen], ctx, f);
    traj.steps.push_back(std::move(rec));
  }
  traj.terminated = state.terminated;
  traj.reward = env::verify(state, task.task);
  traj.user_turns = state.user_log.size();
  if (filter) traj.realization->draw_log = state.pending_noise.draw_log;
  return traj;
}

RolloutGroup run_group(const policy::PolicyParams& params, const policy::FeatureLayout& layout,
                       const env::DomainGraph& domain, const env::SynthesizedTask& task, int n,
                       const Allocation& allocation, const Levels& levels, std::uint64_t seed,
                       const EpisodeOptions& options) {
  if (n < 1) throw PreconditionError("run_group: N must be >= 1");
  int total = 0;
  for (int c : allocation) {
    if (c < 0) throw PreconditionError("run_group: negative allocation");
    total += c;
  }
  if (total > n)
    throw PreconditionError("run_group: allocation of " + std::to_string(total) + " exceeds N = " + std::to_string(n));
  if (static_cast<double>(total) > kMaxNoiseFraction * n)
    throw PreconditionError("run_group: allocation of " + std::to_string(total) + " exceeds the noise cap of " +
                            std::to_string(kMaxNoiseFraction) + " * N");

  RolloutGroup group;
  group.task_id = task.task.task_id;
  const int clean = n - total;
  std::vector<std::optional<noise::NoiseSpec>> plan(static_cast<std::size_t>(clean));
  Allocation left = allocation;
  for (int assigned = 0; assigned < total;) {
    for (std::size_t c = 0; c < left.size(); ++c) {
      if (left[c] == 0) continue;
      --left[c];
      ++assigned;
      plan.emplace_back(noise::make_spec(noise::kTaxonomy[c], levels[c]));
    }
  }
  for (std::size_t i = 0; i < plan.size(); ++i) {
    group.trajectories.push_back(
        run_episode(params, layout, domain, task, plan[i], derive_seed(seed, {static_cast<std::uint64_t>(i)}), options));
    if (plan[i]) {
      group.noisy[noise::taxonomy_index(plan[i]->category)].push_back(i);
    } else {
      group.clean.push_back(i);
    }
  }
  if (group.clean.size() + group.noise_count() != group.trajectories.size())
    throw InvariantError("run_group: partition does not cover the group");
  return group;
}

std::vector<double> replay_logprobs(const policy::PolicyParams& params, const Trajectory& trajectory) {
  std::vector<double> out;
  out.reserve(trajectory.steps.size());
  for (const auto& s : trajectory.steps) out.push_back(policy::action_logprobs(params, s.features)[s.chosen]);
  return out;
}

nlohmann::json to_json(const Trajectory& t, bool include_features) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps) {
    nlohmann::json js{{"observation", env::to_json(s.observation)},
                      {"action", env::signature(s.candidates[s.chosen])},
                      {"chosen", s.chosen},
                      {"candidates", s.candidates.size()},
                      {"logprob", s.logprob}};
    if (include_features) {
      nlohmann::json cands = nlohmann::json::array();
      for (const auto& a : s.candidates) cands.push_back(env::to_json(a));
      js["candidates"] = std::move(cands);
      js["features"] = s.features;
    }
    steps.push_back(std::move(js));
  }
  nlohmann::json j{{"task_id", t.task_id},   {"noise_tag", t.noise_tag()}, {"reward", t.reward},
                   {"terminated", t.terminated}, {"length", t.length()},     {"user_turns", t.user_turns},
                   {"steps", std::move(steps)}};
  if (t.realization) j["realization"] = noise::to_json(*t.realization);
  return j;
}

}  // namespace narl::rollout
