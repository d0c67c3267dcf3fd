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

#include "narl/curriculum/scheduler.hpp"

#include <cmath>

#include "narl/core/error.hpp"

namespace narl::curriculum {
namespace {

// Fractions are sums of frac_step; compare with slack for non-dyadic steps.
constexpr double kSlack = 1e-12;

}  // namespace

void SchedulerConfig::validate() const {
  if (!(cap > 0 && cap <= rollout::kMaxNoiseFraction + kSlack))
    throw ConfigError("scheduler.cap must lie in (0, 0.5]; noisy rollouts are capped at 50% of each group");
  if (!(frac_step > 0 && frac_step <= cap)) throw ConfigError("scheduler.frac_step must lie in (0, cap]");
  if (!(theta >= -1 && theta <= 1)) throw ConfigError("scheduler.theta must lie in [-1, 1]");
  if (window < 1) throw ConfigError("scheduler.window must be >= 1");
  if (probe_tasks < 4) throw ConfigError("scheduler.probe_tasks must be >= 4");
  if (probe_runs < 1) throw ConfigError("scheduler.probe_runs must be >= 1");
}

double SchedulerState::total_fraction() const {
  double s = 0.0;
  for (const auto& c : categories) s += c.frac;
  return s;
}

rollout::Levels SchedulerState::levels() const {
  rollout::Levels out{};
  for (std::size_t i = 0; i < kCategories; ++i) out[i] = categories[i].level;
  return out;
}

nlohmann::json SchedulerState::to_json() const {
  nlohmann::json cats = nlohmann::json::object();
  for (std::size_t i = 0; i < kCategories; ++i) {
    const auto& c = categories[i];
    cats[noise::name(noise::kTaxonomy[i])] = {{"level", c.level}, {"frac", c.frac}, {"deltas", c.deltas}};
  }
  return {{"config",
           {{"theta", config.theta},
            {"frac_step", config.frac_step},
            {"cap", config.cap},
            {"window", config.window},
            {"probe_tasks", config.probe_tasks},
            {"probe_runs", config.probe_runs}}},
          {"windows", windows},
          {"total_fraction", total_fraction()},
          {"categories", cats}};
}

SchedulerState SchedulerState::from_json(const nlohmann::json& j) {
  SchedulerState s;
  const auto& c = j.at("config");
  s.config.theta = c.at("theta");
  s.config.frac_step = c.at("frac_step");
  s.config.cap = c.at("cap");
  s.config.window = c.at("window");
  s.config.probe_tasks = c.at("probe_tasks");
  s.config.probe_runs = c.at("probe_runs");
  s.windows = j.at("windows");
  for (std::size_t i = 0; i < kCategories; ++i) {
    const auto& jc = j.at("categories").at(noise::name(noise::kTaxonomy[i]));
    s.categories[i].level = jc.at("level");
    s.categories[i].frac = jc.at("frac");
    s.categories[i].deltas = jc.at("deltas").get<std::vector<double>>();
  }
  return s;
}

SchedulerState initial_state(const SchedulerConfig& config) {
  config.validate();
  SchedulerState s;
  s.config = config;
  return s;
}

namespace {

double mean(const std::vector<int>& v) {
  double s = 0.0;
  for (int r : v) s += r;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

double compute_delta(const std::vector<int>& clean, const std::vector<int>& noisy) {
  if (clean.empty() || noisy.empty()) throw PreconditionError("compute_delta: both reward lists must be nonempty");
  return mean(clean) - mean(noisy);
}

namespace {

std::vector<int> run_setting(const policy::PolicyParams& params, const policy::FeatureLayout& layout,
                             const env::DomainGraph& domain, const std::vector<env::SynthesizedTask>& tasks,
                             const std::optional<noise::NoiseSpec>& spec, int runs, std::uint64_t seed,
                             double temperature) {
  std::vector<int> rewards;
  const std::uint64_t tag_c = spec ? 1 + noise::taxonomy_index(spec->category) : 0;
  for (std::size_t i = 0; i < tasks.size(); ++i)
    for (int r = 0; r < runs; ++r) {
      const auto s = derive_seed(seed, {tag_c, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(r)});
      rewards.push_back(rollout::run_episode(params, layout, domain, tasks[i], spec, s, {temperature, 0}).reward);
    }
  return rewards;
}

ProbeResult make_result(noise::Category c, int level, std::size_t tasks, int runs, std::vector<int> clean,
                        std::vector<int> noisy) {
  ProbeResult r;
  r.category = c;
  r.level = level;
  r.tasks = static_cast<int>(tasks);
  r.runs = runs;
  r.clean_rewards = std::move(clean);
  r.noisy_rewards = std::move(noisy);
  r.clean_rate = mean(r.clean_rewards);
  r.noisy_rate = mean(r.noisy_rewards);
  return r;
}

}  // namespace

ProbeResult probe(const policy::PolicyParams& params, const policy::FeatureLayout& layout,
                  const env::DomainGraph& domain, const std::vector<env::SynthesizedTask>& tasks,
                  const SchedulerState& state, noise::Category category, std::uint64_t seed,
                  const ProbeOptions& options) {
  if (tasks.size() < 4) throw PreconditionError("probe: need at least 4 probe tasks");
  const int runs = state.config.probe_runs;
  const int level = std::max(state.categories[noise::taxonomy_index(category)].level, 1);
  auto clean = run_setting(params, layout, domain, tasks, std::nullopt, runs, seed, options.temperature);
  auto noisy = run_setting(params, layout, domain, tasks, noise::make_spec(category, level), runs, seed,
                           options.temperature);
  return make_result(category, level, tasks.size(), runs, std::move(clean), std::move(noisy));
}

std::array<ProbeResult, kCategories> probe_all(const policy::PolicyParams& params, const policy::FeatureLayout& layout,
                                               const env::DomainGraph& domain,
                                               const std::vector<env::SynthesizedTask>& tasks,
                                               const SchedulerState& state, std::uint64_t seed,
                                               const ProbeOptions& options) {
  if (tasks.size() < 4) throw PreconditionError("probe: need at least 4 probe tasks");
  const int runs = state.config.probe_runs;
  const auto clean = run_setting(params, layout, domain, tasks, std::nullopt, runs, seed, options.temperature);
  std::array<ProbeResult, kCategories> out;
  for (std::size_t i = 0; i < kCategories; ++i) {
    const auto c = noise::kTaxonomy[i];
    const int level = std::max(state.categories[i].level, 1);
    auto noisy = run_setting(params, layout, domain, tasks, noise::make_spec(c, level), runs, seed, options.temperature);
    out[i] = make_result(c, level, tasks.size(), runs, clean, std::move(noisy));
  }
  return out;
}

SchedulerState schedule_step(const SchedulerState& state, const std::array<double, kCategories>& deltas) {
  SchedulerState next = state;
  const auto& cfg = state.config;
  for (std::size_t i = 0; i < kCategories; ++i) {
    auto& c = next.categories[i];
    c.deltas.push_back(deltas[i]);
    if (!(deltas[i] < cfg.theta)) continue;
    ++c.level;
    if (next.total_fraction() + cfg.frac_step <= cfg.cap + kSlack) c.frac += cfg.frac_step;
  }
  ++next.windows;
  if (next.total_fraction() > cfg.cap + kSlack) throw InvariantError("schedule_step: noise fraction exceeds the cap");
  return next;
}

SchedulerState schedule_step(const SchedulerState& state, const std::array<ProbeResult, kCategories>& probes) {
  std::array<double, kCategories> deltas{};
  for (std::size_t i = 0; i < kCategories; ++i) {
    if (probes[i].category != noise::kTaxonomy[i]) throw PreconditionError("schedule_step: probes out of taxonomy order");
    deltas[i] = probes[i].delta();
  }
  return schedule_step(state, deltas);
}

rollout::Allocation allocate_noise(const SchedulerState& state, int n) {
  if (n < 2) throw PreconditionError("allocate_noise: N must be >= 2");
  rollout::Allocation counts{};
  int total = 0;
  for (std::size_t i = 0; i < kCategories; ++i) {
    counts[i] = static_cast<int>(std::lround(state.categories[i].frac * n));
    total += counts[i];
  }
  const int limit = static_cast<int>(std::floor(state.config.cap * n + kSlack));
  while (total > limit) {
    for (std::size_t i = kCategories; i-- > 0 && total > limit;) {
      if (counts[i] == 0) continue;
      --counts[i];
      --total;
    }
  }
  if (total > n / 2) throw InvariantError("allocate_noise: allocation exceeds half the group");
  return counts;
}

}  // namespace narl::curriculum
