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

#ifndef NARL_EVAL_METRICS_HPP_
#define NARL_EVAL_METRICS_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "narl/rollout/rollout.hpp"

namespace narl::eval {

inline constexpr const char* kIdeal = "ideal";

struct EvalRecord {
  std::string task_id;
  std::vector<int> rewards;  // one per run
  std::string setting = kIdeal;
};

// Mean over tasks of the per-task success rate, in percent.
double avg_at_k(const std::vector<EvalRecord>& records);
// Percentage of tasks solved in at least one run.
double pass_at_k(const std::vector<EvalRecord>& records);

struct InteractionStats {
  std::size_t episodes = 0;
  double tool_calls = 0.0;  // mean ToolCall actions per episode
  double asks = 0.0;        // mean AskUser actions per episode
  double length = 0.0;      // mean agent actions per episode
};

InteractionStats interaction_stats(const std::vector<const rollout::Trajectory*>& trajectories);

struct SettingMetrics {
  std::string setting;
  double avg = 0.0;
  double pass = 0.0;
  int k = 0;
  std::size_t tasks = 0;
  std::optional<InteractionStats> stats;
};

struct MetricsReport {
  std::string label;  // policy or run name
  SettingMetrics ideal;
  std::vector<SettingMetrics> noisy;  // per category, in input order
  SettingMetrics pooled;              // all noisy records together
  double avg_gap() const { return ideal.avg - pooled.avg; }
  double pass_gap() const { return ideal.pass - pooled.pass; }

  nlohmann::json to_json() const;
  std::string to_text() const;  // aligned table, one row per setting
};

// Gaps are ideal minus noisy. Every noisy setting must cover the ideal task set.
MetricsReport robustness_report(const std::vector<EvalRecord>& ideal,
                                const std::map<std::string, std::vector<EvalRecord>>& noisy,
                                const std::string& label = {});

// Trained-vs-baseline rows: per setting Avg@k and Pass@k of each report and
// the difference (second minus first).
nlohmann::json comparison_json(const MetricsReport& baseline, const MetricsReport& candidate);
std::string comparison_text(const MetricsReport& baseline, const MetricsReport& candidate);

struct EvalSetting {
  std::string name = kIdeal;
  std::optional<noise::NoiseSpec> noise;
};

struct EvalResult {
  std::vector<EvalRecord> records;
  std::vector<rollout::Trajectory> trajectories;
};

// k runs per task at the given temperature; run r of task i uses a seed
// derived from (seed, setting, i, r).
EvalResult evaluate(const policy::PolicyParams& params, const policy::FeatureLayout& layout,
                    const env::DomainGraph& domain, const std::vector<env::SynthesizedTask>& tasks,
                    const EvalSetting& setting, int k, std::uint64_t seed, double temperature = 0.0);

}  // namespace narl::eval

#endif  // NARL_EVAL_METRICS_HPP_
