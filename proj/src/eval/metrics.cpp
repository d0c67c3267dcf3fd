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

#include "narl/eval/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "narl/core/error.hpp"

namespace narl::eval {
namespace {

std::size_t common_k(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw PreconditionError("metrics: no records");
  const std::size_t k = records.front().rewards.size();
  if (k == 0) throw PreconditionError("metrics: record with no runs");
  for (const auto& r : records) {
    if (r.rewards.size() != k) throw PreconditionError("metrics: records disagree on k");
    for (int x : r.rewards)
      if (x != 0 && x != 1) throw PreconditionError("metrics: rewards must be binary");
  }
  return k;
}

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string pad(const std::string& s, std::size_t w, bool right = true) {
  if (s.size() >= w) return s;
  return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
}

SettingMetrics metrics_for(const std::string& setting, const std::vector<EvalRecord>& records) {
  SettingMetrics m;
  m.setting = setting;
  m.k = static_cast<int>(common_k(records));
  m.avg = avg_at_k(records);
  m.pass = pass_at_k(records);
  m.tasks = records.size();
  return m;
}

nlohmann::json metrics_json(const SettingMetrics& m) {
  nlohmann::json j{{"setting", m.setting}, {"avg_at_k", m.avg}, {"pass_at_k", m.pass}, {"k", m.k}, {"tasks", m.tasks}};
  if (m.stats)
    j["interaction"] = {{"episodes", m.stats->episodes},
                        {"tool_calls", m.stats->tool_calls},
                        {"asks", m.stats->asks},
                        {"length", m.stats->length}};
  return j;
}

}  // namespace

double avg_at_k(const std::vector<EvalRecord>& records) {
  const std::size_t k = common_k(records);
  // integer count, one division: exact for any table
  std::size_t hits = 0;
  for (const auto& r : records)
    for (int x : r.rewards) hits += static_cast<std::size_t>(x);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(k * records.size());
}

double pass_at_k(const std::vector<EvalRecord>& records) {
  common_k(records);
  std::size_t solved = 0;
  for (const auto& r : records)
    if (std::find(r.rewards.begin(), r.rewards.end(), 1) != r.rewards.end()) ++solved;
  return 100.0 * static_cast<double>(solved) / static_cast<double>(records.size());
}

InteractionStats interaction_stats(const std::vector<const rollout::Trajectory*>& trajectories) {
  if (trajectories.empty()) throw PreconditionError("interaction_stats: no trajectories");
  InteractionStats s;
  s.episodes = trajectories.size();
  for (const auto* t : trajectories) {
    for (const auto& step : t->steps) {
      const auto& a = step.candidates[step.chosen];
      if (std::holds_alternative<env::ToolCall>(a)) s.tool_calls += 1;
      if (std::holds_alternative<env::AskUser>(a)) s.asks += 1;
    }
    s.length += static_cast<double>(t->length());
  }
  const double n = static_cast<double>(s.episodes);
  s.tool_calls /= n;
  s.asks /= n;
  s.length /= n;
  return s;
}

MetricsReport robustness_report(const std::vector<EvalRecord>& ideal,
                                const std::map<std::string, std::vector<EvalRecord>>& noisy,
                                const std::string& label) {
  MetricsReport rep;
  rep.label = label;
  rep.ideal = metrics_for(kIdeal, ideal);
  std::multiset<std::string> ideal_tasks;
  for (const auto& r : ideal) ideal_tasks.insert(r.task_id);
  std::vector<EvalRecord> pooled;
  for (const auto& [setting, records] : noisy) {
    std::multiset<std::string> tasks;
    for (const auto& r : records) tasks.insert(r.task_id);
    if (tasks != ideal_tasks)
      throw PreconditionError("robustness_report: setting '" + setting + "' covers a different task set");
    rep.noisy.push_back(metrics_for(setting, records));
    pooled.insert(pooled.end(), records.begin(), records.end());
  }
  rep.pooled = pooled.empty() ? rep.ideal : metrics_for("noisy (pooled)", pooled);
  rep.pooled.setting = "noisy (pooled)";
  return rep;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& m : noisy) {
    auto j = metrics_json(m);
    j["avg_gap"] = ideal.avg - m.avg;
    j["pass_gap"] = ideal.pass - m.pass;
    rows.push_back(std::move(j));
  }
  return {{"label", label},
          {"ideal", metrics_json(ideal)},
          {"noisy", rows},
          {"pooled", metrics_json(pooled)},
          {"avg_gap", avg_gap()},
          {"pass_gap", pass_gap()}};
}

std::string MetricsReport::to_text() const {
  const std::string k = std::to_string(ideal.k);
  std::string out;
  if (!label.empty()) out += label + "\n";
  out += pad("setting", 24, false) + pad("Avg@" + k, 9) + pad("Pass@" + k, 9) + pad("gap Avg", 9) +
         pad("gap Pass", 10) + pad("tools", 7) + pad("asks", 6) + pad("len", 6) + "\n";
  auto row = [&](const SettingMetrics& m, bool gaps) {
    out += pad(m.setting, 24, false) + pad(fmt2(m.avg), 9) + pad(fmt2(m.pass), 9);
    out += gaps ? pad(fmt2(ideal.avg - m.avg), 9) + pad(fmt2(ideal.pass - m.pass), 10) : pad("-", 9) + pad("-", 10);
    if (m.stats) {
      out += pad(fmt2(m.stats->tool_calls), 7) + pad(fmt2(m.stats->asks), 6) + pad(fmt2(m.stats->length), 6);
    }
    out += "\n";
  };
  row(ideal, false);
  for (const auto& m : noisy) row(m, true);
  if (!noisy.empty()) row(pooled, true);
  return out;
}

namespace {

std::vector<std::pair<const SettingMetrics*, const SettingMetrics*>> paired(const MetricsReport& a,
                                                                            const MetricsReport& b) {
  std::vector<std::pair<const SettingMetrics*, const SettingMetrics*>> out{{&a.ideal, &b.ideal}};
  for (const auto& m : a.noisy)
    for (const auto& n : b.noisy)
      if (m.setting == n.setting) out.emplace_back(&m, &n);
  out.emplace_back(&a.pooled, &b.pooled);
  return out;
}

}  // namespace

nlohmann::json comparison_json(const MetricsReport& baseline, const MetricsReport& candidate) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [a, b] : paired(baseline, candidate))
    rows.push_back({{"setting", a->setting},
                    {"baseline_avg", a->avg},
                    {"candidate_avg", b->avg},
                    {"avg_diff", b->avg - a->avg},
                    {"baseline_pass", a->pass},
                    {"candidate_pass", b->pass},
                    {"pass_diff", b->pass - a->pass}});
  return {{"baseline", baseline.label}, {"candidate", candidate.label}, {"rows", rows}};
}

std::string comparison_text(const MetricsReport& baseline, const MetricsReport& candidate) {
  const std::string k = std::to_string(baseline.ideal.k);
  const std::string a = baseline.label.empty() ? "baseline" : baseline.label;
  const std::string b = candidate.label.empty() ? "candidate" : candidate.label;
  std::string out = pad("setting", 24, false) + pad(a + " Avg@" + k, 22) + pad(b + " Avg@" + k, 22) + pad("diff", 8) +
                    pad(a + " Pass@" + k, 22) + pad(b + " Pass@" + k, 22) + pad("diff", 8) + "\n";
  for (const auto& [x, y] : paired(baseline, candidate))
    out += pad(x->setting, 24, false) + pad(fmt2(x->avg), 22) + pad(fmt2(y->avg), 22) + pad(fmt2(y->avg - x->avg), 8) +
           pad(fmt2(x->pass), 22) + pad(fmt2(y->pass), 22) + pad(fmt2(y->pass - x->pass), 8) + "\n";
  return out;
}

EvalResult evaluate(const policy::PolicyParams& params, const policy::FeatureLayout& layout,
                    const env::DomainGraph& domain, const std::vector<env::SynthesizedTask>& tasks,
                    const EvalSetting& setting, int k, std::uint64_t seed, double temperature) {
  if (k < 1) throw PreconditionError("evaluate: k must be >= 1");
  EvalResult out;
  const std::uint64_t tag_s = hash_string(setting.name);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    EvalRecord rec{tasks[i].task.task_id, {}, setting.name};
    for (int r = 0; r < k; ++r) {
      const auto s = derive_seed(seed, {tag_s, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(r)});
      auto t = rollout::run_episode(params, layout, domain, tasks[i], setting.noise, s, {temperature, 0});
      rec.rewards.push_back(t.reward);
      out.trajectories.push_back(std::move(t));
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace narl::eval
