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

#include "narl/core/error.hpp"
#include "narl/env/json_io.hpp"
#include "narl/exp/runner.hpp"

namespace narl::exp {

using nlohmann::json;

namespace {

struct Line {
  std::string label;
  std::string text;
};

// Minimal LCS line diff; emits only removed and added lines.
std::vector<std::string> diff_lines(const std::vector<Line>& a, const std::vector<Line>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> lcs(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = m; j-- > 0;)
      lcs[i][j] = a[i].text == b[j].text ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
  std::vector<std::string> out;
  std::size_t i = 0, j = 0;
  while (i < n || j < m) {
    if (i < n && j < m && a[i].text == b[j].text) {
      ++i;
      ++j;
    } else if (j < m && (i == n || lcs[i][j + 1] > lcs[i + 1][j])) {
      out.push_back("+ " + b[j].label + ": " + b[j].text);
      ++j;
    } else {
      out.push_back("- " + a[i].label + ": " + a[i].text);
      ++i;
    }
  }
  return out;
}

std::vector<Line> script_lines(const env::InteractionScript& s) {
  std::vector<Line> out;
  for (std::size_t i = 0; i < s.turns.size(); ++i)
    out.push_back({"turn " + std::to_string(i), env::to_json(s.turns[i]).dump()});
  for (const auto& [slot, msg] : s.clarification_table) out.push_back({"clarify " + slot, env::to_json(msg).dump()});
  return out;
}

std::vector<Line> replay_lines(const env::DomainGraph& domain, const env::SynthesizedTask& task,
                               const std::vector<env::Action>& actions, const env::ToolResultFilter* filter) {
  const env::EpisodeContext ctx{domain, task.task, task.task.interaction_script};
  auto e = env::make_env(task.initial);
  env::begin_episode(e, ctx);
  for (const auto& a : actions) {
    if (e.terminated) break;
    env::advance(e, a, ctx, filter);
  }
  std::vector<Line> out;
  for (std::size_t i = 0; i < e.history.size(); ++i)
    out.push_back({"step " + std::to_string(i) + " " + env::signature(e.history[i].action),
                   env::to_json(e.history[i].observation).dump()});
  return out;
}

}  // namespace

InjectResult run_inject(const env::DomainGraph& domain, const env::SynthesizedTask& task,
                        const noise::NoiseRealization& realization) {
  InjectResult r;
  r.realization = realization;
  const int clamped = noise::clamp_level(realization.spec.category, realization.spec.level, task.task);
  if (clamped != realization.spec.level) r.realization.spec = noise::make_spec(realization.spec.category, clamped);
  r.max_depth = task.task.turn_budget;

  r.verdict = noise::check_solvable(domain, task, r.realization, r.max_depth);
  if (r.realization.spec.side() == noise::Side::kUser) {
    const noise::PerturbContext pctx{domain, task.initial, task.task};
    auto up = noise::perturb_interaction(task.task.interaction_script, r.realization.spec, r.realization.seed, pctx);
    r.realization.draw_log = up.realization.draw_log;
    r.diff = diff_lines(script_lines(task.task.interaction_script), script_lines(up.script));
  } else {
    r.realization.draw_log = r.verdict.draw_log;
    if (r.verdict.solvable) {
      const noise::ToolNoise filter(domain, r.realization);
      const auto& w = r.verdict.oracle.witness;
      r.diff = diff_lines(replay_lines(domain, task, w, nullptr), replay_lines(domain, task, w, &filter));
    }
  }
  r.bound = task.task.chain_length() + 2 * r.verdict.anomalies + 1;
  return r;
}

json InjectResult::to_json() const {
  json witness = json::array();
  for (const auto& a : verdict.oracle.witness) witness.push_back(env::signature(a));
  return {{"realization", noise::to_json(realization)},
          {"diff", diff},
          {"verdict",
           {{"solvable", verdict.solvable},
            {"explored", verdict.oracle.explored},
            {"max_depth", max_depth},
            {"witness", witness},
            {"witness_length", verdict.oracle.witness.size()},
            {"anomalies", verdict.anomalies},
            {"bound", bound},
            {"within_bound", verdict.solvable && static_cast<int>(verdict.oracle.witness.size()) <= bound}}}};
}

std::string InjectResult::to_text() const {
  std::string out = "noise " + noise::name(realization.spec.category) + " level " +
                    std::to_string(realization.spec.level) + " seed " + std::to_string(realization.seed) + "\n";
  if (diff.empty()) {
    out += "diff: (none)\n";
  } else {
    out += "diff:\n";
    for (const auto& l : diff) out += "  " + l + "\n";
  }
  if (verdict.solvable) {
    out += "verdict: solvable in " + std::to_string(verdict.oracle.witness.size()) + " actions (bound " +
           std::to_string(bound) + ", anomalies " + std::to_string(verdict.anomalies) + ", explored " +
           std::to_string(verdict.oracle.explored) + " nodes)\n";
    out += "witness:";
    for (const auto& a : verdict.oracle.witness) out += " " + env::signature(a);
    out += "\n";
  } else {
    out += "verdict: UNSOLVABLE within " + std::to_string(max_depth) + " actions (explored " +
           std::to_string(verdict.oracle.explored) + " nodes)\n";
  }
  return out;
}

}  // namespace narl::exp
