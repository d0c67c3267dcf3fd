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

#include <map>

#include "narl/core/error.hpp"
#include "narl/core/rng.hpp"
#include "narl/exp/runner.hpp"

namespace narl::exp {

using nlohmann::json;

namespace {

constexpr const char* kFootnote =
    "tools, asks and len are mean tool calls, AskUser actions and agent actions per episode; "
    "they replace token counts, which this policy does not produce.";

json stats_json(const eval::InteractionStats& s) {
  return {{"episodes", s.episodes}, {"tool_calls", s.tool_calls}, {"asks", s.asks}, {"length", s.length}};
}

eval::InteractionStats stats_from_json(const json& j) {
  eval::InteractionStats s;
  s.episodes = j.at("episodes");
  s.tool_calls = j.at("tool_calls");
  s.asks = j.at("asks");
  s.length = j.at("length");
  return s;
}

eval::InteractionStats merge(const std::vector<eval::InteractionStats>& parts) {
  eval::InteractionStats out;
  for (const auto& p : parts) {
    const double n = static_cast<double>(p.episodes);
    out.episodes += p.episodes;
    out.tool_calls += p.tool_calls * n;
    out.asks += p.asks * n;
    out.length += p.length * n;
  }
  if (out.episodes) {
    const double n = static_cast<double>(out.episodes);
    out.tool_calls /= n;
    out.asks /= n;
    out.length /= n;
  }
  return out;
}

}  // namespace

std::vector<eval::EvalSetting> default_settings(const ExperimentConfig& config) {
  std::vector<eval::EvalSetting> out{eval::EvalSetting{}};
  for (auto c : config.eval.categories) out.push_back({noise::name(c), noise::make_spec(c, config.eval.level)});
  return out;
}

eval::MetricsReport report_from_eval_doc(const json& doc) {
  std::vector<eval::EvalRecord> ideal;
  std::map<std::string, std::vector<eval::EvalRecord>> noisy;
  std::map<std::string, eval::InteractionStats> stats;
  bool have_ideal = false;
  for (const auto& s : doc.at("settings")) {
    const std::string name = s.at("name");
    std::vector<eval::EvalRecord> recs;
    for (const auto& r : s.at("records")) recs.push_back({r.at("task_id"), r.at("rewards").get<std::vector<int>>(), name});
    if (s.contains("interaction")) stats[name] = stats_from_json(s.at("interaction"));
    if (name == eval::kIdeal) {
      ideal = std::move(recs);
      have_ideal = true;
    } else {
      noisy[name] = std::move(recs);
    }
  }
  if (!have_ideal) throw ConfigError("eval document has no ideal setting");
  auto rep = eval::robustness_report(ideal, noisy, doc.value("label", ""));
  if (stats.count(eval::kIdeal)) rep.ideal.stats = stats[eval::kIdeal];
  std::vector<eval::InteractionStats> parts;
  for (auto& m : rep.noisy)
    if (stats.count(m.setting)) {
      m.stats = stats[m.setting];
      parts.push_back(*m.stats);
    }
  if (!parts.empty()) rep.pooled.stats = merge(parts);
  return rep;
}

std::string eval_text(const eval::MetricsReport& report) {
  std::string out = report.to_text();
  if (report.ideal.stats) out += std::string("note: ") + kFootnote + "\n";
  return out;
}

EvalOutput run_eval(const policy::PolicyParams& params, const ExperimentConfig& config,
                    const std::vector<eval::EvalSetting>& settings, int k, const std::string& label) {
  if (k < 1) throw ConfigError("eval: k must be >= 1");
  const Workspace ws = make_workspace(config);
  const policy::FeatureLayout layout(ws.domain);
  if (params.weights.size() != layout.dim())
    throw ConfigError("eval: policy dimension " + std::to_string(params.weights.size()) +
                      " does not match the domain's feature dimension " + std::to_string(layout.dim()));
  const std::uint64_t seed = derive_seed(config.seed, {tag(Stream::kEval)});

  std::vector<eval::EvalResult> results(settings.size());
  for (std::size_t i = 0; i < settings.size(); ++i)
    results[i] = eval::evaluate(params, layout, ws.domain, ws.eval, settings[i], k, seed, 0.0);

  json jsettings = json::array();
  for (std::size_t i = 0; i < settings.size(); ++i) {
    json recs = json::array();
    for (const auto& r : results[i].records) recs.push_back({{"task_id", r.task_id}, {"rewards", r.rewards}});
    std::vector<const rollout::Trajectory*> ptrs;
    for (const auto& t : results[i].trajectories) ptrs.push_back(&t);
    jsettings.push_back({{"name", settings[i].name},
                         {"noise", settings[i].noise ? noise::to_json(*settings[i].noise) : json(nullptr)},
                         {"records", recs},
                         {"interaction", stats_json(eval::interaction_stats(ptrs))}});
  }
  json doc{{"format", "narl-eval"}, {"label", label}, {"k", k}, {"temperature", 0.0}, {"settings", jsettings},
           {"footnote", kFootnote}};
  EvalOutput out{report_from_eval_doc(doc), {}};
  doc["report"] = out.report.to_json();
  out.doc = std::move(doc);
  return out;
}

EvalOutput run_eval(const std::string& checkpoint_path, const ExperimentConfig& config,
                    const std::vector<eval::EvalSetting>& settings, int k, const std::string& label) {
  const auto domain = env::build_domain(config.domain, derive_seed(config.seed, {tag(Stream::kDomain)}));
  const policy::FeatureLayout layout(domain);
  const auto params = policy::load_checkpoint(checkpoint_path, layout.dim());
  return run_eval(params, config, settings, k, label);
}

}  // namespace narl::exp
