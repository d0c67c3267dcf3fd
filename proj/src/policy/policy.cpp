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

#include "narl/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "narl/core/error.hpp"

namespace narl::policy {
namespace {

const char* const kTypes[] = {"read", "write", "ask", "finish"};
const char* const kObsClasses[] = {"user", "tool_ok", "tool_error"};

enum TypeIdx { kRead = 0, kWrite = 1, kAsk = 2, kFinish = 3 };

constexpr const char* kFormat = "narl-policy-checkpoint";
constexpr int kFormatVersion = 1;

}  // namespace

FeatureLayout::FeatureLayout(const env::DomainGraph& domain) {
  for (const char* t : kTypes) names_.push_back(std::string("type.") + t);
  tool_offset_ = names_.size();
  for (const auto& tool : domain.tools) {
    tools_.push_back(tool.name);
    names_.push_back("tool." + tool.name);
  }
  for (const char* oc : kObsClasses)
    for (const char* t : kTypes) names_.push_back(std::string("last.") + oc + "." + t);
  for (const char* n : {"turn.frac", "turn.frac.finish", "ground.known", "ground.goal", "ground.tool", "ground.last_obs",
                        "ground.recent", "ground.superseded", "ground.distractor", "ground.out_of_scope",
                        "ground.extra", "ground.list_last", "ground.list_nonlast", "ground.truncated",
                        "ground.contradicted", "ground.tainted", "ground.suspect", "call.repeat_ok",
                        "call.retry_error", "call.repeat_truncated", "call.record_read", "call.tool_ok_before",
                        "call.goal_kind", "write.intent", "write.done_before", "finish.write_done",
                        "finish.no_write", "finish.unrevealed", "finish.after_write", "ask.key_slot",
                        "ask.attr_slot"})
    names_.emplace_back(n);
  for (const char* t : kTypes) names_.push_back(std::string("revealed.") + t);
  for (std::size_t i = 0; i < names_.size(); ++i) by_name_[names_[i]] = i;
}

std::size_t FeatureLayout::index(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw PreconditionError("unknown feature " + name);
  return it->second;
}

std::size_t FeatureLayout::tool_index(const std::string& tool) const {
  auto it = std::find(tools_.begin(), tools_.end(), tool);
  if (it == tools_.end()) throw PreconditionError("tool " + tool + " not in feature layout");
  return tool_offset_ + static_cast<std::size_t>(it - tools_.begin());
}

namespace {

// Precomputed per-state quantities shared by all candidates.
struct StateSummary {
  int obs_class = -1;  // index into kObsClasses, -1 for none
  double turn_frac = 0.0;
  bool write_done = false;
  bool last_was_write_ok = false;
  bool unrevealed = false;
  double revealed_frac = 0.0;
  std::set<std::string> goal_kinds;
};

StateSummary summarize(const env::Knowledge& k, const env::EnvState& env, const env::EpisodeContext& ctx) {
  StateSummary s;
  switch (env::last_observation_class(env)) {
    case env::ObservationClass::kUser: s.obs_class = 0; break;
    case env::ObservationClass::kToolOk: s.obs_class = 1; break;
    case env::ObservationClass::kToolError: s.obs_class = 2; break;
    case env::ObservationClass::kNone: break;
  }
  const double budget = std::max(1, ctx.task.turn_budget);
  s.turn_frac = std::min(1.0, static_cast<double>(env.turn_index) / budget);
  for (const auto& name : k.tools_ok)
    if (!ctx.domain.tool(name)->read_only()) s.write_done = true;
  if (!env.history.empty()) {
    const auto& h = env.history.back();
    if (const auto* c = std::get_if<env::ToolCall>(&h.action)) {
      const auto* r = std::get_if<env::ToolResult>(&h.observation);
      s.last_was_write_ok = !ctx.domain.tool(c->tool)->read_only() && r != nullptr && r->ok();
    }
  }
  std::size_t revealed = 0;
  for (const auto& [slot, type] : ctx.task.slot_types) {
    s.goal_kinds.insert(type.kind);
    if (k.revealed_slots.count(slot)) ++revealed;
  }
  const std::size_t slots = ctx.task.slot_types.size();
  s.unrevealed = revealed < slots;
  s.revealed_frac = slots ? static_cast<double>(revealed) / static_cast<double>(slots) : 1.0;
  return s;
}

FeatureVector featurize_one(const FeatureLayout& layout, const env::Knowledge& k, const StateSummary& s,
                            const env::Action& a, const env::EpisodeContext& ctx) {
  FeatureVector phi(layout.dim(), 0.0);
  auto set = [&](const char* name, double v) { phi[layout.index(name)] = v; };

  int type = kFinish;
  const env::ToolSpec* tool = nullptr;
  const auto* call = std::get_if<env::ToolCall>(&a);
  if (call != nullptr) {
    tool = ctx.domain.tool(call->tool);
    if (tool == nullptr) throw PreconditionError("featurize: unknown tool " + call->tool);
    type = tool->read_only() ? kRead : kWrite;
  } else if (std::holds_alternative<env::AskUser>(a)) {
    type = kAsk;
  }
  phi[layout.index(std::string("type.") + kTypes[type])] = 1.0;
  if (s.obs_class >= 0)
    phi[layout.index(std::string("last.") + kObsClasses[s.obs_class] + "." + kTypes[type])] = 1.0;
  phi[layout.index(std::string("revealed.") + kTypes[type])] = s.revealed_frac;
  set("turn.frac", s.turn_frac);

  if (type == kFinish) {
    set("turn.frac.finish", s.turn_frac);
    set("finish.write_done", s.write_done ? 1.0 : 0.0);
    set("finish.no_write", s.write_done ? 0.0 : 1.0);
    set("finish.unrevealed", s.unrevealed ? 1.0 : 0.0);
    set("finish.after_write", s.last_was_write_ok ? 1.0 : 0.0);
    return phi;
  }
  if (type == kAsk) {
    const auto& slot = std::get<env::AskUser>(a).slot;
    auto it = ctx.task.slot_types.find(slot);
    if (it != ctx.task.slot_types.end()) {
      const auto* schema = ctx.domain.schema(it->second.kind);
      const bool key = schema != nullptr && schema->key_field == it->second.field;
      set(key ? "ask.key_slot" : "ask.attr_slot", 1.0);
    }
    return phi;
  }

  phi[layout.tool_index(tool->name)] = 1.0;
  const double n = static_cast<double>(call->grounding.size());
  double known = 0, goal = 0, from_tool = 0, last_obs = 0, recent = 0, superseded = 0, distractor = 0, oos = 0,
         extra = 0, list_last = 0, list_nonlast = 0, truncated = 0, contradicted = 0, tainted = 0;
  bool suspect = false;
  for (std::size_t i = 0; i < call->grounding.size(); ++i) {
    const auto& slot_type = tool->arg_slots[i].type;
    const auto* info = k.lookup(slot_type, call->grounding[i].second);
    if (info == nullptr) continue;
    known += 1;
    goal += info->goal;
    from_tool += info->tool_declared;
    last_obs += info->in_last_observation;
    superseded += info->superseded;
    distractor += info->distractor;
    oos += info->out_of_scope;
    extra += info->tool_extra;
    list_last += info->list_last;
    list_nonlast += info->list_nonlast;
    truncated += info->truncated_list;
    contradicted += info->contradicted;
    tainted += info->tainted;
    suspect = suspect || info->suspect();
    const auto& ranked = k.by_type.at(slot_type);
    const auto rank = static_cast<double>(std::find(ranked.begin(), ranked.end(), info) - ranked.begin());
    recent += 1.0 / (1.0 + rank);
  }
  if (n > 0) {
    set("ground.known", known / n);
    set("ground.goal", goal / n);
    set("ground.tool", from_tool / n);
    set("ground.last_obs", last_obs / n);
    set("ground.recent", recent / n);
    set("ground.superseded", superseded / n);
    set("ground.distractor", distractor / n);
    set("ground.out_of_scope", oos / n);
    set("ground.extra", extra / n);
    set("ground.list_last", list_last / n);
    set("ground.list_nonlast", list_nonlast / n);
    set("ground.truncated", truncated / n);
    set("ground.contradicted", contradicted / n);
    set("ground.tainted", tainted / n);
  }
  set("ground.suspect", suspect ? 1.0 : 0.0);

  if (auto it = k.calls.find(env::signature(*call)); it != k.calls.end()) {
    const auto& ci = it->second;
    set("call.repeat_ok", ci.ok_count > 0 && ci.last_ok && !ci.last_truncated ? 1.0 : 0.0);
    set("call.retry_error", !ci.last_ok ? 1.0 : 0.0);
    set("call.repeat_truncated", ci.last_ok && ci.last_truncated ? 1.0 : 0.0);
  }
  if (tool->role == env::ToolRole::kGet && k.records_read.count({tool->kind, call->grounding[0].second}))
    set("call.record_read", 1.0);
  set("call.tool_ok_before", k.tools_ok.count(tool->name) ? 1.0 : 0.0);
  set("call.goal_kind", s.goal_kinds.count(tool->kind) ? 1.0 : 0.0);
  if (type == kWrite) {
    const auto& eff = *tool->effect;
    const auto* vs = tool->slot(eff.value_slot);
    for (const auto& [slot, value] : call->grounding) {
      if (slot != eff.value_slot) continue;
      const auto* info = k.lookup(vs->type, value);
      set("write.intent", info != nullptr && info->goal ? 1.0 : 0.0);
    }
    set("write.done_before", s.write_done ? 1.0 : 0.0);
  }
  return phi;
}

}  // namespace

FeatureVector featurize(const FeatureLayout& layout, const env::Knowledge& k, const env::EnvState& env,
                        const env::Action& candidate, const env::EpisodeContext& ctx) {
  return featurize_one(layout, k, summarize(k, env, ctx), candidate, ctx);
}

std::vector<FeatureVector> featurize_all(const FeatureLayout& layout, const env::Knowledge& k,
                                         const env::EnvState& env, const std::vector<env::Action>& candidates,
                                         const env::EpisodeContext& ctx) {
  const StateSummary s = summarize(k, env, ctx);
  std::vector<FeatureVector> out;
  out.reserve(candidates.size());
  for (const auto& a : candidates) out.push_back(featurize_one(layout, k, s, a, ctx));
  return out;
}

PolicyParams init_params(std::size_t dim, std::uint64_t seed, double scale) {
  Rng rng(seed);
  PolicyParams p;
  p.weights.resize(dim);
  for (auto& w : p.weights) w = scale * rng.normal();
  return p;
}

double score(const PolicyParams& params, const FeatureVector& phi) {
  if (phi.size() != params.weights.size())
    throw PreconditionError("feature dimension " + std::to_string(phi.size()) + " does not match weights " +
                            std::to_string(params.weights.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) s += params.weights[i] * phi[i];
  return s;
}

std::vector<double> action_logprobs(const PolicyParams& params, const std::vector<FeatureVector>& candidates) {
  if (candidates.empty()) throw PreconditionError("action_logprobs: no candidates");
  std::vector<double> s(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) s[i] = score(params, candidates[i]);
  const double mx = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (double x : s) z += std::exp(x - mx);
  const double lse = mx + std::log(z);
  for (double& x : s) x -= lse;
  return s;
}

Sample sample_action(const std::vector<double>& logprobs, double temperature, Rng& rng) {
  if (logprobs.empty()) throw PreconditionError("sample_action: no candidates");
  if (!(temperature >= 0.0)) throw PreconditionError("sample_action: temperature must be >= 0");
  if (temperature == 0.0) {
    const auto it = std::max_element(logprobs.begin(), logprobs.end());  // first maximum
    const auto i = static_cast<std::size_t>(it - logprobs.begin());
    return {i, logprobs[i]};
  }
  const double mx = *std::max_element(logprobs.begin(), logprobs.end());
  std::vector<double> w(logprobs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += w[i] = std::exp((logprobs[i] - mx) / temperature);
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (u < w[i]) return {i, logprobs[i]};
    u -= w[i];
  }
  // Rounding left u past the last bucket; take the last positive weight.
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0) return {i, logprobs[i]};
  return {0, logprobs[0]};
}

std::vector<double> logprob_gradient(const PolicyParams& params, const std::vector<FeatureVector>& candidates,
                                     std::size_t chosen) {
  if (chosen >= candidates.size()) throw PreconditionError("logprob_gradient: chosen index out of range");
  const auto lp = action_logprobs(params, candidates);
  std::vector<double> g = candidates[chosen];
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    const double p = std::exp(lp[a]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= p * candidates[a][i];
  }
  return g;
}

OptimizerState make_optimizer(std::size_t dim, const AdamConfig& config) {
  OptimizerState s;
  s.m.assign(dim, 0.0);
  s.v.assign(dim, 0.0);
  s.config = config;
  return s;
}

AdamDiagnostics adam_update(OptimizerState& state, PolicyParams& params, const std::vector<double>& gradient) {
  const std::size_t d = params.weights.size();
  if (gradient.size() != d || state.m.size() != d || state.v.size() != d)
    throw PreconditionError("adam_update: shape mismatch");
  AdamDiagnostics diag;
  double sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    if (!std::isfinite(gradient[i]))
      throw NumericError("adam_update: non-finite gradient entry " + std::to_string(i) + " (" +
                         std::to_string(gradient[i]) + "); update aborted");
    sq += gradient[i] * gradient[i];
  }
  diag.grad_norm = std::sqrt(sq);
  const auto& c = state.config;
  double scale = 1.0;
  if (c.clip_norm > 0 && diag.grad_norm > c.clip_norm) {
    scale = c.clip_norm / diag.grad_norm;
    diag.clipped = true;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < d; ++i) {
    const double g = gradient[i] * scale;
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params.weights[i] += c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
  ++params.version;
  return diag;
}

nlohmann::json checkpoint_to_json(const PolicyParams& params, const FeatureLayout& layout) {
  if (params.weights.size() != layout.dim()) throw PreconditionError("checkpoint: weights do not match layout");
  return nlohmann::json{{"format", kFormat},
                        {"format_version", kFormatVersion},
                        {"feature_dim", layout.dim()},
                        {"feature_names", layout.names()},
                        {"version", params.version},
                        {"weights", params.weights}};
}

PolicyParams checkpoint_from_json(const nlohmann::json& j, std::size_t expected_dim) {
  if (j.value("format", "") != kFormat) throw ConfigError("checkpoint: not a policy checkpoint");
  if (j.value("format_version", 0) != kFormatVersion)
    throw ConfigError("checkpoint: unsupported format_version " + j.value("format_version", nlohmann::json()).dump());
  const auto dim = j.at("feature_dim").get<std::size_t>();
  if (dim != expected_dim)
    throw ConfigError("checkpoint: feature dimension " + std::to_string(dim) + " does not match expected " +
                      std::to_string(expected_dim));
  PolicyParams p;
  p.weights = j.at("weights").get<std::vector<double>>();
  p.version = j.at("version").get<std::uint64_t>();
  if (p.weights.size() != dim) throw ConfigError("checkpoint: weight count does not match feature_dim");
  for (double w : p.weights)
    if (!std::isfinite(w)) throw ConfigError("checkpoint: non-finite weight");
  return p;
}

void save_checkpoint(const std::string& path, const PolicyParams& params, const FeatureLayout& layout) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path);
  out << checkpoint_to_json(params, layout).dump(1) << "\n";
}

PolicyParams load_checkpoint(const std::string& path, std::size_t expected_dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + path + ": " + e.what());
  }
  return checkpoint_from_json(j, expected_dim);
}

}  // namespace narl::policy
