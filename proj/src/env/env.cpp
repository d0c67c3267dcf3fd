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

#include "narl/env/env.hpp"

#include <algorithm>

#include "narl/core/error.hpp"
#include "narl/env/knowledge.hpp"

namespace narl::env {

EnvState make_env(const Database& initial) {
  EnvState env;
  env.db = initial;
  return env;
}

Observation user_turn(EnvState& env, const InteractionScript& script) {
  if (env.script_cursor >= script.turns.size()) return Silence{};
  const UserMessage& msg = script.turns[env.script_cursor++];
  env.user_log.push_back({env.history.size(), msg});
  return msg;
}

Observation step(EnvState& env, const Action& action, const EpisodeContext& ctx,
                 const ToolResultFilter* filter) {
  if (env.terminated) throw PreconditionError("step: episode already terminated");

  Observation obs = Silence{};
  bool perturbed = false;
  if (const auto* call = std::get_if<ToolCall>(&action)) {
    ToolResult result = execute_tool(ctx.domain, env.db, *call);
    if (filter != nullptr && result.ok()) {
      const ToolResult before = result;
      filter->apply(result, *call, env);
      perturbed = !(before == result);
    }
    obs = std::move(result);
  } else if (const auto* ask = std::get_if<AskUser>(&action)) {
    auto it = ctx.script.clarification_table.find(ask->slot);
    if (it != ctx.script.clarification_table.end()) obs = it->second;
  } else {
    env.terminated = true;
    env.finished = true;
  }
  env.history.push_back({action, obs});
  env.pending_noise.perturbed.push_back(perturbed);
  env.turn_index = env.history.size();
  return obs;
}

Observation begin_episode(EnvState& env, const EpisodeContext& ctx) {
  return user_turn(env, ctx.script);
}

Observation advance(EnvState& env, const Action& action, const EpisodeContext& ctx,
                    const ToolResultFilter* filter) {
  Observation obs = step(env, action, ctx, filter);
  if (!env.terminated && env.script_cursor < ctx.script.turns.size()) user_turn(env, ctx.script);
  return obs;
}

int verify(const EnvState& env, const TaskSpec& task) {
  if (!env.finished) return 0;
  if (env.turn_index > static_cast<std::size_t>(task.turn_budget)) return 0;
  if (!(env.db == task.target_state)) return 0;
  for (const auto& read : task.required_reads) {
    bool seen = false;
    for (const auto& h : env.history) {
      const auto* call = std::get_if<ToolCall>(&h.action);
      const auto* res = std::get_if<ToolResult>(&h.observation);
      if (call && res && *call == read && res->ok()) {
        seen = true;
        break;
      }
    }
    if (!seen) return 0;
  }
  return 1;
}

std::optional<Observation> last_observation(const EnvState& env) {
  if (!env.user_log.empty() && env.user_log.back().after_turn >= env.history.size())
    return Observation{env.user_log.back().message};
  if (env.history.empty()) return std::nullopt;
  return env.history.back().observation;
}

ObservationClass last_observation_class(const EnvState& env) {
  if (!env.user_log.empty() && env.user_log.back().after_turn >= env.history.size())
    return ObservationClass::kUser;
  if (env.history.empty()) return ObservationClass::kNone;
  const auto& obs = env.history.back().observation;
  if (std::holds_alternative<UserMessage>(obs)) return ObservationClass::kUser;
  if (const auto* r = std::get_if<ToolResult>(&obs))
    return r->ok() ? ObservationClass::kToolOk : ObservationClass::kToolError;
  return ObservationClass::kNone;
}

std::vector<Action> enumerate_actions(const EnvState& env, const EpisodeContext& ctx) {
  if (env.terminated) throw PreconditionError("enumerate_actions: episode already terminated");
  return enumerate_actions(build_knowledge(env, ctx), ctx);
}

std::vector<Action> enumerate_actions(const Knowledge& k, const EpisodeContext& ctx) {
  std::vector<Action> out;

  for (const auto& tool : ctx.domain.tools) {
    std::vector<const std::vector<const ValueInfo*>*> options;
    bool groundable = true;
    for (const auto& slot : tool.arg_slots) {
      auto it = k.by_type.find(slot.type);
      if (it == k.by_type.end() || it->second.empty()) {
        groundable = false;
        break;
      }
      options.push_back(&it->second);
    }
    if (!groundable) continue;

    // Mixed-radix walk over per-slot preference ranks, last slot fastest.
    std::size_t total = 1;
    for (const auto* o : options) total = std::min(total * o->size(), kMaxGroundingsPerTool);
    for (std::size_t n = 0; n < total; ++n) {
      ToolCall call{tool.name, {}};
      call.grounding.resize(options.size());
      std::size_t rest = n;
      for (std::size_t s = options.size(); s-- > 0;) {
        const auto& opts = *options[s];
        call.grounding[s] = {tool.arg_slots[s].name, opts[rest % opts.size()]->value};
        rest /= opts.size();
      }
      out.emplace_back(std::move(call));
    }
  }
  for (const auto& [slot, _] : ctx.task.goal_slots)
    if (!k.revealed_slots.count(slot)) out.emplace_back(AskUser{slot});
  out.emplace_back(Finish{});
  return out;
}

}  // namespace narl::env
