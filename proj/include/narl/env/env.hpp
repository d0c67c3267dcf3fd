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

#ifndef NARL_ENV_ENV_HPP_
#define NARL_ENV_ENV_HPP_

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "narl/env/domain.hpp"
#include "narl/env/task.hpp"

namespace narl::env {

struct HistoryEntry {
  Action action;
  Observation observation;
};

// A scripted user message and the number of agent turns taken before it.
struct UserDelivery {
  std::size_t after_turn = 0;
  UserMessage message;
};

// Flags owned by the noise layer. Lives in the env state so that copies of a
// state (oracle branches, replays) carry it along.
struct PendingNoise {
  std::set<std::string> heal_signatures;  // next identical call is not perturbed
  std::vector<nlohmann::json> draw_log;   // tool-side draws in call order
  std::vector<bool> perturbed;            // parallel to history

  bool operator==(const PendingNoise&) const = default;
};

struct EnvState {
  Database db;
  std::size_t turn_index = 0;
  std::vector<HistoryEntry> history;
  std::size_t script_cursor = 0;
  std::vector<UserDelivery> user_log;
  PendingNoise pending_noise;
  bool terminated = false;
  bool finished = false;  // terminated by Finish (not by budget)
};

struct EpisodeContext {
  const DomainGraph& domain;
  const TaskSpec& task;
  const InteractionScript& script;  // possibly perturbed copy of task's script
};

// Tool-side perturbation hook applied to every ToolResult before it is
// recorded. Implementations must not touch env.db.
class ToolResultFilter {
 public:
  virtual ~ToolResultFilter() = default;
  virtual void apply(ToolResult& result, const ToolCall& call, EnvState& env) const = 0;
};

EnvState make_env(const Database& initial);

// Emits the next scripted user message (Silence once the script is exhausted)
// and records it in env.user_log.
Observation user_turn(EnvState& env, const InteractionScript& script);

// One transition. ToolCall errors such as not_found are observations.
Observation step(EnvState& env, const Action& action, const EpisodeContext& ctx,
                 const ToolResultFilter* filter = nullptr);

// Delivers the opening user turn.
Observation begin_episode(EnvState& env, const EpisodeContext& ctx);

// step() followed by delivery of the next scripted user turn, if any.
Observation advance(EnvState& env, const Action& action, const EpisodeContext& ctx,
                    const ToolResultFilter* filter = nullptr);

// 1 iff the db equals the target state, every required read was observed
// with status ok, and Finish was issued within the task's turn budget.
int verify(const EnvState& env, const TaskSpec& task);

// The most recent observation the agent has seen (user message or step result).
std::optional<Observation> last_observation(const EnvState& env);

enum class ObservationClass { kNone, kUser, kToolOk, kToolError };
ObservationClass last_observation_class(const EnvState& env);

inline constexpr std::size_t kMaxGroundingsPerTool = 8;

std::vector<Action> enumerate_actions(const EnvState& env, const EpisodeContext& ctx);

struct Knowledge;
// Same, from knowledge already built for this state.
std::vector<Action> enumerate_actions(const Knowledge& k, const EpisodeContext& ctx);

}  // namespace narl::env

#endif  // NARL_ENV_ENV_HPP_
