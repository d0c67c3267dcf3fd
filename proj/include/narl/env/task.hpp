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

#ifndef NARL_ENV_TASK_HPP_
#define NARL_ENV_TASK_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "narl/core/value.hpp"
#include "narl/env/domain.hpp"

namespace narl::env {

// ---- actions --------------------------------------------------------------

struct ToolCall {
  std::string tool;
  // Ordered as the tool's arg_slots.
  std::vector<std::pair<std::string, Value>> grounding;

  bool operator==(const ToolCall&) const = default;
};

struct AskUser {
  std::string slot;
  bool operator==(const AskUser&) const = default;
};

struct Finish {
  bool operator==(const Finish&) const = default;
};

using Action = std::variant<ToolCall, AskUser, Finish>;

// Canonical text form, e.g. `get_order(order_id=O17)`, `ask(user_email)`, `finish`.
std::string signature(const ToolCall& call);
std::string signature(const Action& action);

// ---- observations ---------------------------------------------------------

enum class SegmentKind {
  kReveal,      // truthful goal-slot value
  kWithheld,    // slot mentioned without a value
  kCorrection,  // restates a slot, superseding an earlier statement
  kDistractor,  // irrelevant but plausible entity value
  kOutOfScope,  // request for a capability no tool provides
  kText,
};

struct Segment {
  SegmentKind kind = SegmentKind::kText;
  std::string slot;                  // goal slot (reveal/withheld/correction)
  std::optional<Value> value;
  std::optional<FieldType> type;
  std::string text;                  // capability name or literal text

  bool operator==(const Segment&) const = default;
};

struct UserMessage {
  std::vector<Segment> segments;
  bool operator==(const UserMessage&) const = default;
};

struct ToolResult {
  std::string tool;
  std::string status = "ok";  // "ok" or an error code
  std::map<std::string, Cell> fields;
  // Types of fields outside the tool's declared result schema.
  std::map<std::string, FieldType> extra_types;

  bool ok() const { return status == "ok"; }
  bool operator==(const ToolResult&) const = default;
};

struct Silence {
  bool operator==(const Silence&) const = default;
};

using Observation = std::variant<UserMessage, ToolResult, Silence>;

// ---- tasks ----------------------------------------------------------------

struct InteractionScript {
  std::vector<UserMessage> turns;
  std::map<std::string, UserMessage> clarification_table;

  bool operator==(const InteractionScript&) const = default;
};

struct TaskSpec {
  std::string task_id;
  std::map<std::string, Value> goal_slots;
  std::map<std::string, FieldType> slot_types;
  std::vector<ToolCall> reference_chain;
  InteractionScript interaction_script;
  Database target_state;
  std::vector<ToolCall> required_reads;
  int turn_budget = 0;

  int chain_length() const { return static_cast<int>(reference_chain.size()); }
};

struct SynthesizedTask {
  TaskSpec task;
  Database initial;
};

inline constexpr int kMinChainLength = 2;
inline constexpr int kMaxChainLength = 5;

inline int default_turn_budget(int chain_length) { return 3 * chain_length + 6; }

// Samples a dependency-respecting tool chain of exactly `chain_length` calls
// and instantiates it on a freshly generated database. The clean script
// reveals every goal slot in its first turn.
SynthesizedTask synthesize_task(const DomainGraph& domain, int chain_length, std::uint64_t seed,
                                std::string task_id = {});

// Applies a tool call to `db` without any noise. Returns the tool's result.
ToolResult execute_tool(const DomainGraph& domain, Database& db, const ToolCall& call);

// Throws PreconditionError unless the grounding covers exactly the slots.
void check_grounding(const ToolSpec& tool, const ToolCall& call);

}  // namespace narl::env

#endif  // NARL_ENV_TASK_HPP_
