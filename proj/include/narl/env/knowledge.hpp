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

#ifndef NARL_ENV_KNOWLEDGE_HPP_
#define NARL_ENV_KNOWLEDGE_HPP_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "narl/env/env.hpp"

namespace narl::env {

// What the agent can infer about one observed (type, value) pair from the
// transcript alone. Nothing here peeks at hidden state.
struct ValueInfo {
  FieldType type;
  Value value;
  int last_seen = -1;  // transcript event index of the latest sighting

  bool goal = false;            // current stated value of a goal slot
  bool superseded = false;      // stated for a slot that was later restated differently
  bool distractor = false;      // mentioned in a user side remark
  bool out_of_scope = false;    // argument of a request no tool can serve
  bool tool_declared = false;   // returned in a declared result field
  bool tool_extra = false;      // returned in an undeclared result field
  bool list_last = false;       // last element of its latest (untruncated) list
  bool list_nonlast = false;    // non-last element of its latest list
  bool truncated_list = false;  // latest list sighting carried a truncation marker
  bool contradicted = false;    // a re-issued identical call returned something else
  bool tainted = false;         // produced by a call grounded on a suspect value
  bool in_last_observation = false;

  bool suspect() const {
    const bool unsupported = !goal && !tool_declared && (distractor || out_of_scope || tool_extra);
    return superseded || contradicted || tainted || unsupported;
  }
};

struct CallInfo {
  int ok_count = 0;
  int error_count = 0;
  bool last_ok = false;
  bool last_truncated = false;
};

// by_type points into values; the struct is move-only to keep that valid.
struct Knowledge {
  Knowledge() = default;
  Knowledge(const Knowledge&) = delete;
  Knowledge& operator=(const Knowledge&) = delete;
  Knowledge(Knowledge&&) = default;
  Knowledge& operator=(Knowledge&&) = default;

  std::map<std::pair<FieldType, Value>, ValueInfo> values;
  // Per type, ordered by preference: most recently seen first, then by value.
  std::map<FieldType, std::vector<const ValueInfo*>> by_type;
  std::set<std::string> revealed_slots;
  std::map<std::string, CallInfo> calls;  // by call signature
  std::set<std::string> tools_ok;         // tool names with at least one ok result
  std::set<std::pair<std::string, Value>> records_read;  // (kind, id) seen via get
  int event_count = 0;

  const ValueInfo* lookup(const FieldType& type, const Value& value) const;
};

Knowledge build_knowledge(const EnvState& env, const EpisodeContext& ctx);

}  // namespace narl::env

#endif  // NARL_ENV_KNOWLEDGE_HPP_
