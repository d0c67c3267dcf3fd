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

#include "narl/env/oracle.hpp"

#include <algorithm>
#include <deque>
#include <unordered_set>

#include "narl/env/knowledge.hpp"

namespace narl::env {
namespace {

void append_db(std::string& out, const Database& db) {
  for (const auto& [kind, rows] : db.tables) {
    out += kind;
    for (const auto& r : rows)
      for (const auto& [field, cell] : r) {
        out += '|';
        for (const auto& v : cell.items) {
          out += to_string(v);
          out += ',';
        }
      }
  }
}

std::string state_key(const EnvState& env, const Knowledge& k) {
  std::string key;
  append_db(key, env.db);
  key += "#c" + std::to_string(env.script_cursor);
  for (const auto& h : env.pending_noise.heal_signatures) key += "#h" + h;
  for (const auto& s : k.revealed_slots) key += "#r" + s;
  for (const auto& [sig, ci] : k.calls)
    key += "#k" + sig + ":" + std::to_string(ci.ok_count) + "/" + std::to_string(ci.error_count);
  for (const auto& [type, list] : k.by_type) {
    key += "#t" + type.str();
    for (const auto* v : list) key += "," + to_string(v->value);
  }
  return key;
}

bool useless_call(const EnvState& env, const EpisodeContext& ctx, const ToolCall& call) {
  const ToolSpec* tool = ctx.domain.tool(call.tool);
  if (tool->role == ToolRole::kFind) {
    const auto* schema = ctx.domain.schema(tool->kind);
    const auto& rows = env.db.tables.at(tool->kind);
    return std::none_of(rows.begin(), rows.end(), [&](const Record& r) {
      return r.at(schema->key_field).value() == call.grounding[0].second;
    });
  }
  if (env.db.find(tool->kind, call.grounding[0].second) == nullptr) return true;
  if (tool->effect) {
    const auto& eff = *tool->effect;
    const Record* target = ctx.task.target_state.find(eff.kind, call.grounding[0].second);
    if (target == nullptr || !(target->at(eff.field) == Cell::scalar(call.grounding[1].second)))
      return true;
  }
  return false;
}

struct Node {
  EnvState env;
  std::vector<Action> path;
  std::vector<Action> actions;
};

}  // namespace

OracleResult oracle_solve(const EpisodeContext& ctx, const Database& initial, int max_depth,
                          const ToolResultFilter* filter) {
  OracleResult out;
  const int depth_limit = std::min(max_depth, ctx.task.turn_budget);
  Node root{make_env(initial), {}, {}};
  begin_episode(root.env, ctx);
  {
    const Knowledge k = build_knowledge(root.env, ctx);
    root.actions = enumerate_actions(k, ctx);
  }

  std::deque<Node> frontier;
  std::unordered_set<std::string> seen;
  seen.insert(state_key(root.env, build_knowledge(root.env, ctx)));
  frontier.push_back(std::move(root));

  while (!frontier.empty()) {
    Node node = std::move(frontier.front());
    frontier.pop_front();
    ++out.explored;
    const int depth = static_cast<int>(node.path.size());
    if (depth >= depth_limit) continue;

    for (const auto& action : node.actions) {
      if (std::holds_alternative<Finish>(action)) {
        EnvState done = node.env;
        advance(done, action, ctx, filter);
        if (verify(done, ctx.task) == 1) {
          out.success = true;
          out.witness = node.path;
          out.witness.push_back(action);
          return out;
        }
        continue;
      }
      if (depth + 1 >= depth_limit) continue;  // Finish would no longer fit
      if (const auto* call = std::get_if<ToolCall>(&action); call && useless_call(node.env, ctx, *call))
        continue;
      Node child{node.env, node.path, {}};
      advance(child.env, action, ctx, filter);
      child.path.push_back(action);
      const Knowledge k = build_knowledge(child.env, ctx);
      if (!seen.insert(state_key(child.env, k)).second) continue;
      child.actions = enumerate_actions(k, ctx);
      frontier.push_back(std::move(child));
    }
  }
  return out;
}

}  // namespace narl::env
