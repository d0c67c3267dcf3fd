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

#include "narl/env/knowledge.hpp"

#include <algorithm>

namespace narl::env {
namespace {

struct Sightings {
  int clean = 0;
  int tainted = 0;
};

}  // namespace

const ValueInfo* Knowledge::lookup(const FieldType& type, const Value& value) const {
  auto it = values.find({type, value});
  return it == values.end() ? nullptr : &it->second;
}

Knowledge build_knowledge(const EnvState& env, const EpisodeContext& ctx) {
  Knowledge k;

  // Transcript in the order the agent saw it.
  struct Event {
    const UserMessage* user = nullptr;
    const ToolResult* result = nullptr;
    const ToolCall* call = nullptr;
  };
  std::vector<Event> transcript;
  std::size_t next_delivery = 0;
  auto flush_deliveries = [&](std::size_t after_turn) {
    while (next_delivery < env.user_log.size() && env.user_log[next_delivery].after_turn <= after_turn)
      transcript.push_back({&env.user_log[next_delivery++].message, nullptr, nullptr});
  };
  flush_deliveries(0);
  for (std::size_t i = 0; i < env.history.size(); ++i) {
    const auto& h = env.history[i];
    if (const auto* m = std::get_if<UserMessage>(&h.observation)) {
      transcript.push_back({m, nullptr, nullptr});
    } else if (const auto* r = std::get_if<ToolResult>(&h.observation)) {
      transcript.push_back({nullptr, r, std::get_if<ToolCall>(&h.action)});
    } else {
      transcript.push_back({});
    }
    flush_deliveries(i + 1);
  }
  k.event_count = static_cast<int>(transcript.size());

  // Final stated value per goal slot.
  std::map<std::string, Value> final_statement;
  for (const auto& e : transcript) {
    if (e.user == nullptr) continue;
    for (const auto& seg : e.user->segments) {
      if ((seg.kind == SegmentKind::kReveal || seg.kind == SegmentKind::kCorrection) && seg.value) {
        final_statement[seg.slot] = *seg.value;
        k.revealed_slots.insert(seg.slot);
      }
    }
  }

  std::map<std::pair<FieldType, Value>, Sightings> sightings;
  std::map<std::string, std::map<std::string, Cell>> last_fields;  // by call signature

  auto touch = [&](const FieldType& type, const Value& v, int t) -> ValueInfo& {
    auto [it, inserted] = k.values.try_emplace({type, v});
    ValueInfo& info = it->second;
    if (inserted) {
      info.type = type;
      info.value = v;
    }
    info.last_seen = std::max(info.last_seen, t);
    return info;
  };

  for (std::size_t t = 0; t < transcript.size(); ++t) {
    const int ti = static_cast<int>(t);
    const auto& e = transcript[t];
    if (e.user != nullptr) {
      for (const auto& seg : e.user->segments) {
        if (!seg.value || !seg.type) continue;
        ValueInfo& info = touch(*seg.type, *seg.value, ti);
        switch (seg.kind) {
          case SegmentKind::kReveal:
          case SegmentKind::kCorrection:
            if (final_statement.at(seg.slot) == *seg.value) {
              info.goal = true;
            } else {
              info.superseded = true;
            }
            break;
          case SegmentKind::kDistractor: info.distractor = true; break;
          case SegmentKind::kOutOfScope: info.out_of_scope = true; break;
          default: break;
        }
      }
      continue;
    }
    if (e.result == nullptr || e.call == nullptr) continue;

    const std::string sig = signature(*e.call);
    CallInfo& ci = k.calls[sig];
    if (!e.result->ok()) {
      ++ci.error_count;
      ci.last_ok = false;
      ci.last_truncated = false;
      continue;
    }
    ++ci.ok_count;
    ci.last_ok = true;
    ci.last_truncated = false;
    k.tools_ok.insert(e.call->tool);

    const ToolSpec* tool = ctx.domain.tool(e.call->tool);
    bool call_suspect = false;
    for (std::size_t s = 0; s < e.call->grounding.size(); ++s) {
      const auto* info = k.lookup(tool->arg_slots[s].type, e.call->grounding[s].second);
      if (info != nullptr && info->suspect()) call_suspect = true;
    }
    if (tool->role == ToolRole::kGet) k.records_read.insert({tool->kind, e.call->grounding[0].second});

    auto prev = last_fields.find(sig);
    for (const auto& [name, cell] : e.result->fields) {
      const FieldSpec* declared = tool->result_field(name);
      FieldType type;
      if (declared != nullptr) {
        type = declared->type;
      } else if (auto x = e.result->extra_types.find(name); x != e.result->extra_types.end()) {
        type = x->second;
      } else {
        continue;
      }
      if (cell.truncated) ci.last_truncated = true;
      for (std::size_t j = 0; j < cell.items.size(); ++j) {
        ValueInfo& info = touch(type, cell.items[j], ti);
        (declared ? info.tool_declared : info.tool_extra) = true;
        auto& sc = sightings[{type, cell.items[j]}];
        (call_suspect ? sc.tainted : sc.clean) += 1;
        if (cell.is_list) {
          info.list_last = (j + 1 == cell.items.size()) && !cell.truncated;
          info.list_nonlast = !info.list_last;
          info.truncated_list = cell.truncated;
        }
        info.contradicted = false;
      }
      if (prev != last_fields.end()) {
        auto old = prev->second.find(name);
        if (old != prev->second.end() && !old->second.truncated && !cell.truncated &&
            !(old->second == cell)) {
          for (const auto& v : old->second.items) {
            if (std::find(cell.items.begin(), cell.items.end(), v) != cell.items.end()) continue;
            if (auto* info = const_cast<ValueInfo*>(k.lookup(type, v))) info->contradicted = true;
          }
        }
      }
    }
    last_fields[sig] = e.result->fields;
  }

  for (auto& [key, info] : k.values) {
    auto it = sightings.find(key);
    info.tainted = it != sightings.end() && it->second.clean == 0 && it->second.tainted > 0 && !info.goal;
    info.in_last_observation = info.last_seen == k.event_count - 1;
  }
  for (const auto& [key, info] : k.values) k.by_type[key.first].push_back(&info);
  for (auto& [_, list] : k.by_type) {
    std::sort(list.begin(), list.end(), [](const ValueInfo* a, const ValueInfo* b) {
      if (a->last_seen != b->last_seen) return a->last_seen > b->last_seen;
      return a->value < b->value;
    });
  }
  return k;
}

}  // namespace narl::env
