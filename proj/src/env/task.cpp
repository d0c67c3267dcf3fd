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

#include "narl/env/task.hpp"

#include <algorithm>
#include <cstdio>

#include "narl/core/error.hpp"
#include "narl/core/rng.hpp"

namespace narl::env {

std::string signature(const ToolCall& call) {
  std::string s = call.tool + "(";
  for (std::size_t i = 0; i < call.grounding.size(); ++i) {
    if (i) s += ",";
    s += call.grounding[i].first + "=" + to_string(call.grounding[i].second);
  }
  return s + ")";
}

std::string signature(const Action& action) {
  if (const auto* c = std::get_if<ToolCall>(&action)) return signature(*c);
  if (const auto* a = std::get_if<AskUser>(&action)) return "ask(" + a->slot + ")";
  return "finish";
}

void check_grounding(const ToolSpec& tool, const ToolCall& call) {
  if (call.grounding.size() != tool.arg_slots.size())
    throw PreconditionError("grounding for " + tool.name + " must bind exactly " +
                            std::to_string(tool.arg_slots.size()) + " slots");
  for (std::size_t i = 0; i < call.grounding.size(); ++i)
    if (call.grounding[i].first != tool.arg_slots[i].name)
      throw PreconditionError("grounding for " + tool.name + " binds unexpected slot " +
                              call.grounding[i].first);
}

ToolResult execute_tool(const DomainGraph& domain, Database& db, const ToolCall& call) {
  const ToolSpec* tool = domain.tool(call.tool);
  if (tool == nullptr) throw PreconditionError("unknown tool " + call.tool);
  check_grounding(*tool, call);

  ToolResult out;
  out.tool = tool->name;
  auto not_found = [&] {
    out.status = "not_found";
    out.fields.clear();
    return out;
  };

  switch (tool->role) {
    case ToolRole::kFind: {
      const auto* schema = domain.schema(tool->kind);
      std::vector<Value> matches;
      for (const auto& rec : db.tables[tool->kind])
        if (rec.at(schema->key_field).value() == call.grounding[0].second)
          matches.push_back(rec.at("id").value());
      if (matches.empty()) return not_found();
      out.fields["matches"] = Cell::list(std::move(matches));
      return out;
    }
    case ToolRole::kGet: {
      const Record* rec = db.find(tool->kind, call.grounding[0].second);
      if (rec == nullptr) return not_found();
      out.fields = *rec;
      return out;
    }
    case ToolRole::kUpdate: {
      const auto& effect = *tool->effect;
      Record* rec = db.find(effect.kind, call.grounding[0].second);
      if (rec == nullptr) return not_found();
      (*rec)[effect.field] = Cell::scalar(call.grounding[1].second);
      out.fields["id"] = rec->at("id");
      out.fields[effect.field] = rec->at(effect.field);
      return out;
    }
  }
  return out;
}

namespace {

struct ChainTemplate {
  std::vector<std::size_t> tools;  // indices into domain.tools
};

bool has_link(const DomainGraph& d, const std::string& parent, const std::string& child) {
  return std::find(d.links.begin(), d.links.end(), std::make_pair(parent, child)) != d.links.end();
}

// Read prefixes: find_k, get_k, get_c1, get_c2, ... following list links.
void extend_reads(const DomainGraph& d, std::vector<std::size_t>& prefix, std::size_t want,
                  std::vector<std::vector<std::size_t>>& out) {
  if (prefix.size() == want) {
    out.push_back(prefix);
    return;
  }
  const ToolSpec& last = d.tools[prefix.back()];
  for (std::size_t i = 0; i < d.tools.size(); ++i) {
    const ToolSpec& t = d.tools[i];
    if (t.role != ToolRole::kGet) continue;
    const bool same_kind = last.role == ToolRole::kFind && t.kind == last.kind;
    const bool child = last.role == ToolRole::kGet && has_link(d, last.kind, t.kind);
    if (!same_kind && !child) continue;
    prefix.push_back(i);
    extend_reads(d, prefix, want, out);
    prefix.pop_back();
  }
}

std::vector<ChainTemplate> enumerate_templates(const DomainGraph& d, std::size_t length, bool with_write) {
  std::vector<ChainTemplate> out;
  const std::size_t reads = with_write ? length - 1 : length;
  for (std::size_t i = 0; i < d.tools.size(); ++i) {
    if (d.tools[i].role != ToolRole::kFind) continue;
    std::vector<std::vector<std::size_t>> prefixes;
    std::vector<std::size_t> prefix{i};
    extend_reads(d, prefix, reads, prefixes);
    for (auto& p : prefixes) {
      if (!with_write) {
        out.push_back({p});
        continue;
      }
      const ToolSpec& last = d.tools[p.back()];
      for (std::size_t w = 0; w < d.tools.size(); ++w) {
        const ToolSpec& t = d.tools[w];
        if (t.role != ToolRole::kUpdate) continue;
        const bool direct = t.kind == last.kind;
        const bool child = last.role == ToolRole::kGet && has_link(d, last.kind, t.kind);
        if (!direct && !child) continue;
        auto full = p;
        full.push_back(w);
        out.push_back({std::move(full)});
      }
    }
  }
  return out;
}

std::string slot_for_key(const EntitySchema& s) { return s.kind + "_" + s.key_field; }

}  // namespace

SynthesizedTask synthesize_task(const DomainGraph& domain, int chain_length, std::uint64_t seed,
                                std::string task_id) {
  if (chain_length < kMinChainLength || chain_length > kMaxChainLength)
    throw PreconditionError("synthesize_task: chain_length must lie in [" +
                            std::to_string(kMinChainLength) + ", " +
                            std::to_string(kMaxChainLength) + "]");
  const auto len = static_cast<std::size_t>(chain_length);
  auto templates = enumerate_templates(domain, len, true);
  if (templates.empty()) templates = enumerate_templates(domain, len, false);
  if (templates.empty())
    throw PreconditionError("synthesize_task: domain admits no dependency-respecting chain of length " +
                            std::to_string(chain_length));

  Rng rng(seed);
  SynthesizedTask out;
  out.initial = generate_database(domain, rng.next());
  const auto& tmpl = templates[rng.below(templates.size())];

  TaskSpec& task = out.task;
  if (task_id.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "task-%016llx", static_cast<unsigned long long>(seed));
    task_id = buf;
  }
  task.task_id = std::move(task_id);

  const ToolSpec& find = domain.tools[tmpl.tools.front()];
  const EntitySchema& root = *domain.schema(find.kind);
  const auto& root_table = out.initial.tables.at(root.kind);
  const Record* current = &root_table[rng.below(root_table.size())];
  const std::string anchor_slot = slot_for_key(root);
  task.goal_slots[anchor_slot] = current->at(root.key_field).value();
  task.slot_types[anchor_slot] = {root.kind, root.key_field};
  task.reference_chain.push_back({find.name, {{find.arg_slots[0].name, task.goal_slots[anchor_slot]}}});

  std::string current_kind = root.kind;
  bool fetched = false;  // `current` has been read via get
  for (std::size_t i = 1; i < tmpl.tools.size(); ++i) {
    const ToolSpec& t = domain.tools[tmpl.tools[i]];
    Value id;
    if (t.kind == current_kind && (t.role == ToolRole::kUpdate || !fetched)) {
      id = current->at("id").value();
    } else {
      // Follow the list relation to its last (most recent) entry.
      const auto& children = current->at(t.kind + "_ids").items;
      id = children.back();
      current = out.initial.find(t.kind, id);
      current_kind = t.kind;
    }
    if (t.role == ToolRole::kGet) {
      fetched = true;
      task.reference_chain.push_back({t.name, {{t.arg_slots[0].name, id}}});
      continue;
    }
    const auto& effect = *t.effect;
    const auto* schema = domain.schema(effect.kind);
    const auto& vocab = schema->field(effect.field)->vocab;
    const Value& old_value = current->at(effect.field).value();
    std::vector<Value> options;
    for (const auto& v : vocab)
      if (v != old_value) options.push_back(v);
    const Value new_value = options[rng.below(options.size())];
    const std::string slot = "new_" + effect.kind + "_" + effect.field;
    task.goal_slots[slot] = new_value;
    task.slot_types[slot] = {effect.kind, effect.field};
    task.reference_chain.push_back({t.name, {{effect.id_slot, id}, {effect.value_slot, new_value}}});
  }

  Database replay = out.initial;
  for (const auto& call : task.reference_chain) {
    const ToolResult r = execute_tool(domain, replay, call);
    if (!r.ok()) throw InvariantError("reference chain call failed: " + signature(call));
    if (domain.tool(call.tool)->read_only()) task.required_reads.push_back(call);
  }
  task.target_state = std::move(replay);
  task.turn_budget = default_turn_budget(chain_length);

  UserMessage opening;
  std::vector<std::string> order{anchor_slot};
  for (const auto& [slot, _] : task.goal_slots)
    if (slot != anchor_slot) order.push_back(slot);
  for (const auto& slot : order) {
    Segment seg{SegmentKind::kReveal, slot, task.goal_slots[slot], task.slot_types[slot], {}};
    opening.segments.push_back(seg);
    task.interaction_script.clarification_table[slot] = UserMessage{{seg}};
  }
  task.interaction_script.turns.push_back(std::move(opening));
  return out;
}

}  // namespace narl::env
