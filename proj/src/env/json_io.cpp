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

#include "narl/env/json_io.hpp"

#include <fstream>

#include "narl/core/error.hpp"

namespace narl::env {
namespace {

const char* role_name(ToolRole r) {
  switch (r) {
    case ToolRole::kFind: return "find";
    case ToolRole::kGet: return "get";
    case ToolRole::kUpdate: return "update";
  }
  return "?";
}

ToolRole role_from_name(const std::string& s) {
  if (s == "find") return ToolRole::kFind;
  if (s == "get") return ToolRole::kGet;
  if (s == "update") return ToolRole::kUpdate;
  throw Error("unknown tool role " + s);
}

const char* segment_name(SegmentKind k) {
  switch (k) {
    case SegmentKind::kReveal: return "reveal";
    case SegmentKind::kWithheld: return "withheld";
    case SegmentKind::kCorrection: return "correction";
    case SegmentKind::kDistractor: return "distractor";
    case SegmentKind::kOutOfScope: return "out_of_scope";
    case SegmentKind::kText: return "text";
  }
  return "?";
}

SegmentKind segment_from_name(const std::string& s) {
  for (auto k : {SegmentKind::kReveal, SegmentKind::kWithheld, SegmentKind::kCorrection,
                 SegmentKind::kDistractor, SegmentKind::kOutOfScope, SegmentKind::kText})
    if (s == segment_name(k)) return k;
  throw Error("unknown segment kind " + s);
}

json field_spec_json(const FieldSpec& f) {
  json j{{"name", f.name}, {"type", to_json(f.type)}, {"list", f.is_list}};
  if (!f.vocab.empty()) {
    json v = json::array();
    for (const auto& x : f.vocab) v.push_back(narl::to_json(x));
    j["vocab"] = v;
  }
  return j;
}

FieldSpec field_spec_from_json(const json& j) {
  FieldSpec f;
  f.name = j.at("name").get<std::string>();
  f.type = field_type_from_json(j.at("type"));
  f.is_list = j.at("list").get<bool>();
  if (j.contains("vocab"))
    for (const auto& x : j.at("vocab")) f.vocab.push_back(value_from_json(x));
  return f;
}

json record_json(const Record& r) {
  json j = json::object();
  for (const auto& [k, c] : r) j[k] = narl::to_json(c);
  return j;
}

Record record_from_json(const json& j) {
  Record r;
  for (auto it = j.begin(); it != j.end(); ++it) r[it.key()] = cell_from_json(it.value());
  return r;
}

json grounding_json(const ToolCall& c) {
  json g = json::array();
  for (const auto& [slot, v] : c.grounding) g.push_back(json::array({slot, narl::to_json(v)}));
  return g;
}

ToolCall call_from_json(const json& j) {
  ToolCall c;
  c.tool = j.at("tool").get<std::string>();
  for (const auto& p : j.at("grounding"))
    c.grounding.emplace_back(p.at(0).get<std::string>(), value_from_json(p.at(1)));
  return c;
}

}  // namespace

json to_json(const FieldType& t) { return t.str(); }

FieldType field_type_from_json(const json& j) {
  const auto s = j.get<std::string>();
  const auto dot = s.find('.');
  if (dot == std::string::npos) throw Error("field type must look like kind.field: " + s);
  return {s.substr(0, dot), s.substr(dot + 1)};
}

json to_json(const DomainGraph& d) {
  json tools = json::array();
  for (const auto& t : d.tools) {
    json slots = json::array();
    for (const auto& s : t.arg_slots) slots.push_back({{"name", s.name}, {"type", to_json(s.type)}});
    json result = json::array();
    for (const auto& f : t.result_schema) result.push_back(field_spec_json(f));
    json effect = "read-only";
    if (t.effect)
      effect = {{"kind", t.effect->kind},
                {"field", t.effect->field},
                {"id_slot", t.effect->id_slot},
                {"value_slot", t.effect->value_slot}};
    tools.push_back({{"name", t.name},
                     {"role", role_name(t.role)},
                     {"kind", t.kind},
                     {"arg_slots", slots},
                     {"effect", effect},
                     {"result_schema", result}});
  }
  json schemas = json::array();
  for (const auto& s : d.entity_schemas) {
    json fields = json::array();
    for (const auto& f : s.fields) fields.push_back(field_spec_json(f));
    schemas.push_back({{"kind", s.kind},
                       {"id_prefix", s.id_prefix},
                       {"key_field", s.key_field},
                       {"mutable_fields", s.mutable_fields},
                       {"fields", fields}});
  }
  json edges = json::array();
  for (const auto& [a, b] : d.dependency_edges) edges.push_back(json::array({a, b}));
  json links = json::array();
  for (const auto& [a, b] : d.links) links.push_back(json::array({a, b}));
  return {{"tools", tools},
          {"entity_schemas", schemas},
          {"dependency_edges", edges},
          {"links", links},
          {"records_per_kind", d.records_per_kind}};
}

DomainGraph domain_from_json(const json& j) {
  DomainGraph d;
  for (const auto& t : j.at("tools")) {
    ToolSpec spec;
    spec.name = t.at("name").get<std::string>();
    spec.role = role_from_name(t.at("role").get<std::string>());
    spec.kind = t.at("kind").get<std::string>();
    for (const auto& s : t.at("arg_slots"))
      spec.arg_slots.push_back({s.at("name").get<std::string>(), field_type_from_json(s.at("type"))});
    const auto& e = t.at("effect");
    if (e.is_object())
      spec.effect = WriteEffect{e.at("kind").get<std::string>(), e.at("field").get<std::string>(),
                                e.at("id_slot").get<std::string>(), e.at("value_slot").get<std::string>()};
    for (const auto& f : t.at("result_schema")) spec.result_schema.push_back(field_spec_from_json(f));
    d.tools.push_back(std::move(spec));
  }
  for (const auto& s : j.at("entity_schemas")) {
    EntitySchema es;
    es.kind = s.at("kind").get<std::string>();
    es.id_prefix = s.at("id_prefix").get<std::string>();
    es.key_field = s.at("key_field").get<std::string>();
    es.mutable_fields = s.at("mutable_fields").get<std::vector<std::string>>();
    for (const auto& f : s.at("fields")) es.fields.push_back(field_spec_from_json(f));
    d.entity_schemas.push_back(std::move(es));
  }
  for (const auto& e : j.at("dependency_edges"))
    d.dependency_edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
  for (const auto& l : j.at("links"))
    d.links.emplace_back(l.at(0).get<std::string>(), l.at(1).get<std::string>());
  d.records_per_kind = j.at("records_per_kind").get<int>();
  validate_domain(d);
  return d;
}

json to_json(const Database& db) {
  json j = json::object();
  for (const auto& [kind, rows] : db.tables) {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(record_json(r));
    j[kind] = arr;
  }
  return j;
}

Database database_from_json(const json& j) {
  Database db;
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto& rows = db.tables[it.key()];
    for (const auto& r : it.value()) rows.push_back(record_from_json(r));
  }
  return db;
}

json to_json(const Action& a) {
  if (const auto* c = std::get_if<ToolCall>(&a)) return {{"tool", c->tool}, {"grounding", grounding_json(*c)}};
  if (const auto* q = std::get_if<AskUser>(&a)) return {{"ask", q->slot}};
  return {{"finish", true}};
}

Action action_from_json(const json& j) {
  if (j.contains("tool")) return call_from_json(j);
  if (j.contains("ask")) return AskUser{j.at("ask").get<std::string>()};
  if (j.contains("finish")) return Finish{};
  throw Error("unrecognized action " + j.dump());
}

json to_json(const UserMessage& m) {
  json segs = json::array();
  for (const auto& s : m.segments) {
    json js{{"kind", segment_name(s.kind)}};
    if (!s.slot.empty()) js["slot"] = s.slot;
    if (s.value) js["value"] = narl::to_json(*s.value);
    if (s.type) js["type"] = to_json(*s.type);
    if (!s.text.empty()) js["text"] = s.text;
    segs.push_back(js);
  }
  return segs;
}

UserMessage user_message_from_json(const json& j) {
  UserMessage m;
  for (const auto& js : j) {
    Segment s;
    s.kind = segment_from_name(js.at("kind").get<std::string>());
    if (js.contains("slot")) s.slot = js.at("slot").get<std::string>();
    if (js.contains("value")) s.value = value_from_json(js.at("value"));
    if (js.contains("type")) s.type = field_type_from_json(js.at("type"));
    if (js.contains("text")) s.text = js.at("text").get<std::string>();
    m.segments.push_back(std::move(s));
  }
  return m;
}

json to_json(const Observation& o) {
  if (const auto* m = std::get_if<UserMessage>(&o)) return {{"user", to_json(*m)}};
  if (const auto* r = std::get_if<ToolResult>(&o)) {
    json fields = json::object();
    for (const auto& [k, c] : r->fields) fields[k] = narl::to_json(c);
    json j{{"tool", r->tool}, {"status", r->status}, {"fields", fields}};
    if (!r->extra_types.empty()) {
      json x = json::object();
      for (const auto& [k, t] : r->extra_types) x[k] = to_json(t);
      j["extra_types"] = x;
    }
    return {{"tool_result", j}};
  }
  return {{"silence", true}};
}

Observation observation_from_json(const json& j) {
  if (j.contains("user")) return user_message_from_json(j.at("user"));
  if (j.contains("tool_result")) {
    const auto& t = j.at("tool_result");
    ToolResult r;
    r.tool = t.at("tool").get<std::string>();
    r.status = t.at("status").get<std::string>();
    for (auto it = t.at("fields").begin(); it != t.at("fields").end(); ++it)
      r.fields[it.key()] = cell_from_json(it.value());
    if (t.contains("extra_types"))
      for (auto it = t.at("extra_types").begin(); it != t.at("extra_types").end(); ++it)
        r.extra_types[it.key()] = field_type_from_json(it.value());
    return r;
  }
  return Silence{};
}

json to_json(const InteractionScript& s) {
  json turns = json::array();
  for (const auto& t : s.turns) turns.push_back(to_json(t));
  json table = json::object();
  for (const auto& [slot, msg] : s.clarification_table) table[slot] = to_json(msg);
  return {{"turns", turns}, {"clarification_table", table}};
}

InteractionScript script_from_json(const json& j) {
  InteractionScript s;
  for (const auto& t : j.at("turns")) s.turns.push_back(user_message_from_json(t));
  for (auto it = j.at("clarification_table").begin(); it != j.at("clarification_table").end(); ++it)
    s.clarification_table[it.key()] = user_message_from_json(it.value());
  return s;
}

json to_json(const TaskSpec& t) {
  json goals = json::object();
  for (const auto& [k, v] : t.goal_slots) goals[k] = narl::to_json(v);
  json types = json::object();
  for (const auto& [k, v] : t.slot_types) types[k] = to_json(v);
  json chain = json::array();
  for (const auto& c : t.reference_chain) chain.push_back(to_json(Action{c}));
  json reads = json::array();
  for (const auto& c : t.required_reads) reads.push_back(to_json(Action{c}));
  return {{"task_id", t.task_id},
          {"goal_slots", goals},
          {"slot_types", types},
          {"reference_chain", chain},
          {"interaction_script", to_json(t.interaction_script)},
          {"target_state", to_json(t.target_state)},
          {"required_reads", reads},
          {"turn_budget", t.turn_budget}};
}

TaskSpec task_from_json(const json& j) {
  TaskSpec t;
  t.task_id = j.at("task_id").get<std::string>();
  for (auto it = j.at("goal_slots").begin(); it != j.at("goal_slots").end(); ++it)
    t.goal_slots[it.key()] = value_from_json(it.value());
  for (auto it = j.at("slot_types").begin(); it != j.at("slot_types").end(); ++it)
    t.slot_types[it.key()] = field_type_from_json(it.value());
  for (const auto& c : j.at("reference_chain")) t.reference_chain.push_back(call_from_json(c));
  t.interaction_script = script_from_json(j.at("interaction_script"));
  t.target_state = database_from_json(j.at("target_state"));
  for (const auto& c : j.at("required_reads")) t.required_reads.push_back(call_from_json(c));
  t.turn_budget = j.at("turn_budget").get<int>();
  return t;
}

json fixture_to_json(const Fixture& f) {
  json tasks = json::array();
  for (const auto& t : f.tasks) tasks.push_back({{"task", to_json(t.task)}, {"initial", to_json(t.initial)}});
  return {{"schema_version", kFixtureSchemaVersion}, {"domain", to_json(f.domain)}, {"tasks", tasks}};
}

Fixture fixture_from_json(const json& j) {
  const int version = j.at("schema_version").get<int>();
  if (version != kFixtureSchemaVersion)
    throw Error("unsupported fixture schema_version " + std::to_string(version));
  Fixture f;
  f.domain = domain_from_json(j.at("domain"));
  for (const auto& t : j.at("tasks"))
    f.tasks.push_back({task_from_json(t.at("task")), database_from_json(t.at("initial"))});
  return f;
}

Fixture load_fixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open fixture " + path);
  return fixture_from_json(json::parse(in));
}

void save_fixture(const Fixture& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write fixture " + path);
  out << fixture_to_json(f).dump(2) << "\n";
}

}  // namespace narl::env
