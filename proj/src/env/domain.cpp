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

#include "narl/env/domain.hpp"

#include <algorithm>
#include <set>

#include "narl/core/error.hpp"
#include "narl/core/rng.hpp"

namespace narl::env {
namespace {

struct AttrTemplate {
  std::string name;
  std::vector<Value> vocab;
};

struct KindTemplate {
  std::string kind;
  std::string prefix;
  std::string key;
  std::string key_stem;
  std::vector<AttrTemplate> attrs;
};

std::vector<Value> words(std::initializer_list<const char*> ws) {
  std::vector<Value> out;
  for (const char* w : ws) out.emplace_back(std::string(w));
  return out;
}

std::vector<Value> ints(std::int64_t lo, std::int64_t hi) {
  std::vector<Value> out;
  for (auto i = lo; i <= hi; ++i) out.emplace_back(i);
  return out;
}

const std::vector<KindTemplate>& kind_templates() {
  static const std::vector<KindTemplate> kTemplates = {
      {"user", "U", "email", "user",
       {{"tier", words({"basic", "gold", "platinum", "silver"})},
        {"city", words({"austin", "boston", "denver", "seattle"})}}},
      {"order", "O", "order_number", "W",
       {{"status", words({"delivered", "pending", "processing", "shipped"})},
        {"priority", ints(1, 4)}}},
      {"product", "P", "sku", "SKU",
       {{"color", words({"black", "blue", "green", "red"})}, {"stock", ints(0, 3)}}},
      {"shipment", "S", "tracking", "TRK",
       {{"carrier", words({"dhl", "fedex", "ups", "usps"})},
        {"stage", words({"arrived", "label", "out", "transit"})}}},
      {"payment", "Y", "reference", "REF",
       {{"method", words({"bank", "card", "gift_card", "paypal"})}}},
      {"ticket", "T", "ticket_ref", "TCK",
       {{"queue", words({"billing", "returns", "sales", "tech"})}, {"urgency", ints(1, 4)}}},
      {"reservation", "R", "confirmation", "CNF",
       {{"seat", words({"aisle", "bulk", "middle", "window"})}}},
      {"account", "A", "handle", "acct",
       {{"plan", words({"free", "plus", "pro", "team"})}}},
  };
  return kTemplates;
}

const std::vector<std::string>& capability_pool() {
  static const std::vector<std::string> kPool = {
      "apply_coupon",        "book_flight",       "cancel_subscription",
      "change_password",     "export_invoice_pdf", "issue_bank_refund",
      "schedule_callback",   "transfer_to_human",
  };
  return kPool;
}

std::string id_slot_name(const std::string& kind) { return kind + "_id"; }

ToolSpec make_find(const EntitySchema& s) {
  ToolSpec t;
  t.name = "find_" + s.kind + "_by_" + s.key_field;
  t.role = ToolRole::kFind;
  t.kind = s.kind;
  t.arg_slots = {{s.key_field, {s.kind, s.key_field}}};
  t.result_schema = {{"matches", {s.kind, "id"}, true, {}}};
  return t;
}

ToolSpec make_get(const EntitySchema& s) {
  ToolSpec t;
  t.name = "get_" + s.kind;
  t.role = ToolRole::kGet;
  t.kind = s.kind;
  t.arg_slots = {{id_slot_name(s.kind), {s.kind, "id"}}};
  for (const auto& f : s.fields) t.result_schema.push_back({f.name, f.type, f.is_list, {}});
  return t;
}

ToolSpec make_update(const EntitySchema& s, const std::string& attr) {
  ToolSpec t;
  t.name = "update_" + s.kind + "_" + attr;
  t.role = ToolRole::kUpdate;
  t.kind = s.kind;
  t.arg_slots = {{id_slot_name(s.kind), {s.kind, "id"}}, {attr, {s.kind, attr}}};
  t.effect = WriteEffect{s.kind, attr, id_slot_name(s.kind), attr};
  t.result_schema = {{"id", {s.kind, "id"}, false, {}}, {attr, {s.kind, attr}, false, {}}};
  return t;
}

int role_rank(ToolRole r) {
  switch (r) {
    case ToolRole::kFind: return 0;
    case ToolRole::kGet: return 1;
    case ToolRole::kUpdate: return 2;
  }
  return 3;
}

}  // namespace

const FieldSpec* EntitySchema::field(const std::string& name) const {
  for (const auto& f : fields)
    if (f.name == name) return &f;
  return nullptr;
}

const ArgSlot* ToolSpec::slot(const std::string& name) const {
  for (const auto& s : arg_slots)
    if (s.name == name) return &s;
  return nullptr;
}

const FieldSpec* ToolSpec::result_field(const std::string& name) const {
  for (const auto& f : result_schema)
    if (f.name == name) return &f;
  return nullptr;
}

const ToolSpec* DomainGraph::tool(const std::string& name) const {
  for (const auto& t : tools)
    if (t.name == name) return &t;
  return nullptr;
}

std::optional<std::size_t> DomainGraph::tool_index(const std::string& name) const {
  for (std::size_t i = 0; i < tools.size(); ++i)
    if (tools[i].name == name) return i;
  return std::nullopt;
}

const EntitySchema* DomainGraph::schema(const std::string& kind) const {
  for (const auto& s : entity_schemas)
    if (s.kind == kind) return &s;
  return nullptr;
}

std::vector<std::string> DomainGraph::missing_capabilities() const {
  std::vector<std::string> out;
  for (const auto& c : capability_pool())
    if (tool(c) == nullptr) out.push_back(c);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> compute_dependency_edges(
    const std::vector<ToolSpec>& tools) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < tools.size(); ++i) {
    std::set<FieldType> inputs;
    for (const auto& s : tools[i].arg_slots) inputs.insert(s.type);
    std::set<FieldType> produced;
    for (const auto& f : tools[i].result_schema)
      if (f.type.field == "id" && !inputs.count(f.type)) produced.insert(f.type);
    for (std::size_t j = 0; j < tools.size(); ++j) {
      if (i == j) continue;
      for (const auto& s : tools[j].arg_slots) {
        if (produced.count(s.type)) {
          edges.emplace_back(i, j);
          break;
        }
      }
    }
  }
  return edges;
}

DomainGraph build_domain(const DomainSize& size, std::uint64_t seed) {
  const auto& templates = kind_templates();
  if (size.entity_kinds < 1 || size.tools < 1 || size.records_per_kind < 1)
    throw PreconditionError("build_domain: entity_kinds, tools and records_per_kind must be >= 1");
  if (size.entity_kinds > static_cast<int>(templates.size()))
    throw PreconditionError("build_domain: at most " + std::to_string(templates.size()) +
                            " entity kinds are supported");
  const int max_links = size.entity_kinds * (size.entity_kinds - 1) / 2;
  if (size.links < 0 || size.links > max_links)
    throw PreconditionError("build_domain: links must lie in [0, " + std::to_string(max_links) + "]");

  Rng rng(derive_seed(seed, {tag(Stream::kDomain)}));
  std::vector<std::size_t> order(templates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  DomainGraph g;
  g.records_per_kind = size.records_per_kind;
  for (int k = 0; k < size.entity_kinds; ++k) {
    const auto& t = templates[order[k]];
    EntitySchema s;
    s.kind = t.kind;
    s.id_prefix = t.prefix;
    s.key_field = t.key;
    s.fields.push_back({"id", {t.kind, "id"}, false, {}});
    s.fields.push_back({t.key, {t.kind, t.key}, false, {}});
    for (const auto& a : t.attrs) {
      s.fields.push_back({a.name, {t.kind, a.name}, false, a.vocab});
      s.mutable_fields.push_back(a.name);
    }
    g.entity_schemas.push_back(std::move(s));
  }

  // A spine i -> i+1 first so chains can go deep, then random extra links.
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < size.entity_kinds; ++i)
    for (int j = i + 1; j < size.entity_kinds; ++j) pairs.emplace_back(i, j);
  std::vector<std::pair<int, int>> chosen;
  for (int i = 0; i + 1 < size.entity_kinds && static_cast<int>(chosen.size()) < size.links; ++i)
    chosen.emplace_back(i, i + 1);
  std::vector<std::pair<int, int>> rest;
  for (const auto& p : pairs)
    if (std::find(chosen.begin(), chosen.end(), p) == chosen.end()) rest.push_back(p);
  rng.shuffle(rest);
  for (const auto& p : rest) {
    if (static_cast<int>(chosen.size()) >= size.links) break;
    chosen.push_back(p);
  }
  std::sort(chosen.begin(), chosen.end());
  for (const auto& [i, j] : chosen) {
    auto& parent = g.entity_schemas[i];
    const auto& child = g.entity_schemas[j];
    parent.fields.push_back({child.kind + "_ids", {child.kind, "id"}, true, {}});
    g.links.emplace_back(parent.kind, child.kind);
  }

  // Candidate pool and greedy groundable selection.
  std::vector<ToolSpec> pool;
  for (const auto& s : g.entity_schemas) {
    pool.push_back(make_find(s));
    pool.push_back(make_get(s));
    for (const auto& a : s.mutable_fields) pool.push_back(make_update(s, a));
  }
  std::vector<bool> taken(pool.size(), false);
  std::set<FieldType> producible;
  std::vector<ToolSpec> selected;
  auto take = [&](std::size_t i) {
    taken[i] = true;
    const auto& t = pool[i];
    std::set<FieldType> inputs;
    for (const auto& s : t.arg_slots) inputs.insert(s.type);
    for (const auto& f : t.result_schema)
      if (f.type.field == "id" && !inputs.count(f.type)) producible.insert(f.type);
    selected.push_back(t);
  };
  take(0);  // find on the root kind
  while (static_cast<int>(selected.size()) < size.tools) {
    std::vector<std::size_t> ready;
    std::vector<int> weight;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (taken[i]) continue;
      bool ok = true;
      for (const auto& s : pool[i].arg_slots)
        if (s.type.field == "id" && !producible.count(s.type)) ok = false;
      if (!ok) continue;
      ready.push_back(i);
      weight.push_back(pool[i].role == ToolRole::kGet ? 3 : pool[i].role == ToolRole::kUpdate ? 2 : 1);
    }
    if (ready.empty())
      throw PreconditionError("build_domain: no groundable tool set of size " +
                              std::to_string(size.tools) + " exists for these entity kinds");
    int total = 0;
    for (int w : weight) total += w;
    auto pick = static_cast<int>(rng.below(static_cast<std::size_t>(total)));
    std::size_t idx = 0;
    while (pick >= weight[idx]) pick -= weight[idx++];
    take(ready[idx]);
  }

  auto kind_rank = [&](const std::string& kind) {
    for (std::size_t i = 0; i < g.entity_schemas.size(); ++i)
      if (g.entity_schemas[i].kind == kind) return i;
    return g.entity_schemas.size();
  };
  std::stable_sort(selected.begin(), selected.end(), [&](const ToolSpec& a, const ToolSpec& b) {
    const auto ka = kind_rank(a.kind), kb = kind_rank(b.kind);
    if (ka != kb) return ka < kb;
    if (role_rank(a.role) != role_rank(b.role)) return role_rank(a.role) < role_rank(b.role);
    return a.name < b.name;
  });
  g.tools = std::move(selected);
  g.dependency_edges = compute_dependency_edges(g.tools);
  validate_domain(g);
  return g;
}

void validate_domain(const DomainGraph& g) {
  std::set<std::string> names;
  for (const auto& t : g.tools)
    if (!names.insert(t.name).second) throw InvariantError("duplicate tool name " + t.name);

  const auto n = g.tools.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [a, b] : g.dependency_edges) {
    if (a >= n || b >= n) throw InvariantError("dependency edge out of range");
    adj[a].push_back(b);
  }
  // 0 = unvisited, 1 = on stack, 2 = done
  std::vector<int> mark(n, 0);
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (std::size_t root = 0; root < n; ++root) {
    if (mark[root]) continue;
    stack.emplace_back(root, 0);
    mark[root] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next < adj[v].size()) {
        const auto w = adj[v][next++];
        if (mark[w] == 1) throw InvariantError("dependency graph has a cycle through " + g.tools[w].name);
        if (mark[w] == 0) {
          mark[w] = 1;
          stack.emplace_back(w, 0);
        }
      } else {
        mark[v] = 2;
        stack.pop_back();
      }
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    const auto& t = g.tools[j];
    if (t.effect) {
      const auto* s = g.schema(t.effect->kind);
      if (s == nullptr || s->field(t.effect->field) == nullptr)
        throw InvariantError("write tool " + t.name + " names an unknown entity field");
    }
    for (const auto& slot : t.arg_slots) {
      const auto* s = g.schema(slot.type.kind);
      if (s == nullptr || s->field(slot.type.field) == nullptr)
        throw InvariantError("slot " + t.name + "." + slot.name + " has an unknown type");
      if (slot.type.field != "id") continue;  // keys and attributes are user-known
      bool grounded = false;
      for (const auto& [a, b] : g.dependency_edges) {
        if (b != j) continue;
        for (const auto& f : g.tools[a].result_schema)
          if (f.type == slot.type) grounded = true;
      }
      if (!grounded) throw InvariantError("slot " + t.name + "." + slot.name + " is not groundable");
    }
  }
}

// ---------------------------------------------------------------------------

const Record* Database::find(const std::string& kind, const Value& id) const {
  auto it = tables.find(kind);
  if (it == tables.end()) return nullptr;
  for (const auto& r : it->second) {
    auto f = r.find("id");
    if (f != r.end() && f->second.value() == id) return &r;
  }
  return nullptr;
}

Record* Database::find(const std::string& kind, const Value& id) {
  return const_cast<Record*>(std::as_const(*this).find(kind, id));
}

Database generate_database(const DomainGraph& g, std::uint64_t seed) {
  Rng rng(seed);
  Database db;
  const int n = g.records_per_kind;
  std::map<std::string, std::vector<Value>> ids;
  for (const auto& s : g.entity_schemas) {
    std::vector<int> numbers(90);
    for (int i = 0; i < 90; ++i) numbers[i] = 10 + i;
    rng.shuffle(numbers);
    std::vector<int> keys(900);
    for (int i = 0; i < 900; ++i) keys[i] = 100 + i;
    rng.shuffle(keys);
    const auto* tmpl = [&]() -> const KindTemplate* {
      for (const auto& t : kind_templates())
        if (t.kind == s.kind) return &t;
      return nullptr;
    }();
    auto& table = db.tables[s.kind];
    for (int r = 0; r < n; ++r) {
      Record rec;
      const Value id = s.id_prefix + std::to_string(numbers[r % 90] + 100 * (r / 90));
      ids[s.kind].push_back(id);
      rec["id"] = Cell::scalar(id);
      const std::string key = tmpl->key == "email"
                                  ? tmpl->key_stem + std::to_string(keys[r % 900]) + "@mail.test"
                                  : tmpl->key_stem + "-" + std::to_string(keys[r % 900]);
      rec[s.key_field] = Cell::scalar(key);
      for (const auto& f : s.fields)
        if (!f.vocab.empty()) rec[f.name] = Cell::scalar(f.vocab[rng.below(f.vocab.size())]);
      table.push_back(std::move(rec));
    }
  }
  for (const auto& [parent, child] : g.links) {
    const auto& pool = ids[child];
    for (auto& rec : db.tables[parent]) {
      const auto want = std::min<std::size_t>(pool.size(), 1 + rng.below(3));
      std::vector<std::size_t> idx(pool.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      rng.shuffle(idx);
      std::vector<Value> children;
      for (std::size_t i = 0; i < want; ++i) children.push_back(pool[idx[i]]);
      rec[child + "_ids"] = Cell::list(std::move(children));
    }
  }
  validate_database(g, db);
  return db;
}

void validate_database(const DomainGraph& g, const Database& db) {
  for (const auto& s : g.entity_schemas) {
    auto it = db.tables.find(s.kind);
    if (it == db.tables.end()) throw InvariantError("database lacks table " + s.kind);
    std::set<Value> seen;
    for (const auto& r : it->second) {
      for (const auto& f : s.fields)
        if (!r.count(f.name)) throw InvariantError("record in " + s.kind + " lacks field " + f.name);
      if (!seen.insert(r.at("id").value()).second)
        throw InvariantError("duplicate id in " + s.kind + ": " + to_string(r.at("id").value()));
    }
  }
}

std::vector<Value> values_of_type(const Database& db, const FieldType& type) {
  std::set<Value> out;
  auto it = db.tables.find(type.kind);
  if (it != db.tables.end()) {
    for (const auto& r : it->second) {
      auto f = r.find(type.field);
      if (f == r.end()) continue;
      for (const auto& v : f->second.items) out.insert(v);
    }
  }
  return {out.begin(), out.end()};
}

}  // namespace narl::env
