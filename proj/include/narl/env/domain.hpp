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

#ifndef NARL_ENV_DOMAIN_HPP_
#define NARL_ENV_DOMAIN_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "narl/core/value.hpp"

namespace narl::env {

struct FieldSpec {
  std::string name;
  FieldType type;
  bool is_list = false;
  // Admissible values for mutable attributes; empty for ids and keys.
  std::vector<Value> vocab;
};

struct EntitySchema {
  std::string kind;
  std::string id_prefix;
  std::string key_field;                    // unique, user-known lookup key
  std::vector<std::string> mutable_fields;  // attributes write tools may set
  std::vector<FieldSpec> fields;            // "id" first

  const FieldSpec* field(const std::string& name) const;
};

enum class ToolRole { kFind, kGet, kUpdate };

struct ArgSlot {
  std::string name;
  FieldType type;
};

// Write effect: on the record of `kind` named by the id slot, set `field`
// to the value bound to `value_slot`.
struct WriteEffect {
  std::string kind;
  std::string field;
  std::string id_slot;
  std::string value_slot;

  bool operator==(const WriteEffect&) const = default;
};

struct ToolSpec {
  std::string name;
  ToolRole role = ToolRole::kGet;
  std::string kind;
  std::vector<ArgSlot> arg_slots;
  std::optional<WriteEffect> effect;  // nullopt: read-only
  std::vector<FieldSpec> result_schema;

  bool read_only() const { return !effect.has_value(); }
  const ArgSlot* slot(const std::string& name) const;
  const FieldSpec* result_field(const std::string& name) const;
};

struct DomainSize {
  int entity_kinds = 4;
  int tools = 12;
  int links = 3;              // parent -> child list relations between kinds
  int records_per_kind = 6;   // rows per table in each task database
};

struct DomainGraph {
  std::vector<ToolSpec> tools;
  std::vector<EntitySchema> entity_schemas;
  // (i, j): tool i's output can ground an argument slot of tool j.
  std::vector<std::pair<std::size_t, std::size_t>> dependency_edges;
  // (parent kind, child kind) list relations.
  std::vector<std::pair<std::string, std::string>> links;
  int records_per_kind = 6;

  const ToolSpec* tool(const std::string& name) const;
  std::optional<std::size_t> tool_index(const std::string& name) const;
  const EntitySchema* schema(const std::string& kind) const;
  // Capability names that no tool in this domain implements.
  std::vector<std::string> missing_capabilities() const;
};

// Deterministic in (size, seed). Throws PreconditionError when no acyclic,
// groundable graph with these counts exists.
DomainGraph build_domain(const DomainSize& size, std::uint64_t seed);

// Recomputes dependency edges from tool signatures.
std::vector<std::pair<std::size_t, std::size_t>> compute_dependency_edges(
    const std::vector<ToolSpec>& tools);

// Throws InvariantError naming the first violated invariant.
void validate_domain(const DomainGraph& domain);

// ---------------------------------------------------------------------------

using Record = std::map<std::string, Cell>;

struct Database {
  std::map<std::string, std::vector<Record>> tables;

  const Record* find(const std::string& kind, const Value& id) const;
  Record* find(const std::string& kind, const Value& id);
  bool operator==(const Database&) const = default;
};

Database generate_database(const DomainGraph& domain, std::uint64_t seed);
void validate_database(const DomainGraph& domain, const Database& db);

// Every value of a given type present in the database (deduplicated, sorted).
std::vector<Value> values_of_type(const Database& db, const FieldType& type);

}  // namespace narl::env

#endif  // NARL_ENV_DOMAIN_HPP_
