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

#ifndef NARL_CORE_VALUE_HPP_
#define NARL_CORE_VALUE_HPP_

#include <compare>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace narl {

// Database cell scalar. Integers order before strings.
using Value = std::variant<std::int64_t, std::string>;

std::string to_string(const Value& v);
nlohmann::json to_json(const Value& v);
Value value_from_json(const nlohmann::json& j);

// Entity-field type tag: which (kind, field) a value belongs to.
struct FieldType {
  std::string kind;
  std::string field;

  auto operator<=>(const FieldType&) const = default;
  std::string str() const { return kind + "." + field; }
};

// A stored or returned field: a scalar (exactly one item) or a list.
// `truncated` marks a list cut short by tool-side noise.
struct Cell {
  bool is_list = false;
  bool truncated = false;
  std::vector<Value> items;

  static Cell scalar(Value v) { return Cell{false, false, {std::move(v)}}; }
  static Cell list(std::vector<Value> vs) { return Cell{true, false, std::move(vs)}; }

  const Value& value() const { return items.front(); }
  bool operator==(const Cell&) const = default;
};

inline constexpr const char* kTruncationMarker = "...<truncated>";

nlohmann::json to_json(const Cell& c);
Cell cell_from_json(const nlohmann::json& j);

}  // namespace narl

#endif  // NARL_CORE_VALUE_HPP_
