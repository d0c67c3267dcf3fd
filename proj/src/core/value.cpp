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

#include "narl/core/value.hpp"

#include "narl/core/error.hpp"

namespace narl {

std::string to_string(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  return std::get<std::string>(v);
}

nlohmann::json to_json(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  return std::get<std::string>(v);
}

Value value_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_string()) return j.get<std::string>();
  throw Error("value must be an integer or a string, got " + j.dump());
}

nlohmann::json to_json(const Cell& c) {
  if (!c.is_list) return to_json(c.value());
  auto arr = nlohmann::json::array();
  for (const auto& v : c.items) arr.push_back(to_json(v));
  if (c.truncated) arr.push_back(kTruncationMarker);
  return arr;
}

Cell cell_from_json(const nlohmann::json& j) {
  if (!j.is_array()) return Cell::scalar(value_from_json(j));
  Cell c;
  c.is_list = true;
  for (const auto& e : j) {
    if (e.is_string() && e.get<std::string>() == kTruncationMarker) {
      c.truncated = true;
      continue;
    }
    c.items.push_back(value_from_json(e));
  }
  return c;
}

}  // namespace narl
