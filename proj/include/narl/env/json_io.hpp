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

#ifndef NARL_ENV_JSON_IO_HPP_
#define NARL_ENV_JSON_IO_HPP_

#include <string>
#include <vector>

#include <json.hpp>

#include "narl/env/domain.hpp"
#include "narl/env/env.hpp"
#include "narl/env/task.hpp"

namespace narl::env {

using nlohmann::json;

inline constexpr int kFixtureSchemaVersion = 1;

json to_json(const FieldType& t);
FieldType field_type_from_json(const json& j);

json to_json(const DomainGraph& d);
DomainGraph domain_from_json(const json& j);

json to_json(const Database& db);
Database database_from_json(const json& j);

json to_json(const Action& a);
Action action_from_json(const json& j);

json to_json(const Observation& o);
Observation observation_from_json(const json& j);

json to_json(const UserMessage& m);
UserMessage user_message_from_json(const json& j);

json to_json(const InteractionScript& s);
InteractionScript script_from_json(const json& j);

json to_json(const TaskSpec& t);
TaskSpec task_from_json(const json& j);

struct Fixture {
  DomainGraph domain;
  std::vector<SynthesizedTask> tasks;
};

// Versioned document with top-level keys schema_version, domain, tasks.
json fixture_to_json(const Fixture& f);
Fixture fixture_from_json(const json& j);
Fixture load_fixture(const std::string& path);
void save_fixture(const Fixture& f, const std::string& path);

}  // namespace narl::env

#endif  // NARL_ENV_JSON_IO_HPP_
