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

#ifndef NARL_NOISE_NOISE_HPP_
#define NARL_NOISE_NOISE_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "narl/core/rng.hpp"
#include "narl/env/env.hpp"
#include "narl/env/oracle.hpp"

namespace narl::noise {

enum class Side { kUser, kTool };

// Taxonomy order. Scheduling and allocation iterate in exactly this order.
enum class Category {
  kAmbiguous,
  kInconsistent,
  kUserRedundant,
  kOutOfScope,
  kFailure,
  kIncomplete,
  kMisleading,
  kToolRedundant,
};

inline constexpr std::array<Category, 8> kTaxonomy = {
    Category::kAmbiguous, Category::kInconsistent, Category::kUserRedundant, Category::kOutOfScope,
    Category::kFailure,   Category::kIncomplete,   Category::kMisleading,    Category::kToolRedundant,
};

Side side_of(Category c);
std::string name(Category c);  // e.g. "user.ambiguous", "tool.failure"
Category category_from_name(const std::string& s);
std::size_t taxonomy_index(Category c);

struct NoiseParams {
  double p = 0.0;         // per-call perturbation probability (tool side)
  double s = 0.0;         // severity in [0, 1] (tool side)
  int m = 0;              // anomaly count
  int severity_tier = 0;  // user side, min(level, 3)

  bool operator==(const NoiseParams&) const = default;
};

inline constexpr double kMaxToolProbability = 0.6;

// Tool side: p = min(0.15 level, 0.6), s = min(0.25 level, 1), m = min(level, 4).
// User side: m = level, severity tier = min(level, 3). Monotone in level.
NoiseParams difficulty_params(Category c, int level);

struct NoiseSpec {
  Category category = Category::kFailure;
  int level = 0;
  NoiseParams params;

  Side side() const { return side_of(category); }
  bool operator==(const NoiseSpec&) const = default;
};

NoiseSpec make_spec(Category c, int level);

// Largest level a user-side category can be applied at on this task.
int clamp_level(Category c, int level, const env::TaskSpec& task);

// Forced tool-side decision, used for hand-built adversarial realizations.
struct ToolOverride {
  std::string signature;          // empty: every call
  std::optional<int> occurrence;  // empty: every occurrence
  bool fire = true;
  bool ignore_retry_guarantee = false;
};

struct NoiseRealization {
  NoiseSpec spec;
  std::uint64_t seed = 0;
  std::vector<nlohmann::json> draw_log;
  std::vector<ToolOverride> overrides;
};

nlohmann::json to_json(const NoiseSpec& s);
NoiseSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NoiseRealization& r);
// Throws ConfigError on a malformed document.
NoiseRealization realization_from_json(const nlohmann::json& j);

struct PerturbContext {
  const env::DomainGraph& domain;
  const env::Database& db;
  const env::TaskSpec& task;
};

struct UserPerturbation {
  env::InteractionScript script;
  NoiseRealization realization;
};

// User-side noise, applied once before the episode. Goal slots and the
// target state are never touched. Level 0 returns the script unchanged.
UserPerturbation perturb_interaction(const env::InteractionScript& script, const NoiseSpec& spec,
                                     std::uint64_t seed, const PerturbContext& ctx);

// Tool-side noise on one ok ToolResult. Consumes a pending heal flag for this
// call signature if one exists; otherwise fires with probability p. Every
// effective perturbation sets a heal flag so the next identical call returns
// the true result. Never touches env.db.
// The domain supplies type-valid replacement and distractor values.
void perturb_tool_output(env::ToolResult& result, const NoiseSpec& spec, const env::ToolCall& call,
                         env::EnvState& env, Rng& rng, const env::DomainGraph& domain);

// ToolResultFilter over perturb_tool_output with a per-call rng derived from
// (seed, call signature, occurrence), so a realization is a fixed function of
// the action sequence.
class ToolNoise : public env::ToolResultFilter {
 public:
  ToolNoise(const env::DomainGraph& domain, NoiseSpec spec, std::uint64_t seed,
            std::vector<ToolOverride> overrides = {});
  ToolNoise(const env::DomainGraph& domain, const NoiseRealization& r)
      : ToolNoise(domain, r.spec, r.seed, r.overrides) {}

  void apply(env::ToolResult& result, const env::ToolCall& call, env::EnvState& env) const override;

 private:
  const env::DomainGraph& domain_;
  NoiseSpec spec_;
  std::uint64_t seed_;
  std::vector<ToolOverride> overrides_;
};

struct SolvabilityVerdict {
  bool solvable = false;
  env::OracleResult oracle;
  // Draws along the witness (user side: the script perturbation log).
  std::vector<nlohmann::json> draw_log;
  int anomalies = 0;  // effective perturbations along the witness
};

// Number of effective perturbations recorded in a draw log.
int count_anomalies(const std::vector<nlohmann::json>& draw_log);

// Replays the realization (user side: regenerates the perturbed script from
// its seed; tool side: fixed per-call draws) and runs the BFS oracle.
SolvabilityVerdict check_solvable(const env::DomainGraph& domain, const env::SynthesizedTask& task,
                                  const NoiseRealization& realization, int max_depth);

}  // namespace narl::noise

#endif  // NARL_NOISE_NOISE_HPP_
