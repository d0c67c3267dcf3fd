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

#include "narl/noise/noise.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "narl/core/error.hpp"

namespace narl::noise {

using narl::Cell;
using env::Segment;
using env::SegmentKind;
using env::ToolResult;
using nlohmann::json;

Side side_of(Category c) {
  switch (c) {
    case Category::kAmbiguous:
    case Category::kInconsistent:
    case Category::kUserRedundant:
    case Category::kOutOfScope:
      return Side::kUser;
    default:
      return Side::kTool;
  }
}

std::string name(Category c) {
  switch (c) {
    case Category::kAmbiguous: return "user.ambiguous";
    case Category::kInconsistent: return "user.inconsistent";
    case Category::kUserRedundant: return "user.redundant";
    case Category::kOutOfScope: return "user.out_of_scope";
    case Category::kFailure: return "tool.failure";
    case Category::kIncomplete: return "tool.incomplete";
    case Category::kMisleading: return "tool.misleading";
    case Category::kToolRedundant: return "tool.redundant";
  }
  return "?";
}

Category category_from_name(const std::string& s) {
  for (Category c : kTaxonomy)
    if (name(c) == s) return c;
  throw ConfigError("unknown noise category '" + s + "'");
}

std::size_t taxonomy_index(Category c) { return static_cast<std::size_t>(c); }

NoiseParams difficulty_params(Category c, int level) {
  if (level < 0) throw PreconditionError("difficulty_params: level must be >= 0");
  NoiseParams p;
  if (side_of(c) == Side::kTool) {
    p.p = std::min(0.15 * level, kMaxToolProbability);
    p.s = std::min(0.25 * level, 1.0);
    p.m = c == Category::kToolRedundant ? std::min(level, 4) : 0;
  } else {
    p.m = level;
    p.severity_tier = std::min(level, 3);
  }
  return p;
}

NoiseSpec make_spec(Category c, int level) { return NoiseSpec{c, level, difficulty_params(c, level)}; }

int clamp_level(Category c, int level, const env::TaskSpec& task) {
  if (c == Category::kAmbiguous || c == Category::kInconsistent)
    return std::min(level, static_cast<int>(task.goal_slots.size()));
  return level;
}

json to_json(const NoiseSpec& s) {
  return json{{"category", name(s.category)},
              {"level", s.level},
              {"p", s.params.p},
              {"s", s.params.s},
              {"m", s.params.m},
              {"severity_tier", s.params.severity_tier}};
}

NoiseSpec spec_from_json(const json& j) {
  return make_spec(category_from_name(j.at("category").get<std::string>()), j.at("level").get<int>());
}

json to_json(const NoiseRealization& r) {
  json overrides = json::array();
  for (const auto& o : r.overrides) {
    json jo{{"signature", o.signature}, {"fire", o.fire}, {"ignore_retry_guarantee", o.ignore_retry_guarantee}};
    if (o.occurrence) jo["occurrence"] = *o.occurrence;
    overrides.push_back(std::move(jo));
  }
  return json{{"spec", to_json(r.spec)}, {"seed", r.seed}, {"draw_log", r.draw_log}, {"overrides", overrides}};
}

NoiseRealization realization_from_json(const json& j) {
  try {
    NoiseRealization r;
    r.spec = spec_from_json(j.at("spec"));
    r.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("draw_log")) r.draw_log = j.at("draw_log").get<std::vector<json>>();
    for (const auto& jo : j.value("overrides", json::array())) {
      ToolOverride o;
      o.signature = jo.value("signature", std::string{});
      if (jo.contains("occurrence")) o.occurrence = jo.at("occurrence").get<int>();
      o.fire = jo.value("fire", true);
      o.ignore_retry_guarantee = jo.value("ignore_retry_guarantee", false);
      r.overrides.push_back(std::move(o));
    }
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("noise realization: ") + e.what());
  }
}

namespace {

// Every admissible value of a type: vocab for attributes, db contents otherwise.
std::vector<Value> value_pool(const env::DomainGraph& domain, const env::Database& db, const FieldType& type) {
  std::vector<Value> out = values_of_type(db, type);
  if (const auto* schema = domain.schema(type.kind))
    if (const auto* f = schema->field(type.field))
      out.insert(out.end(), f->vocab.begin(), f->vocab.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<Value> pick_other(Rng& rng, const std::vector<Value>& pool, const std::set<Value>& exclude) {
  std::vector<Value> options;
  for (const auto& v : pool)
    if (!exclude.count(v)) options.push_back(v);
  if (options.empty()) return std::nullopt;
  return options[rng.below(options.size())];
}

std::vector<std::size_t> reveal_positions(const env::UserMessage& m) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.segments.size(); ++i)
    if (m.segments[i].kind == SegmentKind::kReveal) out.push_back(i);
  return out;
}

}  // namespace

UserPerturbation perturb_interaction(const env::InteractionScript& script, const NoiseSpec& spec,
                                     std::uint64_t seed, const PerturbContext& ctx) {
  if (spec.side() != Side::kUser) throw PreconditionError("perturb_interaction: spec must be user-side");
  UserPerturbation out{script, NoiseRealization{spec, seed, {}, {}}};
  const int m = spec.params.m;
  if (m == 0 || script.turns.empty()) return out;

  Rng rng(seed);
  auto& turns = out.script.turns;
  auto& log = out.realization.draw_log;
  const auto& task = ctx.task;

  switch (spec.category) {
    case Category::kAmbiguous:
    case Category::kInconsistent: {
      auto pos = reveal_positions(turns[0]);
      if (static_cast<std::size_t>(m) > pos.size())
        throw PreconditionError("perturb_interaction: " + std::to_string(m) + " anomalies exceed " +
                                std::to_string(pos.size()) + " available goal slots");
      rng.shuffle(pos);
      pos.resize(static_cast<std::size_t>(m));
      std::sort(pos.begin(), pos.end());
      env::UserMessage correction;
      for (std::size_t i : pos) {
        Segment& seg = turns[0].segments[i];
        if (spec.category == Category::kAmbiguous) {
          seg.kind = SegmentKind::kWithheld;
          seg.value.reset();
          log.push_back({{"op", "withhold"}, {"slot", seg.slot}});
          continue;
        }
        const auto pool = value_pool(ctx.domain, ctx.db, *seg.type);
        const auto decoy = pick_other(rng, pool, {*seg.value});
        if (!decoy) throw PreconditionError("perturb_interaction: no decoy value for slot " + seg.slot);
        correction.segments.push_back({SegmentKind::kCorrection, seg.slot, seg.value, seg.type, {}});
        log.push_back({{"op", "decoy"}, {"slot", seg.slot}, {"decoy", narl::to_json(*decoy)}});
        seg.value = *decoy;
      }
      if (!correction.segments.empty()) turns.insert(turns.begin() + 1, std::move(correction));
      break;
    }
    case Category::kUserRedundant:
    case Category::kOutOfScope: {
      std::set<Value> exclude;
      for (const auto& [_, v] : task.goal_slots) exclude.insert(v);
      std::vector<FieldType> types;
      for (const auto& [_, t] : task.slot_types) types.push_back(t);
      const auto caps = ctx.domain.missing_capabilities();
      for (int i = 0; i < m; ++i) {
        const FieldType& type = types[rng.below(types.size())];
        const auto value = pick_other(rng, value_pool(ctx.domain, ctx.db, type), exclude);
        if (!value) break;
        exclude.insert(*value);
        Segment seg;
        seg.value = *value;
        seg.type = type;
        json entry{{"type", type.str()}, {"value", narl::to_json(*value)}};
        if (spec.category == Category::kUserRedundant) {
          seg.kind = SegmentKind::kDistractor;
          entry["op"] = "distractor";
        } else {
          seg.kind = SegmentKind::kOutOfScope;
          seg.text = caps[rng.below(caps.size())];
          entry["op"] = "out_of_scope";
          entry["capability"] = seg.text;
        }
        // Inserted at a random position among the opening segments.
        const std::size_t at = rng.below(turns[0].segments.size() + 1);
        turns[0].segments.insert(turns[0].segments.begin() + static_cast<std::ptrdiff_t>(at), std::move(seg));
        entry["position"] = at;
        log.push_back(std::move(entry));
      }
      break;
    }
    default:
      break;
  }
  return out;
}

namespace {

void apply_failure(ToolResult& r) {
  r.status = "429 rate limited";
  r.fields.clear();
  r.extra_types.clear();
}

bool apply_incomplete(ToolResult& r, double s, json& entry) {
  bool cut = false;
  for (auto& [key, cell] : r.fields) {
    if (!cell.is_list) continue;
    const std::size_t n = cell.items.size();
    const auto keep = static_cast<std::size_t>(std::ceil((1.0 - s) * static_cast<double>(n)));
    if (keep >= n) continue;
    cell.items.resize(keep);
    cell.truncated = true;
    entry["truncated"].push_back({{"field", key}, {"kept", keep}, {"of", n}});
    cut = true;
  }
  return cut;
}

FieldType field_type(const env::DomainGraph& domain, const ToolResult& r, const std::string& key) {
  if (auto it = r.extra_types.find(key); it != r.extra_types.end()) return it->second;
  const auto* tool = domain.tool(r.tool);
  if (tool == nullptr) throw InvariantError("perturb_tool_output: unknown tool " + r.tool);
  const auto* f = tool->result_field(key);
  if (f == nullptr) throw InvariantError("perturb_tool_output: undeclared field " + key);
  return f->type;
}

bool apply_misleading(ToolResult& r, const env::DomainGraph& domain, const env::Database& db, Rng& rng,
                      json& entry) {
  struct Candidate {
    std::string key;
    std::vector<Value> pool;
  };
  std::vector<Candidate> candidates;
  for (const auto& [key, cell] : r.fields) {
    if (key == "id" || cell.items.empty()) continue;
    auto pool = value_pool(domain, db, field_type(domain, r, key));
    const std::set<Value> present(cell.items.begin(), cell.items.end());
    std::erase_if(pool, [&](const Value& v) { return present.count(v) > 0; });
    if (!pool.empty()) candidates.push_back({key, std::move(pool)});
  }
  if (candidates.empty()) return false;
  const auto& c = candidates[rng.below(candidates.size())];
  auto& cell = r.fields[c.key];
  const std::size_t idx = rng.below(cell.items.size());
  const Value replacement = c.pool[rng.below(c.pool.size())];
  entry["field"] = c.key;
  entry["index"] = idx;
  entry["true"] = narl::to_json(cell.items[idx]);
  entry["shown"] = narl::to_json(replacement);
  cell.items[idx] = replacement;
  return true;
}

bool apply_redundant(ToolResult& r, const env::DomainGraph& domain, const env::Database& db, int m, Rng& rng,
                     json& entry) {
  std::vector<FieldType> types;
  for (const auto& schema : domain.entity_schemas)
    for (const auto& f : schema.fields)
      if (!f.is_list) types.push_back(f.type);
  bool added = false;
  for (int i = 0; i < m && !types.empty(); ++i) {
    const FieldType& type = types[rng.below(types.size())];
    const auto pool = value_pool(domain, db, type);
    if (pool.empty()) continue;
    std::string key = "related_" + type.kind + "_" + type.field;
    for (int n = 2; r.fields.count(key); ++n) key = "related_" + type.kind + "_" + type.field + "_" + std::to_string(n);
    const Value v = pool[rng.below(pool.size())];
    r.fields[key] = Cell::scalar(v);
    r.extra_types[key] = type;
    entry["added"].push_back({{"field", key}, {"type", type.str()}, {"value", narl::to_json(v)}});
    added = true;
  }
  return added;
}

}  // namespace

namespace {

// Shared body of perturb_tool_output; `forced` replaces the probability draw.
void perturb_impl(ToolResult& result, const NoiseSpec& spec, const env::ToolCall& call, env::EnvState& env,
                  Rng& rng, const env::DomainGraph& domain, std::optional<bool> forced, bool ignore_heal,
                  json entry) {
  if (spec.side() != Side::kTool) throw PreconditionError("perturb_tool_output: spec must be tool-side");
  if (!result.ok()) throw PreconditionError("perturb_tool_output: result must have status ok");
  const std::string sig = env::signature(call);
  entry["call"] = sig;
  auto& pending = env.pending_noise;

  if (!ignore_heal && pending.heal_signatures.erase(sig)) {
    entry["healed"] = true;
    pending.draw_log.push_back(std::move(entry));
    return;
  }
  const double u = rng.uniform();
  const bool fire = forced ? *forced : u < spec.params.p;
  entry["u"] = u;
  entry["fired"] = fire;
  if (!fire) {
    pending.draw_log.push_back(std::move(entry));
    return;
  }

  bool effective = true;
  switch (spec.category) {
    case Category::kFailure:
      apply_failure(result);
      break;
    case Category::kIncomplete:
      effective = apply_incomplete(result, spec.params.s, entry);
      break;
    case Category::kMisleading:
      effective = apply_misleading(result, domain, env.db, rng, entry);
      break;
    case Category::kToolRedundant:
      effective = apply_redundant(result, domain, env.db, spec.params.m, rng, entry);
      break;
    default:
      break;
  }
  entry["effective"] = effective;
  if (effective) pending.heal_signatures.insert(sig);
  pending.draw_log.push_back(std::move(entry));
}

}  // namespace

void perturb_tool_output(ToolResult& result, const NoiseSpec& spec, const env::ToolCall& call,
                         env::EnvState& env, Rng& rng, const env::DomainGraph& domain) {
  perturb_impl(result, spec, call, env, rng, domain, std::nullopt, false, json::object());
}

ToolNoise::ToolNoise(const env::DomainGraph& domain, NoiseSpec spec, std::uint64_t seed,
                     std::vector<ToolOverride> overrides)
    : domain_(domain), spec_(spec), seed_(seed), overrides_(std::move(overrides)) {
  if (spec_.side() != Side::kTool) throw PreconditionError("ToolNoise: spec must be tool-side");
}

void ToolNoise::apply(ToolResult& result, const env::ToolCall& call, env::EnvState& env) const {
  const std::string sig = env::signature(call);
  int occurrence = 0;
  for (const auto& h : env.history)
    if (const auto* c = std::get_if<env::ToolCall>(&h.action); c && *c == call) ++occurrence;

  std::optional<bool> forced;
  bool ignore_heal = false;
  for (const auto& o : overrides_) {
    if (!o.signature.empty() && o.signature != sig) continue;
    if (o.occurrence && *o.occurrence != occurrence) continue;
    forced = o.fire;
    ignore_heal = o.ignore_retry_guarantee;
    break;
  }
  Rng rng(derive_seed(seed_, {hash_string(sig), static_cast<std::uint64_t>(occurrence)}));
  perturb_impl(result, spec_, call, env, rng, domain_, forced, ignore_heal, json{{"occurrence", occurrence}});
}

int count_anomalies(const std::vector<json>& draw_log) {
  int n = 0;
  for (const auto& e : draw_log)
    if (e.contains("op") || (e.value("fired", false) && e.value("effective", false))) ++n;
  return n;
}

SolvabilityVerdict check_solvable(const env::DomainGraph& domain, const env::SynthesizedTask& task,
                                  const NoiseRealization& realization, int max_depth) {
  const auto& spec = realization.spec;
  SolvabilityVerdict out;
  if (spec.side() == Side::kUser) {
    const auto perturbed = perturb_interaction(task.task.interaction_script, spec, realization.seed,
                                               PerturbContext{domain, task.initial, task.task});
    const env::EpisodeContext ctx{domain, task.task, perturbed.script};
    out.oracle = env::oracle_solve(ctx, task.initial, max_depth);
    out.draw_log = perturbed.realization.draw_log;
  } else {
    const env::EpisodeContext ctx{domain, task.task, task.task.interaction_script};
    ToolNoise filter(domain, realization);
    out.oracle = env::oracle_solve(ctx, task.initial, max_depth, &filter);
    if (out.oracle.success) {
      env::EnvState s = env::make_env(task.initial);
      env::begin_episode(s, ctx);
      for (const auto& a : out.oracle.witness) env::advance(s, a, ctx, &filter);
      out.draw_log = s.pending_noise.draw_log;
    }
  }
  out.solvable = out.oracle.success;
  out.anomalies = count_anomalies(out.draw_log);
  return out;
}

}  // namespace narl::noise
