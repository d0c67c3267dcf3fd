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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "narl/core/error.hpp"
#include "narl/env/json_io.hpp"
#include "narl/env/knowledge.hpp"
#include "narl/noise/noise.hpp"
#include "test_util.hpp"

namespace narl::noise {
namespace {

using env::SegmentKind;

const env::DomainGraph& domain() {
  static const env::DomainGraph d = env::build_domain(env::DomainSize{}, 1);
  return d;
}

PerturbContext pctx(const env::SynthesizedTask& st) { return {domain(), st.initial, st.task}; }

TEST(DifficultyParams, LevelZeroIsIdentity) {
  for (Category c : kTaxonomy) {
    const auto p = difficulty_params(c, 0);
    EXPECT_EQ(p.p, 0.0) << name(c);
    EXPECT_EQ(p.m, 0) << name(c);
  }
}

TEST(DifficultyParams, FailureProbabilityRamp) {
  EXPECT_DOUBLE_EQ(difficulty_params(Category::kFailure, 2).p, 0.15 * 2);
  EXPECT_DOUBLE_EQ(difficulty_params(Category::kFailure, 2).p, 0.30);
  EXPECT_DOUBLE_EQ(difficulty_params(Category::kFailure, 10).p, 0.60);
  EXPECT_DOUBLE_EQ(difficulty_params(Category::kIncomplete, 2).s, 0.5);
  EXPECT_DOUBLE_EQ(difficulty_params(Category::kIncomplete, 9).s, 1.0);
}

TEST(DifficultyParams, UserSideCountsAndTiers) {
  const auto p = difficulty_params(Category::kAmbiguous, 5);
  EXPECT_EQ(p.m, 5);
  EXPECT_EQ(p.severity_tier, 3);
  EXPECT_EQ(p.p, 0.0);
}

TEST(DifficultyParams, MonotoneAndBounded) {
  for (Category c : kTaxonomy) {
    NoiseParams prev = difficulty_params(c, 0);
    for (int level = 1; level <= 20; ++level) {
      const auto p = difficulty_params(c, level);
      EXPECT_GE(p.p, prev.p);
      EXPECT_GE(p.s, prev.s);
      EXPECT_GE(p.m, prev.m);
      EXPECT_GE(p.severity_tier, prev.severity_tier);
      EXPECT_LE(p.p, 0.6);
      EXPECT_GE(p.s, 0.0);
      EXPECT_LE(p.s, 1.0);
      prev = p;
    }
  }
  EXPECT_THROW(difficulty_params(Category::kFailure, -1), PreconditionError);
}

TEST(Taxonomy, NamesRoundTrip) {
  std::set<std::string> names;
  for (Category c : kTaxonomy) {
    names.insert(name(c));
    EXPECT_EQ(category_from_name(name(c)), c);
    EXPECT_EQ(spec_from_json(to_json(make_spec(c, 3))), make_spec(c, 3));
  }
  EXPECT_EQ(names.size(), 8u);
  EXPECT_THROW(category_from_name("user.bogus"), ConfigError);
}

TEST(PerturbInteraction, LevelZeroReturnsScriptUnchanged) {
  const auto st = env::synthesize_task(domain(), 4, 2);
  for (Category c : kTaxonomy) {
    if (side_of(c) != Side::kUser) continue;
    const auto out = perturb_interaction(st.task.interaction_script, make_spec(c, 0), 5, pctx(st));
    EXPECT_EQ(out.script, st.task.interaction_script) << name(c);
    EXPECT_TRUE(out.realization.draw_log.empty());
  }
}

TEST(PerturbInteraction, RejectsToolSpec) {
  const auto st = env::synthesize_task(domain(), 2, 2);
  EXPECT_THROW(perturb_interaction(st.task.interaction_script, make_spec(Category::kFailure, 1), 0, pctx(st)),
               PreconditionError);
}

TEST(PerturbInteraction, AmbiguousWithholdsOneSlotRecoverableByAsk) {
  const auto st = env::synthesize_task(domain(), 3, 1);
  ASSERT_EQ(st.task.goal_slots.size(), 2u);
  const auto out = perturb_interaction(st.task.interaction_script, make_spec(Category::kAmbiguous, 1), 8, pctx(st));

  // Diff the opening turns segment by segment.
  const auto& before = st.task.interaction_script.turns[0].segments;
  const auto& after = out.script.turns[0].segments;
  ASSERT_EQ(before.size(), after.size());
  std::string withheld;
  int changed = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before[i] == after[i]) continue;
    ++changed;
    EXPECT_EQ(before[i].kind, SegmentKind::kReveal);
    EXPECT_EQ(after[i].kind, SegmentKind::kWithheld);
    EXPECT_FALSE(after[i].value.has_value());
    withheld = after[i].slot;
  }
  EXPECT_EQ(changed, 1);
  EXPECT_EQ(out.script.clarification_table, st.task.interaction_script.clarification_table);

  const env::EpisodeContext ctx{domain(), st.task, out.script};
  env::EnvState s = env::make_env(st.initial);
  env::begin_episode(s, ctx);
  const auto actions = env::enumerate_actions(s, ctx);
  EXPECT_NE(std::find(actions.begin(), actions.end(), env::Action{env::AskUser{withheld}}), actions.end());

  const auto verdict = check_solvable(domain(), st, out.realization, st.task.turn_budget);
  ASSERT_TRUE(verdict.solvable);
  EXPECT_EQ(verdict.oracle.witness.size(), static_cast<std::size_t>(st.task.chain_length() + 2));
}

TEST(PerturbInteraction, AmbiguousBeyondSlotCountRejected) {
  const auto st = env::synthesize_task(domain(), 3, 1);
  const int too_many = static_cast<int>(st.task.goal_slots.size()) + 1;
  EXPECT_THROW(perturb_interaction(st.task.interaction_script, make_spec(Category::kAmbiguous, too_many), 0, pctx(st)),
               PreconditionError);
  EXPECT_THROW(
      perturb_interaction(st.task.interaction_script, make_spec(Category::kInconsistent, too_many), 0, pctx(st)),
      PreconditionError);
  EXPECT_EQ(clamp_level(Category::kAmbiguous, too_many, st.task), too_many - 1);
}

TEST(PerturbInteraction, InconsistentDecoyPrecedesCorrection) {
  const auto st = env::synthesize_task(domain(), 3, 1);
  const auto out = perturb_interaction(st.task.interaction_script, make_spec(Category::kInconsistent, 1), 4, pctx(st));
  ASSERT_EQ(out.script.turns.size(), st.task.interaction_script.turns.size() + 1);

  // Scan the script in delivery order; the last statement per slot wins.
  std::map<std::string, std::vector<Value>> stated;
  for (const auto& turn : out.script.turns)
    for (const auto& seg : turn.segments)
      if ((seg.kind == SegmentKind::kReveal || seg.kind == SegmentKind::kCorrection) && seg.value)
        stated[seg.slot].push_back(*seg.value);
  int decoys = 0;
  for (const auto& [slot, truth] : st.task.goal_slots) {
    ASSERT_TRUE(stated.count(slot));
    EXPECT_EQ(stated[slot].back(), truth);
    if (stated[slot].size() == 2) {
      ++decoys;
      EXPECT_NE(stated[slot].front(), truth);
      // Decoy is type-valid.
      const auto pool = env::values_of_type(st.initial, st.task.slot_types.at(slot));
      const auto& vocab = domain().schema(st.task.slot_types.at(slot).kind)->field(st.task.slot_types.at(slot).field)->vocab;
      const bool valid = std::find(pool.begin(), pool.end(), stated[slot].front()) != pool.end() ||
                         std::find(vocab.begin(), vocab.end(), stated[slot].front()) != vocab.end();
      EXPECT_TRUE(valid);
    }
  }
  EXPECT_EQ(decoys, 1);
  EXPECT_TRUE(check_solvable(domain(), st, out.realization, st.task.turn_budget).solvable);
}

TEST(PerturbInteraction, RedundantAddsTypedDistractors) {
  const auto st = env::synthesize_task(domain(), 4, 6);
  const auto out = perturb_interaction(st.task.interaction_script, make_spec(Category::kUserRedundant, 3), 1, pctx(st));
  std::set<Value> goals;
  for (const auto& [_, v] : st.task.goal_slots) goals.insert(v);
  int distractors = 0;
  for (const auto& seg : out.script.turns[0].segments) {
    if (seg.kind != SegmentKind::kDistractor) continue;
    ++distractors;
    ASSERT_TRUE(seg.value && seg.type);
    EXPECT_FALSE(goals.count(*seg.value));
  }
  EXPECT_EQ(distractors, 3);
  EXPECT_EQ(out.realization.draw_log.size(), 3u);
}

TEST(PerturbInteraction, OutOfScopeNamesMissingCapabilities) {
  const auto st = env::synthesize_task(domain(), 2, 6);
  const auto out = perturb_interaction(st.task.interaction_script, make_spec(Category::kOutOfScope, 2), 1, pctx(st));
  int requests = 0;
  for (const auto& seg : out.script.turns[0].segments) {
    if (seg.kind != SegmentKind::kOutOfScope) continue;
    ++requests;
    EXPECT_EQ(domain().tool(seg.text), nullptr) << seg.text;
  }
  EXPECT_EQ(requests, 2);
}

TEST(PerturbInteraction, ObjectivePreservedAndDeterministic) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto st = env::synthesize_task(domain(), 2 + static_cast<int>(seed % 4), seed);
    const auto before = env::fixture_to_json(env::Fixture{domain(), {st}}).dump();
    for (Category c : kTaxonomy) {
      if (side_of(c) != Side::kUser) continue;
      const auto spec = make_spec(c, clamp_level(c, 1 + static_cast<int>(seed % 3), st.task));
      const auto a = perturb_interaction(st.task.interaction_script, spec, seed * 31, pctx(st));
      const auto b = perturb_interaction(st.task.interaction_script, spec, seed * 31, pctx(st));
      EXPECT_EQ(a.script, b.script);
      EXPECT_EQ(a.realization.draw_log, b.realization.draw_log);
    }
    EXPECT_EQ(env::fixture_to_json(env::Fixture{domain(), {st}}).dump(), before);
  }
}

// A ToolResult with a 4-item list, built by hand.
env::ToolResult four_item_result() {
  env::ToolResult r;
  r.tool = "find_user_by_email";
  r.fields["matches"] = Cell::list({std::string("U1"), std::string("U2"), std::string("U3"), std::string("U4")});
  return r;
}

TEST(PerturbToolOutput, IncompleteHalfSeverityKeepsTwoOfFour) {
  NoiseSpec spec{Category::kIncomplete, 2, {1.0, 0.5, 0, 0}};
  env::EnvState s;
  Rng rng(1);
  auto r = four_item_result();
  const env::ToolCall call{r.tool, {{"email", std::string("a@x")}}};
  perturb_tool_output(r, spec, call, s, rng, domain());
  const auto& cell = r.fields.at("matches");
  ASSERT_EQ(cell.items.size(), 2u);  // ceil((1 - 0.5) * 4)
  EXPECT_TRUE(cell.truncated);
  const auto j = narl::to_json(cell);
  ASSERT_EQ(j.size(), 3u);
  EXPECT_EQ(j.back(), kTruncationMarker);
  EXPECT_TRUE(s.pending_noise.heal_signatures.count(env::signature(call)));
}

TEST(PerturbToolOutput, ZeroProbabilityIsIdentity) {
  const NoiseSpec spec = make_spec(Category::kFailure, 0);
  env::EnvState s;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    auto r = four_item_result();
    perturb_tool_output(r, spec, env::ToolCall{r.tool, {}}, s, rng, domain());
    EXPECT_EQ(r, four_item_result());
  }
}

TEST(PerturbToolOutput, RejectsErrorResultAndUserSpec) {
  env::EnvState s;
  Rng rng(0);
  auto r = four_item_result();
  EXPECT_THROW(perturb_tool_output(r, make_spec(Category::kAmbiguous, 1), {}, s, rng, domain()), PreconditionError);
  r.status = "not_found";
  EXPECT_THROW(perturb_tool_output(r, make_spec(Category::kFailure, 1), {}, s, rng, domain()), PreconditionError);
}

// Runs a call twice with the first occurrence forced to fire.
std::pair<env::ToolResult, env::ToolResult> perturbed_then_retry(const env::SynthesizedTask& st, Category c,
                                                                 const env::ToolCall& call) {
  const ToolNoise filter(domain(), make_spec(c, 4), 99, {{env::signature(call), 0, true, false}});
  const env::EpisodeContext ctx{domain(), st.task, st.task.interaction_script};
  env::EnvState s = env::make_env(st.initial);
  env::begin_episode(s, ctx);
  // Replay the chain prefix so the call is valid, then call it twice.
  for (const auto& c2 : st.task.reference_chain) {
    if (c2 == call) break;
    env::advance(s, c2, ctx);
  }
  auto first = std::get<env::ToolResult>(env::advance(s, call, ctx, &filter));
  auto second = std::get<env::ToolResult>(env::advance(s, call, ctx, &filter));
  return {first, second};
}

TEST(PerturbToolOutput, EveryCategoryRecoversOnIdenticalRetry) {
  for (Category c : kTaxonomy) {
    if (side_of(c) != Side::kTool) continue;
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      const auto st = env::synthesize_task(domain(), 2 + static_cast<int>(seed % 4), seed);
      for (const auto& call : st.task.reference_chain) {
        env::Database scratch = st.initial;
        for (const auto& c2 : st.task.reference_chain) {
          if (c2 == call) break;
          env::execute_tool(domain(), scratch, c2);
        }
        const env::ToolResult truth = env::execute_tool(domain(), scratch, call);
        const auto [first, second] = perturbed_then_retry(st, c, call);
        EXPECT_EQ(second, truth) << name(c) << " " << env::signature(call);
        if (c == Category::kFailure) {
          EXPECT_EQ(first.status, "429 rate limited");
          EXPECT_TRUE(first.fields.empty());
        }
      }
    }
  }
}

TEST(PerturbToolOutput, MisleadingSwapsOneFieldForSameTypeValue) {
  const auto st = env::synthesize_task(domain(), 3, 1);
  const auto& call = st.task.reference_chain[1];  // a get
  env::Database scratch = st.initial;
  env::execute_tool(domain(), scratch, st.task.reference_chain[0]);
  const auto truth = env::execute_tool(domain(), scratch, call);
  const auto [first, second] = perturbed_then_retry(st, Category::kMisleading, call);
  int diffs = 0;
  for (const auto& [key, cell] : truth.fields) {
    if (first.fields.at(key) == cell) continue;
    ++diffs;
    EXPECT_NE(key, "id");
    const auto* f = domain().tool(call.tool)->result_field(key);
    std::vector<Value> pool = env::values_of_type(st.initial, f->type);
    pool.insert(pool.end(), f->vocab.begin(), f->vocab.end());
    for (const auto& v : first.fields.at(key).items)
      EXPECT_NE(std::find(pool.begin(), pool.end(), v), pool.end());
  }
  EXPECT_EQ(diffs, 1);
  EXPECT_EQ(second, truth);
}

TEST(PerturbToolOutput, RedundantAppendsTypedExtraFields) {
  const auto st = env::synthesize_task(domain(), 3, 1);
  const auto& call = st.task.reference_chain[0];
  const auto [first, second] = perturbed_then_retry(st, Category::kToolRedundant, call);
  EXPECT_EQ(first.extra_types.size(), 4u);  // m = min(level, 4) at level 4
  for (const auto& [key, type] : first.extra_types) {
    ASSERT_TRUE(first.fields.count(key));
    EXPECT_EQ(domain().tool(call.tool)->result_field(key), nullptr);
  }
  EXPECT_TRUE(second.extra_types.empty());
}

TEST(PerturbToolOutput, ToolDrawLogDeterministic) {
  const auto st = env::synthesize_task(domain(), 5, 3);
  const env::EpisodeContext ctx{domain(), st.task, st.task.interaction_script};
  for (Category c : kTaxonomy) {
    if (side_of(c) != Side::kTool) continue;
    const ToolNoise filter(domain(), make_spec(c, 3), 1234);
    const auto a = narl::testing::replay_reference(ctx, st.initial, &filter);
    const auto b = narl::testing::replay_reference(ctx, st.initial, &filter);
    EXPECT_EQ(a.pending_noise.draw_log, b.pending_noise.draw_log);
    EXPECT_EQ(a.pending_noise.draw_log.size(), st.task.reference_chain.size());
    // The db is never touched by the noise layer.
    EXPECT_EQ(a.db, st.task.target_state);
  }
}

TEST(CheckSolvable, CleanTaskSolvable) {
  const auto st = env::synthesize_task(domain(), 4, 10);
  for (Category c : kTaxonomy) {
    const auto v = check_solvable(domain(), st, NoiseRealization{make_spec(c, 0), 1, {}, {}}, st.task.turn_budget);
    EXPECT_TRUE(v.solvable) << name(c);
    EXPECT_EQ(v.oracle.witness.size(), static_cast<std::size_t>(st.task.chain_length() + 1));
    EXPECT_EQ(v.anomalies, 0);
  }
}

TEST(CheckSolvable, AmbiguousUpToSlotCountSolvable) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto st = env::synthesize_task(domain(), 2 + static_cast<int>(seed % 4), seed);
    for (int level = 1; level <= static_cast<int>(st.task.goal_slots.size()); ++level) {
      const auto v = check_solvable(domain(), st, NoiseRealization{make_spec(Category::kAmbiguous, level), seed, {}, {}},
                                    st.task.turn_budget);
      EXPECT_TRUE(v.solvable);
      EXPECT_EQ(v.anomalies, level);
    }
  }
}

TEST(CheckSolvable, HostileRealizationCaught) {
  const auto st = env::synthesize_task(domain(), 3, 1);
  NoiseRealization hostile{make_spec(Category::kFailure, 1), 0, {}, {{"", std::nullopt, true, true}}};
  const auto v = check_solvable(domain(), st, hostile, st.task.turn_budget);
  EXPECT_FALSE(v.solvable);
  EXPECT_GT(v.oracle.explored, 0u);
}

TEST(CheckSolvable, SampledRealizationsWithinDepthBound) {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 48; ++seed) {
    const Category c = kTaxonomy[seed % kTaxonomy.size()];
    const auto st = env::synthesize_task(domain(), 2 + static_cast<int>((seed / 8) % 4), 500 + seed);
    const int level = clamp_level(c, 1 + static_cast<int>(seed % 4), st.task);
    const auto v = check_solvable(domain(), st, NoiseRealization{make_spec(c, level), seed, {}, {}},
                                  st.task.turn_budget);
    ASSERT_TRUE(v.solvable) << name(c) << " seed " << seed;
    EXPECT_LE(static_cast<int>(v.oracle.witness.size()), st.task.chain_length() + 2 * v.anomalies + 1)
        << name(c) << " seed " << seed;
    ++checked;
  }
  EXPECT_EQ(checked, 48);
}

}  // namespace
}  // namespace narl::noise
