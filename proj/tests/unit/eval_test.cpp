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

#include <algorithm>

#include "fixtures.hpp"
#include "narl/core/error.hpp"
#include "narl/eval/metrics.hpp"

namespace narl::eval {
namespace {

std::vector<EvalRecord> table(const std::vector<std::vector<int>>& rows, const std::string& prefix = "t") {
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < rows.size(); ++i) out.push_back({prefix + std::to_string(i), rows[i]});
  return out;
}

std::vector<EvalRecord> random_table(Rng& rng, std::size_t tasks, std::size_t k, double p) {
  std::vector<std::vector<int>> rows(tasks, std::vector<int>(k));
  for (auto& r : rows)
    for (auto& x : r) x = rng.bernoulli(p) ? 1 : 0;
  return table(rows);
}

TEST(AvgPassAtK, Examples) {
  EXPECT_DOUBLE_EQ(avg_at_k(table({{1, 0, 0, 0}})), 25.0);
  EXPECT_DOUBLE_EQ(pass_at_k(table({{1, 0, 0, 0}})), 100.0);
  EXPECT_DOUBLE_EQ(avg_at_k(table({{1, 1, 1, 1}, {0, 0, 0, 0}})), 50.0);
  EXPECT_DOUBLE_EQ(pass_at_k(table({{1, 1, 1, 1}, {0, 0, 0, 0}})), 50.0);
  EXPECT_DOUBLE_EQ(pass_at_k(table({{0, 0, 0, 0}})), 0.0);
}

TEST(AvgPassAtK, Errors) {
  EXPECT_THROW(avg_at_k({}), PreconditionError);
  EXPECT_THROW(pass_at_k({}), PreconditionError);
  EXPECT_THROW(avg_at_k(table({{1, 0}, {1}})), PreconditionError);
  EXPECT_THROW(avg_at_k(table({{2, 0}})), PreconditionError);
}

TEST(AvgPassAtK, MatchesCountingOracle) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const auto recs = random_table(rng, 1 + rng.below(12), 1 + rng.below(6), rng.uniform());
    long hits = 0, solved = 0;
    for (const auto& r : recs) {
      int any = 0;
      for (int x : r.rewards) {
        hits += x;
        any |= x;
      }
      solved += any;
    }
    const double k = static_cast<double>(recs[0].rewards.size()), n = static_cast<double>(recs.size());
    EXPECT_DOUBLE_EQ(avg_at_k(recs), 100.0 * hits / (k * n));
    EXPECT_DOUBLE_EQ(pass_at_k(recs), 100.0 * solved / n);
    EXPECT_GE(pass_at_k(recs), avg_at_k(recs));
  }
}

TEST(AvgPassAtK, ReorderingInvariance) {
  Rng rng(2);
  auto recs = random_table(rng, 9, 4, 0.4);
  const double a = avg_at_k(recs), p = pass_at_k(recs);
  std::reverse(recs.begin(), recs.end());
  for (auto& r : recs) std::reverse(r.rewards.begin(), r.rewards.end());
  EXPECT_DOUBLE_EQ(avg_at_k(recs), a);
  EXPECT_DOUBLE_EQ(pass_at_k(recs), p);
}

TEST(AvgPassAtK, SingleRunIsSuccessRate) {
  const auto recs = table({{1}, {0}, {1}, {1}});
  EXPECT_DOUBLE_EQ(avg_at_k(recs), 75.0);
  EXPECT_DOUBLE_EQ(pass_at_k(recs), 75.0);
}

TEST(RobustnessReport, IdenticalSettingsZeroGaps) {
  const auto recs = table({{1, 0}, {0, 0}, {1, 1}});
  const auto rep = robustness_report(recs, {{"tool.failure", recs}, {"user.ambiguous", recs}});
  EXPECT_EQ(rep.avg_gap(), 0.0);
  EXPECT_EQ(rep.pass_gap(), 0.0);
  ASSERT_EQ(rep.noisy.size(), 2u);
}

TEST(RobustnessReport, SimpleGap) {
  const auto ideal = table({{1, 0}, {1, 0}});  // 50
  const auto n2 = table({{1, 0}, {0, 0}});  // 25
  EXPECT_DOUBLE_EQ(robustness_report(ideal, {{"tool.failure", n2}}).avg_gap(), 25.0);
  const auto ideal10 = table({{1, 1, 1, 1, 1, 0, 0, 0, 0, 0}});
  const auto noisy10 = table({{1, 1, 1, 0, 0, 0, 0, 0, 0, 0}});
  EXPECT_DOUBLE_EQ(robustness_report(ideal10, {{"user.redundant", noisy10}}).avg_gap(), 20.0);
}

// 2500 tasks x 4 runs: 3531 and 2412 successes give Avg@4 of 35.31 and 24.12
std::vector<EvalRecord> fixture(int successes) {
  std::vector<std::vector<int>> rows(2500, std::vector<int>(4, 0));
  for (int s = 0; s < successes; ++s) rows[s % 2500][s / 2500] = 1;
  return table(rows);
}

TEST(RobustnessReport, PublishedCellsFixture) {
  const auto rep = robustness_report(fixture(3531), {{"noisy", fixture(2412)}});
  EXPECT_NEAR(rep.ideal.avg, 35.31, 1e-9);
  EXPECT_NEAR(rep.pooled.avg, 24.12, 1e-9);
  EXPECT_NEAR(rep.avg_gap(), 11.19, 1e-9);
}

TEST(RobustnessReport, MismatchedTaskSetsRejected) {
  EXPECT_THROW(robustness_report(table({{1}, {0}}), {{"x", table({{1}, {0}}, "u")}}), PreconditionError);
  EXPECT_THROW(robustness_report(table({{1}, {0}}), {{"x", table({{1}})}}), PreconditionError);
}

TEST(RobustnessReport, PassAtLeastAvgAndGapRange) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto ideal = random_table(rng, 6, 4, rng.uniform());
    auto noisy = random_table(rng, 6, 4, rng.uniform());
    const auto rep = robustness_report(ideal, {{"n", noisy}});
    for (const auto* m : {&rep.ideal, &rep.pooled}) EXPECT_GE(m->pass, m->avg);
    EXPECT_LE(std::fabs(rep.avg_gap()), 100.0);
    EXPECT_LE(std::fabs(rep.pass_gap()), 100.0);
  }
}

TEST(RobustnessReport, JsonTextAndComparison) {
  const auto ideal = table({{1, 1}, {1, 0}});
  const auto noisy = table({{1, 0}, {0, 0}});
  auto a = robustness_report(ideal, {{"tool.failure", noisy}}, "base");
  auto b = robustness_report(ideal, {{"tool.failure", ideal}}, "ours");
  const auto j = a.to_json();
  EXPECT_DOUBLE_EQ(j.at("avg_gap").get<double>(), 50.0);
  EXPECT_EQ(j.at("noisy")[0].at("setting"), "tool.failure");
  const auto text = a.to_text();
  EXPECT_NE(text.find("ideal"), std::string::npos);
  EXPECT_NE(text.find("tool.failure"), std::string::npos);
  EXPECT_NE(text.find("Avg@2"), std::string::npos);
  const auto c = comparison_json(a, b);
  ASSERT_EQ(c.at("rows").size(), 3u);
  EXPECT_DOUBLE_EQ(c.at("rows")[1].at("avg_diff").get<double>(), 50.0);
  EXPECT_NE(comparison_text(a, b).find("ours"), std::string::npos);
}

rollout::Trajectory episode(const std::vector<env::Action>& actions) {
  rollout::Trajectory t;
  for (const auto& a : actions) {
    rollout::StepRecord s;
    s.candidates = {a};
    s.features = {{0.0}};
    t.steps.push_back(s);
  }
  return t;
}

TEST(InteractionStats, HandCounts) {
  const env::ToolCall call{"get_x", {{"id", Value{std::string("X1")}}}};
  const auto t1 = episode({call, call, env::AskUser{"a"}, call, env::Finish{}});
  const auto t2 = episode({env::Finish{}});
  const auto t3 = episode({env::AskUser{"a"}, env::AskUser{"b"}, call, env::Finish{}});
  auto s = interaction_stats({&t1});
  EXPECT_EQ(s.tool_calls, 3.0);
  EXPECT_EQ(s.asks, 1.0);
  EXPECT_EQ(s.length, 5.0);
  s = interaction_stats({&t2});
  EXPECT_EQ(s.tool_calls, 0.0);
  EXPECT_EQ(s.length, 1.0);
  s = interaction_stats({&t1, &t2, &t3});
  EXPECT_DOUBLE_EQ(s.tool_calls, 4.0 / 3);
  EXPECT_DOUBLE_EQ(s.asks, 1.0);
  EXPECT_DOUBLE_EQ(s.length, 10.0 / 3);
  EXPECT_THROW(interaction_stats({}), PreconditionError);
}

TEST(Evaluate, OracleAndRandom) {
  const auto& d = testing::default_domain();
  const auto& l = testing::default_layout();
  const auto tasks = testing::make_tasks(d, 12, 50);
  const auto oracle = evaluate(testing::oracle_params(l), l, d, tasks, {}, 4, 1);
  EXPECT_DOUBLE_EQ(avg_at_k(oracle.records), 100.0);
  EXPECT_EQ(oracle.trajectories.size(), 48u);
  const EvalSetting hard{"tool.failure", noise::make_spec(noise::Category::kFailure, 3)};
  const auto rnd = evaluate(policy::init_params(l.dim(), 1), l, d, tasks, hard, 4, 1);
  EXPECT_LT(avg_at_k(rnd.records), 100.0);
  const auto one = evaluate(policy::init_params(l.dim(), 2, 1.0), l, d, tasks, {}, 1, 1, 1.0);
  EXPECT_DOUBLE_EQ(avg_at_k(one.records), pass_at_k(one.records));
}

}  // namespace
}  // namespace narl::eval
