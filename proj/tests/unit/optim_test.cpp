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
#include <numeric>

#include "fixtures.hpp"
#include "narl/core/error.hpp"
#include "narl/optim/optim.hpp"

namespace narl::optim {
namespace {

using rollout::RolloutGroup;
using rollout::StepRecord;
using rollout::Trajectory;

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }
double pop_std(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / v.size());
}

// A trajectory over random features, sampled from `behavior`.
Trajectory random_trajectory(Rng& rng, const policy::PolicyParams& behavior, std::size_t steps, int reward) {
  Trajectory t;
  t.reward = reward;
  t.terminated = true;
  const std::size_t dim = behavior.weights.size();
  for (std::size_t s = 0; s < steps; ++s) {
    StepRecord r;
    const std::size_t k = 2 + rng.below(4);
    r.features = testing::random_features(rng, k, dim);
    r.candidates.assign(k, env::Finish{});
    const auto lp = policy::action_logprobs(behavior, r.features);
    const auto smp = policy::sample_action(lp, 1.0, rng);
    r.chosen = smp.index;
    r.logprob = smp.logprob;
    t.steps.push_back(std::move(r));
  }
  return t;
}

// Group with the given clean and per-category noisy rewards.
RolloutGroup make_group(Rng& rng, const policy::PolicyParams& behavior, const std::vector<int>& clean,
                        const std::vector<std::pair<std::size_t, int>>& noisy = {}) {
  RolloutGroup g;
  g.task_id = "t";
  for (int r : clean) {
    g.clean.push_back(g.trajectories.size());
    g.trajectories.push_back(random_trajectory(rng, behavior, 1 + rng.below(4), r));
  }
  for (const auto& [cat, r] : noisy) {
    g.noisy[cat].push_back(g.trajectories.size());
    auto t = random_trajectory(rng, behavior, 1 + rng.below(4), r);
    t.realization = noise::NoiseRealization{noise::make_spec(noise::kTaxonomy[cat], 1), 0, {}, {}};
    g.trajectories.push_back(std::move(t));
  }
  return g;
}

TEST(NormalizeAdvantages, HandExamples) {
  const auto a = normalize_advantages({1, 0, 0, 1});
  EXPECT_EQ(a, (std::vector<double>{1, -1, -1, 1}));
  const auto b = normalize_advantages({1, 1, 0, 0, 0});
  const double sigma = std::sqrt(0.24);
  EXPECT_NEAR(b[0], 0.6 / sigma, 1e-12);
  EXPECT_NEAR(b[0], 1.2247, 1e-4);
  EXPECT_NEAR(b[2], -0.8165, 1e-4);
}

TEST(NormalizeAdvantages, DegenerateAndShortInputs) {
  EXPECT_THROW(normalize_advantages({1, 1, 1, 1}), DegenerateGroupError);
  EXPECT_THROW(normalize_advantages({1}), PreconditionError);
}

TEST(NormalizeAdvantages, ZeroMeanUnitStd) {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> r(2 + rng.below(30));
    for (auto& x : r) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
    r[0] = 1;
    r[1] = 0;
    const auto a = normalize_advantages(r);
    EXPECT_LT(std::fabs(mean(a)), 1e-9);
    EXPECT_NEAR(pop_std(a), 1.0, 1e-9);
  }
}

TEST(GroupwiseAdvantages, SeparateSubsets) {
  Rng rng(2);
  const auto beh = policy::init_params(4, 1);
  const auto g = make_group(rng, beh, {1, 0}, {{4, 1}, {0, 0}});
  const auto recs = groupwise_advantages(g);
  ASSERT_EQ(recs.size(), 4u);
  for (const auto& r : recs) {
    const bool clean = r.trajectory < 2;
    EXPECT_EQ(r.subset, clean ? Subset::kClean : Subset::kNoise);
    EXPECT_DOUBLE_EQ(std::fabs(r.value), 1.0);
    EXPECT_EQ(r.value > 0, g.trajectories[r.trajectory].reward == 1);
  }
}

TEST(GroupwiseAdvantages, DegenerateCleanSubsetDropped) {
  Rng rng(3);
  const auto beh = policy::init_params(4, 1);
  const auto g = make_group(rng, beh, {1, 1}, {{4, 1}, {5, 0}});
  const auto recs = groupwise_advantages(g);
  ASSERT_EQ(recs.size(), 2u);
  for (const auto& r : recs) EXPECT_EQ(r.subset, Subset::kNoise);
}

TEST(GroupwiseAdvantages, SingletonSubsetDropped) {
  Rng rng(4);
  const auto beh = policy::init_params(4, 1);
  const auto g = make_group(rng, beh, {1, 0, 1}, {{4, 1}});
  const auto recs = groupwise_advantages(g);
  EXPECT_EQ(recs.size(), 3u);
}

TEST(GroupwiseAdvantages, NoNoiseEqualsPlain) {
  Rng rng(5);
  const auto beh = policy::init_params(4, 1);
  const auto g = make_group(rng, beh, {1, 0, 0, 1, 1, 0, 0, 0});
  const auto a = groupwise_advantages(g), b = plain_advantages(g);
  const auto direct = normalize_advantages({1, 0, 0, 1, 1, 0, 0, 0});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].trajectory, b[i].trajectory);
    EXPECT_EQ(a[i].value, b[i].value);
    EXPECT_EQ(a[i].value, direct[a[i].trajectory]);
  }
}

TEST(FilterDegenerate, CountsPassAndFail) {
  Rng rng(6);
  const auto beh = policy::init_params(4, 1);
  std::vector<RolloutGroup> groups{make_group(rng, beh, {1, 1, 1, 1}), make_group(rng, beh, {0, 0, 0, 0}),
                                   make_group(rng, beh, {1, 0, 1, 0}), make_group(rng, beh, {1, 1}, {{4, 0}})};
  FilterReport rep;
  const auto kept = filter_degenerate(groups, &rep);
  EXPECT_EQ(kept, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(rep.all_pass, 1);
  EXPECT_EQ(rep.all_fail, 1);
  EXPECT_EQ(rep.retained, 2);
}

TEST(ImportanceRatio, Examples) {
  EXPECT_EQ(importance_ratio({-1, -2}, {-1, -2}, RatioMode::kPerStep, 3), (std::vector<double>{1, 1}));
  EXPECT_EQ(importance_ratio({-1, -2}, {-1, -2}, RatioMode::kSequence, 3), (std::vector<double>{1, 1}));
  const double l2 = std::log(2.0);
  const auto per = importance_ratio({l2 - 1, -1}, {-1, -1}, RatioMode::kPerStep, 3);
  EXPECT_NEAR(per[0], 2.0, 1e-12);
  EXPECT_NEAR(per[1], 1.0, 1e-12);
  const auto seq = importance_ratio({l2 - 1, -1}, {-1, -1}, RatioMode::kSequence, 3);
  EXPECT_NEAR(seq[0], std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(seq[1], std::sqrt(2.0), 1e-12);
  EXPECT_EQ(importance_ratio({std::log(10.0) - 1}, {-1}, RatioMode::kPerStep, 3)[0], 3.0);
}

TEST(ImportanceRatio, NonFiniteAborts) {
  EXPECT_THROW(importance_ratio({0, std::nan("")}, {0, 0}, RatioMode::kPerStep, 3), NumericError);
  EXPECT_THROW(importance_ratio({0, std::nan("")}, {0, 0}, RatioMode::kSequence, 3), NumericError);
  EXPECT_THROW(importance_ratio({0}, {0, 0}, RatioMode::kPerStep, 3), PreconditionError);
}

TEST(ClippedSurrogate, Examples) {
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, 1.0, 0.2, 0.28), 1.28);
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, -1.0, 0.2, 0.28), -0.8);
  for (double a : {-2.0, -0.3, 0.0, 0.7, 5.0}) EXPECT_EQ(clipped_surrogate(1.0, a, 0.2, 0.28), a);
}

TEST(ClippedSurrogate, FlatRegionsHaveZeroSlope) {
  Rng rng(7);
  constexpr double h = 1e-6;
  for (int i = 0; i < 2000; ++i) {
    const double r = 0.05 + 2.5 * rng.uniform();
    const double a = 4 * rng.uniform() - 2;
    const double fd = (clipped_surrogate(r + h, a, 0.2, 0.28) - clipped_surrogate(r - h, a, 0.2, 0.28)) / (2 * h);
    const bool flat = (a > 0 && r > 1.28 + h) || (a < 0 && r < 0.8 - h);
    const bool near_kink = std::fabs(r - 1.28) < 2 * h || std::fabs(r - 0.8) < 2 * h;
    if (near_kink) continue;
    if (flat) {
      EXPECT_EQ(fd, 0.0) << r << " " << a;
      EXPECT_EQ(clipped_surrogate_slope(r, a, 0.2, 0.28), 0.0);
    } else {
      EXPECT_NEAR(fd, a, 1e-6);
      EXPECT_EQ(clipped_surrogate_slope(r, a, 0.2, 0.28), a);
    }
  }
}

TEST(AggregateLoss, Modes) {
  EXPECT_DOUBLE_EQ(aggregate_loss({{1, 1}, {0}}, Aggregation::kSeqMeanTokenMean), 0.5);
  EXPECT_DOUBLE_EQ(aggregate_loss({{1, 1}, {0}}, Aggregation::kTokenMean), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(aggregate_loss({{0.25, 0.25}, {0.25}}, Aggregation::kTokenMean), 0.25);
  EXPECT_DOUBLE_EQ(aggregate_loss({{0.25, 0.25}, {0.25}}, Aggregation::kSeqMeanTokenMean), 0.25);
  EXPECT_DOUBLE_EQ(aggregate_loss({{-3.5}}, Aggregation::kSeqMeanTokenMean), -3.5);
  EXPECT_THROW(aggregate_loss({{1}, {}}, Aggregation::kTokenMean), PreconditionError);
}

TEST(Presets, MatchConfigurationTable) {
  const auto g = preset("grpo");
  EXPECT_EQ(g.clip_lo, 0.2);
  EXPECT_EQ(g.clip_hi, 0.2);
  EXPECT_EQ(g.ratio_mode, RatioMode::kPerStep);
  EXPECT_EQ(g.aggregation, Aggregation::kTokenMean);
  const auto h = preset("hybrid");
  EXPECT_EQ(h.clip_hi, 0.28);
  EXPECT_EQ(h.ratio_cap, 3.0);
  EXPECT_EQ(h.ratio_mode, RatioMode::kSequence);
  EXPECT_EQ(h.aggregation, Aggregation::kSeqMeanTokenMean);
  EXPECT_THROW(preset("ppo"), ConfigError);
  ObjectiveConfig bad;
  bad.ratio_cap = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

// Two trajectories of two steps on one-dimensional features; behavior
// weight 0, so every stored log-prob is ln 0.5, and new weight ln 1.5, so
// candidate 0 has probability 0.6 and the ratios are 1.2 or 0.8.
struct HandFixture {
  Trajectory up, down;
  HandFixture() {
    auto step = [](std::size_t chosen) {
      StepRecord s;
      s.candidates = {env::Finish{}, env::Finish{}};
      s.features = {{1.0}, {0.0}};
      s.chosen = chosen;
      s.logprob = std::log(0.5);
      return s;
    };
    up.steps = {step(0), step(1)};
    down.steps = {step(0), step(0)};
  }
  std::vector<WeightedTrajectory> batch() const { return {{&up, 1.0, Subset::kClean}, {&down, -1.0, Subset::kClean}}; }
};

TEST(Surrogate, HandFixture) {
  HandFixture f;
  const policy::PolicyParams p{{std::log(1.5)}, 0};
  ObjectiveConfig c = preset("hybrid");
  c.ratio_mode = RatioMode::kPerStep;
  // up: min(1.2, 1.2) and min(0.8, 0.8); down: -1.2 twice
  EXPECT_NEAR(surrogate(f.batch(), p, c).objective, (1.0 - 1.2) / 2, 1e-10);
  c.aggregation = Aggregation::kTokenMean;
  EXPECT_NEAR(surrogate(f.batch(), p, c).objective, (1.2 + 0.8 - 1.2 - 1.2) / 4, 1e-10);
  c = preset("hybrid");
  // sequence ratios: sqrt(1.2 * 0.8) and 1.2
  EXPECT_NEAR(surrogate(f.batch(), p, c).objective, (std::sqrt(0.96) - 1.2) / 2, 1e-10);
  c = preset("grpo");
  // symmetric 0.2 clip: up step 0 stays 1.2 (clamp bound), down steps clamp to 1.2 as well
  EXPECT_NEAR(surrogate(f.batch(), p, c).objective, (1.2 + 0.8 - 1.2 - 1.2) / 4, 1e-10);
}

TEST(Surrogate, ZeroAdvantagesGiveZeroGradient) {
  Rng rng(8);
  const auto beh = policy::init_params(6, 1, 0.5);
  auto t1 = random_trajectory(rng, beh, 3, 1), t2 = random_trajectory(rng, beh, 2, 0);
  std::vector<WeightedTrajectory> batch{{&t1, 0.0, Subset::kClean}, {&t2, 0.0, Subset::kNoise}};
  auto p = beh;
  std::vector<double> grad;
  surrogate(batch, p, preset("hybrid"), &grad);
  for (double g : grad) EXPECT_EQ(g, 0.0);
  auto opt = policy::make_optimizer(6);
  policy::adam_update(opt, p, grad);
  EXPECT_EQ(p.weights, beh.weights);
}

// Finite-difference check of the surrogate gradient on random batches, with
// the new params away from the behavior params so clipping is active.
void check_surrogate_gradient(const ObjectiveConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  constexpr double h = 1e-5;
  int clipped_batches = 0;
  for (int b = 0; b < 20; ++b) {
    const std::size_t dim = 3 + rng.below(6);
    const auto beh = policy::init_params(dim, rng.next(), 0.7);
    std::vector<Trajectory> ts;
    for (int i = 0; i < 4; ++i) ts.push_back(random_trajectory(rng, beh, 1 + rng.below(4), i % 2));
    std::vector<WeightedTrajectory> batch;
    for (auto& t : ts) batch.push_back({&t, 2 * rng.uniform() - 1, Subset::kClean});
    auto p = beh;
    for (auto& w : p.weights) w += 0.3 * rng.normal();
    std::vector<double> grad;
    const auto st = surrogate(batch, p, cfg, &grad);
    if (st.clip_fraction > 0) ++clipped_batches;
    for (std::size_t i = 0; i < dim; ++i) {
      auto hi = p, lo = p;
      hi.weights[i] += h;
      lo.weights[i] -= h;
      const double fd = (surrogate(batch, hi, cfg).objective - surrogate(batch, lo, cfg).objective) / (2 * h);
      const double denom = std::max({std::fabs(fd), std::fabs(grad[i]), 1e-6});
      EXPECT_LT(std::fabs(grad[i] - fd) / denom, 1e-4) << "batch " << b << " weight " << i;
    }
  }
  EXPECT_GT(clipped_batches, 0);
}

TEST(Surrogate, GradientMatchesFiniteDifferencesSequence) { check_surrogate_gradient(preset("hybrid"), 9); }
TEST(Surrogate, GradientMatchesFiniteDifferencesPerStep) { check_surrogate_gradient(preset("grpo"), 10); }

std::vector<RolloutGroup> clean_groups(std::uint64_t seed, const policy::PolicyParams& beh) {
  Rng rng(seed);
  return {make_group(rng, beh, {1, 0, 1, 1, 0, 0, 1, 0}), make_group(rng, beh, {1, 1, 1, 1}),
          make_group(rng, beh, {0, 1, 0, 0})};
}

TEST(UpdatePolicy, NoNoiseMatchesPlainPathBitForBit) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto beh = policy::init_params(8, seed, 0.5);
    const auto groups = clean_groups(seed, beh);
    auto p1 = beh, p2 = beh;
    auto o1 = policy::make_optimizer(8), o2 = policy::make_optimizer(8);
    const auto d1 = update_policy(groups, p1, o1, preset("hybrid"));
    const auto d2 = update_policy_plain(groups, p2, o2, preset("hybrid"));
    EXPECT_EQ(p1.weights, p2.weights);
    EXPECT_EQ(o1.m, o2.m);
    EXPECT_EQ(o1.v, o2.v);
    EXPECT_EQ(d1.first.objective, d2.first.objective);
    EXPECT_EQ(d1.filter.all_pass, 1);
  }
}

TEST(UpdatePolicy, DiagnosticsAndVersion) {
  const auto beh = policy::init_params(8, 3, 0.5);
  Rng rng(3);
  std::vector<RolloutGroup> groups{make_group(rng, beh, {1, 0, 1, 0}, {{5, 1}, {6, 0}}),
                                   make_group(rng, beh, {0, 0, 0, 0})};
  auto p = beh;
  auto opt = policy::make_optimizer(8);
  const auto d = update_policy(groups, p, opt, preset("hybrid"));
  EXPECT_EQ(d.filter.all_fail, 1);
  EXPECT_EQ(d.filter.retained, 1);
  EXPECT_EQ(d.trajectories, 6u);
  EXPECT_EQ(d.adam_steps, 2);  // 1 PPO epoch x 2 reuse epochs
  EXPECT_EQ(p.version, 2u);
  EXPECT_EQ(d.clean.count, 4u);
  EXPECT_EQ(d.noise.count, 2u);
  EXPECT_NEAR(d.clean.mean, 0.0, 1e-12);
  EXPECT_NEAR(d.clean.std, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(d.first.mean_ratio, 1.0);
  const auto j = d.to_json();
  for (const char* k : {"filter", "first", "last", "grad_norm", "advantages"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j.at("advantages").at("noise").at("count"), 2);
}

TEST(UpdatePolicy, AllDegenerateLeavesParamsAlone) {
  const auto beh = policy::init_params(8, 4, 0.5);
  Rng rng(4);
  std::vector<RolloutGroup> groups{make_group(rng, beh, {1, 1, 1}), make_group(rng, beh, {0, 0})};
  auto p = beh;
  auto opt = policy::make_optimizer(8);
  const auto d = update_policy(groups, p, opt, preset("hybrid"));
  EXPECT_EQ(d.adam_steps, 0);
  EXPECT_EQ(p.weights, beh.weights);
}

}  // namespace
}  // namespace narl::optim
