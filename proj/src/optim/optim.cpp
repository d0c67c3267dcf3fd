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

#include "narl/optim/optim.hpp"

#include <algorithm>
#include <cmath>

#include "narl/core/error.hpp"

namespace narl::optim {

std::string name(RatioMode m) { return m == RatioMode::kPerStep ? "per_step" : "sequence"; }
std::string name(Aggregation a) { return a == Aggregation::kTokenMean ? "token_mean" : "seq_mean_token_mean"; }

RatioMode ratio_mode_from_name(const std::string& s) {
  if (s == "per_step") return RatioMode::kPerStep;
  if (s == "sequence") return RatioMode::kSequence;
  throw ConfigError("unknown ratio_mode '" + s + "' (expected per_step or sequence)");
}

Aggregation aggregation_from_name(const std::string& s) {
  if (s == "token_mean") return Aggregation::kTokenMean;
  if (s == "seq_mean_token_mean") return Aggregation::kSeqMeanTokenMean;
  throw ConfigError("unknown aggregation '" + s + "' (expected token_mean or seq_mean_token_mean)");
}

void ObjectiveConfig::validate() const {
  if (!(clip_lo > 0 && clip_lo < 1)) throw ConfigError("clip_lo must lie in (0, 1)");
  if (!(clip_hi > 0 && clip_hi < 1)) throw ConfigError("clip_hi must lie in (0, 1)");
  if (!(ratio_cap > 1)) throw ConfigError("ratio_cap must be > 1");
  if (ppo_epochs < 1 || reuse_epochs < 1) throw ConfigError("ppo_epochs and reuse_epochs must be >= 1");
}

ObjectiveConfig preset(const std::string& name) {
  ObjectiveConfig c;
  if (name == "grpo") {
    c.clip_lo = 0.2;
    c.clip_hi = 0.2;
    c.ratio_mode = RatioMode::kPerStep;
    c.aggregation = Aggregation::kTokenMean;
    c.ratio_cap = 10.0;
  } else if (name != "gspo" && name != "hybrid") {
    throw ConfigError("unknown objective preset '" + name + "' (expected grpo, gspo or hybrid)");
  }
  return c;
}

std::vector<double> normalize_advantages(const std::vector<double>& rewards) {
  if (rewards.size() < 2) throw PreconditionError("normalize_advantages: need at least two rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;
  if (var == 0.0) throw DegenerateGroupError("normalize_advantages: all rewards equal");
  const double sd = std::sqrt(var);
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back((r - mean) / sd);
  return out;
}

namespace {

void normalize_subset(const rollout::RolloutGroup& group, const std::vector<std::size_t>& idx, Subset label,
                      std::vector<AdvantageRecord>& out) {
  if (idx.size() < 2) return;
  std::vector<double> rewards;
  for (std::size_t i : idx) rewards.push_back(group.trajectories[i].reward);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) return;
  const auto adv = normalize_advantages(rewards);
  for (std::size_t j = 0; j < idx.size(); ++j) out.push_back({idx[j], label, adv[j]});
}

}  // namespace

std::vector<AdvantageRecord> groupwise_advantages(const rollout::RolloutGroup& group) {
  std::vector<AdvantageRecord> out;
  normalize_subset(group, group.clean, Subset::kClean, out);
  normalize_subset(group, group.noisy_pooled(), Subset::kNoise, out);
  return out;
}

std::vector<AdvantageRecord> plain_advantages(const rollout::RolloutGroup& group) {
  std::vector<std::size_t> all(group.trajectories.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<AdvantageRecord> out;
  normalize_subset(group, all, Subset::kClean, out);
  return out;
}

std::vector<std::size_t> filter_degenerate(const std::vector<rollout::RolloutGroup>& groups, FilterReport* report) {
  FilterReport r;
  std::vector<std::size_t> kept;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& ts = groups[g].trajectories;
    const bool same = std::all_of(ts.begin(), ts.end(), [&](const auto& t) { return t.reward == ts.front().reward; });
    if (ts.empty() || same) {
      if (!ts.empty() && ts.front().reward > 0) {
        ++r.all_pass;
      } else {
        ++r.all_fail;
      }
      continue;
    }
    kept.push_back(g);
  }
  r.retained = static_cast<int>(kept.size());
  if (report != nullptr) *report = r;
  return kept;
}

std::vector<double> importance_ratio(const std::vector<double>& new_logprobs, const std::vector<double>& old_logprobs,
                                     RatioMode mode, double cap) {
  if (new_logprobs.size() != old_logprobs.size()) throw PreconditionError("importance_ratio: length mismatch");
  const std::size_t n = new_logprobs.size();
  std::vector<double> out(n);
  if (mode == RatioMode::kPerStep) {
    for (std::size_t t = 0; t < n; ++t) {
      const double r = std::exp(new_logprobs[t] - old_logprobs[t]);
      if (!std::isfinite(r)) throw NumericError("importance_ratio: non-finite ratio at step " + std::to_string(t));
      out[t] = std::min(r, cap);
    }
    return out;
  }
  if (n == 0) return out;
  double sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) sum += new_logprobs[t] - old_logprobs[t];
  const double r = std::exp(sum / static_cast<double>(n));
  if (!std::isfinite(r)) throw NumericError("importance_ratio: non-finite sequence ratio (steps 0.." + std::to_string(n - 1) + ")");
  std::fill(out.begin(), out.end(), std::min(r, cap));
  return out;
}

double clipped_surrogate(double ratio, double advantage, double clip_lo, double clip_hi) {
  const double clamped = std::clamp(ratio, 1.0 - clip_lo, 1.0 + clip_hi);
  return std::min(ratio * advantage, clamped * advantage);
}

double clipped_surrogate_slope(double ratio, double advantage, double clip_lo, double clip_hi) {
  const double clamped = std::clamp(ratio, 1.0 - clip_lo, 1.0 + clip_hi);
  return ratio * advantage <= clamped * advantage ? advantage : 0.0;
}

double aggregate_loss(const std::vector<std::vector<double>>& per_trajectory, Aggregation mode) {
  if (per_trajectory.empty()) return 0.0;
  double total = 0.0;
  std::size_t steps = 0;
  for (const auto& v : per_trajectory) {
    if (v.empty()) throw PreconditionError("aggregate_loss: trajectory with no steps");
    double s = 0.0;
    for (double x : v) s += x;
    if (mode == Aggregation::kSeqMeanTokenMean) {
      total += s / static_cast<double>(v.size());
    } else {
      total += s;
      steps += v.size();
    }
  }
  return mode == Aggregation::kSeqMeanTokenMean ? total / static_cast<double>(per_trajectory.size())
                                                : total / static_cast<double>(steps);
}

std::vector<WeightedTrajectory> collect(const std::vector<rollout::RolloutGroup>& groups,
                                        const std::vector<std::size_t>& retained, bool partitioned) {
  std::vector<WeightedTrajectory> out;
  for (std::size_t g : retained) {
    const auto records = partitioned ? groupwise_advantages(groups[g]) : plain_advantages(groups[g]);
    for (const auto& r : records) {
      const auto& t = groups[g].trajectories[r.trajectory];
      if (t.steps.empty()) continue;
      out.push_back({&t, r.value, r.subset});
    }
  }
  return out;
}

SurrogateStats surrogate(const std::vector<WeightedTrajectory>& batch, const policy::PolicyParams& params,
                         const ObjectiveConfig& config, std::vector<double>* gradient) {
  SurrogateStats st;
  const std::size_t dim = params.weights.size();
  if (gradient != nullptr) gradient->assign(dim, 0.0);
  std::size_t total_steps = 0;
  for (const auto& w : batch) total_steps += w.trajectory->steps.size();
  if (batch.empty() || total_steps == 0) return st;

  std::size_t clipped = 0;
  double ratio_sum = 0.0;
  std::vector<double> dseq(dim);
  for (const auto& w : batch) {
    const auto& traj = *w.trajectory;
    const std::size_t L = traj.steps.size();
    const double weight = config.aggregation == Aggregation::kSeqMeanTokenMean
                              ? 1.0 / (static_cast<double>(batch.size()) * static_cast<double>(L))
                              : 1.0 / static_cast<double>(total_steps);
    std::vector<double> new_lp(L), old_lp(L);
    std::vector<std::vector<double>> grads;
    for (std::size_t t = 0; t < L; ++t) {
      const auto& s = traj.steps[t];
      new_lp[t] = policy::action_logprobs(params, s.features)[s.chosen];
      old_lp[t] = s.logprob;
      if (gradient != nullptr) grads.push_back(policy::logprob_gradient(params, s.features, s.chosen));
    }
    const auto ratios = importance_ratio(new_lp, old_lp, config.ratio_mode, config.ratio_cap);
    std::vector<double> raw(L);
    if (config.ratio_mode == RatioMode::kPerStep) {
      for (std::size_t t = 0; t < L; ++t) raw[t] = std::exp(new_lp[t] - old_lp[t]);
    } else {
      double sum = 0.0;
      for (std::size_t t = 0; t < L; ++t) sum += new_lp[t] - old_lp[t];
      std::fill(raw.begin(), raw.end(), std::exp(sum / static_cast<double>(L)));
    }
    if (gradient != nullptr && config.ratio_mode == RatioMode::kSequence) {
      std::fill(dseq.begin(), dseq.end(), 0.0);
      for (const auto& g : grads)
        for (std::size_t i = 0; i < dim; ++i) dseq[i] += g[i] / static_cast<double>(L);
    }
    for (std::size_t t = 0; t < L; ++t) {
      const double r = ratios[t];
      st.objective += weight * clipped_surrogate(r, w.advantage, config.clip_lo, config.clip_hi);
      ratio_sum += r;
      st.max_ratio = std::max(st.max_ratio, r);
      const bool capped = raw[t] > config.ratio_cap;
      const double slope = capped ? 0.0 : clipped_surrogate_slope(r, w.advantage, config.clip_lo, config.clip_hi);
      if (capped || (slope == 0.0 && w.advantage != 0.0)) ++clipped;
      if (gradient == nullptr || slope == 0.0) continue;
      const auto& dr = config.ratio_mode == RatioMode::kPerStep ? grads[t] : dseq;
      const double c = weight * slope * r;
      for (std::size_t i = 0; i < dim; ++i) (*gradient)[i] += c * dr[i];
    }
  }
  st.steps = total_steps;
  st.mean_ratio = ratio_sum / static_cast<double>(total_steps);
  st.clip_fraction = static_cast<double>(clipped) / static_cast<double>(total_steps);
  return st;
}

nlohmann::json UpdateDiagnostics::to_json() const {
  auto stats = [](const SurrogateStats& s) {
    return nlohmann::json{{"objective", s.objective},
                          {"mean_ratio", s.mean_ratio},
                          {"max_ratio", s.max_ratio},
                          {"clip_fraction", s.clip_fraction},
                          {"steps", s.steps}};
  };
  auto subset = [](const SubsetStats& s) {
    return nlohmann::json{{"count", s.count}, {"mean", s.mean}, {"std", s.std}};
  };
  return nlohmann::json{{"filter", {{"all_pass", filter.all_pass}, {"all_fail", filter.all_fail}, {"retained", filter.retained}}},
                        {"trajectories", trajectories},
                        {"steps", steps},
                        {"objective", first.objective},
                        {"first", stats(first)},
                        {"last", stats(last)},
                        {"grad_norm", grad_norm},
                        {"adam_steps", adam_steps},
                        {"advantages", {{"clean", subset(clean)}, {"noise", subset(noise)}}},
                        {"degenerate_subsets", degenerate_subsets}};
}

namespace {

UpdateDiagnostics run_update(const std::vector<rollout::RolloutGroup>& groups, policy::PolicyParams& params,
                             policy::OptimizerState& opt, const ObjectiveConfig& config, bool partitioned) {
  config.validate();
  UpdateDiagnostics d;
  const auto retained = filter_degenerate(groups, &d.filter);
  const auto batch = collect(groups, retained, partitioned);

  for (std::size_t g : retained) {
    const auto& grp = groups[g];
    const auto records = partitioned ? groupwise_advantages(grp) : plain_advantages(grp);
    const bool has_clean = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.subset == Subset::kClean; });
    const bool has_noise = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.subset == Subset::kNoise; });
    if (partitioned) {
      if (!grp.clean.empty() && !has_clean) ++d.degenerate_subsets;
      if (grp.noise_count() > 0 && !has_noise) ++d.degenerate_subsets;
    }
  }
  auto subset_stats = [&](Subset s) {
    UpdateDiagnostics::SubsetStats out;
    double sum = 0.0, sq = 0.0;
    for (const auto& w : batch) {
      if (w.subset != s) continue;
      ++out.count;
      sum += w.advantage;
      sq += w.advantage * w.advantage;
    }
    if (out.count > 0) {
      out.mean = sum / static_cast<double>(out.count);
      out.std = std::sqrt(std::max(0.0, sq / static_cast<double>(out.count) - out.mean * out.mean));
    }
    return out;
  };
  d.clean = subset_stats(Subset::kClean);
  d.noise = subset_stats(Subset::kNoise);
  d.trajectories = batch.size();
  for (const auto& w : batch) d.steps += w.trajectory->steps.size();
  if (batch.empty()) return d;

  std::vector<double> grad;
  const int epochs = config.ppo_epochs * config.reuse_epochs;
  for (int e = 0; e < epochs; ++e) {
    const SurrogateStats st = surrogate(batch, params, config, &grad);
    if (e == 0) d.first = st;
    d.last = st;
    const auto diag = policy::adam_update(opt, params, grad);
    if (e == 0) d.grad_norm = diag.grad_norm;
    ++d.adam_steps;
  }
  return d;
}

}  // namespace

UpdateDiagnostics update_policy(const std::vector<rollout::RolloutGroup>& groups, policy::PolicyParams& params,
                                policy::OptimizerState& opt, const ObjectiveConfig& config) {
  return run_update(groups, params, opt, config, true);
}

UpdateDiagnostics update_policy_plain(const std::vector<rollout::RolloutGroup>& groups, policy::PolicyParams& params,
                                      policy::OptimizerState& opt, const ObjectiveConfig& config) {
  return run_update(groups, params, opt, config, false);
}

}  // namespace narl::optim
