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

#include "narl/exp/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "narl/core/error.hpp"
#include "narl/core/rng.hpp"

namespace narl::exp {

using nlohmann::json;

std::string name(Variant v) {
  switch (v) {
    case Variant::kGrpo: return "grpo";
    case Variant::kGspo: return "gspo";
    case Variant::kHybridCurriculum: return "hybrid-curriculum";
  }
  return "?";
}

Variant variant_from_name(const std::string& s) {
  for (auto v : {Variant::kGrpo, Variant::kGspo, Variant::kHybridCurriculum})
    if (name(v) == s) return v;
  throw ConfigError("unknown variant '" + s + "' (expected grpo, gspo or hybrid-curriculum)");
}

namespace {

// Walks one JSON object, handing out values and remembering which keys were
// consumed, so leftovers can be reported.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + ": wrong type (" + std::string(j_.at(key).type_name()) + ")");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Reader child(const char* key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    return Reader(j_.contains(key) ? j_.at(key) : kEmpty, where(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(where(k) + ": unknown key");
  }

  std::string where(const std::string& key = {}) const {
    std::string p = path_.empty() ? "config" : path_;
    return key.empty() ? p : p + "." + key;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

void ExperimentConfig::validate() const {
  require(domain.entity_kinds >= 1 && domain.tools >= 1 && domain.records_per_kind >= 1 && domain.links >= 0,
          "domain: sizes must be positive");
  require(tasks.train >= 1 && tasks.eval >= 1, "tasks: counts must be positive");
  require(tasks.min_chain >= env::kMinChainLength && tasks.max_chain <= env::kMaxChainLength &&
              tasks.min_chain <= tasks.max_chain,
          "tasks: chain lengths must satisfy " + std::to_string(env::kMinChainLength) +
              " <= min_chain <= max_chain <= " + std::to_string(env::kMaxChainLength));
  require(rollouts_per_task >= 2, "rollouts_per_task must be at least 2");
  require(batch_size >= 1, "batch_size must be positive");
  require(iterations >= 0, "iterations must be non-negative");
  require(temperature > 0.0, "temperature must be positive");
  require(workers >= 1, "workers must be positive");
  require(optimizer.lr > 0 && optimizer.beta1 >= 0 && optimizer.beta1 < 1 && optimizer.beta2 >= 0 &&
              optimizer.beta2 < 1 && optimizer.eps > 0 && optimizer.clip_norm > 0,
          "optimizer: invalid hyperparameters");
  objective.validate();
  if (scheduler.cap > rollout::kMaxNoiseFraction)
    throw ConfigError("scheduler.rho_max = " + std::to_string(scheduler.cap) +
                      " exceeds the 0.5 cap on the noisy share of rollouts");
  scheduler.validate();
  require(scheduler.probe_tasks <= tasks.train, "scheduler.probe_tasks exceeds tasks.train");
  require(eval.k >= 1, "eval.k must be positive");
  require(eval.level >= 1, "eval.level must be at least 1");
  require(!name.empty() && name.find('/') == std::string::npos, "name must be a plain directory name");
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Reader r(j, "");
  require(r.has("seed"), "config.seed: required");
  r.get("seed", c.seed);
  std::string variant = name(c.variant);
  r.get("variant", variant);
  c.variant = variant_from_name(variant);
  r.get("name", c.name);
  if (c.name.empty()) c.name = name(c.variant) + "-s" + std::to_string(c.seed);

  {
    auto d = r.child("domain");
    d.get("entity_kinds", c.domain.entity_kinds);
    d.get("tools", c.domain.tools);
    d.get("links", c.domain.links);
    d.get("records_per_kind", c.domain.records_per_kind);
    d.finish();
  }
  {
    auto t = r.child("tasks");
    t.get("train", c.tasks.train);
    t.get("eval", c.tasks.eval);
    t.get("min_chain", c.tasks.min_chain);
    t.get("max_chain", c.tasks.max_chain);
    t.finish();
  }
  r.get("rollouts_per_task", c.rollouts_per_task);
  r.get("batch_size", c.batch_size);
  r.get("iterations", c.iterations);
  r.get("temperature", c.temperature);
  r.get("workers", c.workers);
  r.get("log_features", c.log_features);
  r.get("output_dir", c.output_dir);
  {
    auto o = r.child("optimizer");
    o.get("lr", c.optimizer.lr);
    o.get("beta1", c.optimizer.beta1);
    o.get("beta2", c.optimizer.beta2);
    o.get("eps", c.optimizer.eps);
    o.get("clip_norm", c.optimizer.clip_norm);
    o.finish();
  }
  {
    c.objective = optim::preset(c.variant == Variant::kGrpo ? "grpo" : c.variant == Variant::kGspo ? "gspo" : "hybrid");
    auto o = r.child("objective");
    o.get("clip_lo", c.objective.clip_lo);
    o.get("clip_hi", c.objective.clip_hi);
    std::string mode = optim::name(c.objective.ratio_mode);
    std::string agg = optim::name(c.objective.aggregation);
    o.get("ratio_mode", mode);
    o.get("aggregation", agg);
    try {
      c.objective.ratio_mode = optim::ratio_mode_from_name(mode);
      c.objective.aggregation = optim::aggregation_from_name(agg);
    } catch (const Error& e) {
      throw ConfigError(o.where() + ": " + e.what());
    }
    o.get("ratio_cap", c.objective.ratio_cap);
    o.get("ppo_epochs", c.objective.ppo_epochs);
    o.get("reuse_epochs", c.objective.reuse_epochs);
    o.finish();
  }
  {
    auto s = r.child("scheduler");
    s.get("theta", c.scheduler.theta);
    s.get("frac_step", c.scheduler.frac_step);
    s.get("rho_max", c.scheduler.cap);
    s.get("window", c.scheduler.window);
    s.get("probe_tasks", c.scheduler.probe_tasks);
    s.get("probe_runs", c.scheduler.probe_runs);
    s.finish();
  }
  {
    auto e = r.child("eval");
    e.get("k", c.eval.k);
    e.get("level", c.eval.level);
    if (e.has("categories")) {
      std::vector<std::string> names;
      e.get("categories", names);
      c.eval.categories.clear();
      for (const auto& n : names) {
        try {
          c.eval.categories.push_back(noise::category_from_name(n));
        } catch (const Error& err) {
          throw ConfigError(e.where("categories") + ": " + err.what());
        }
      }
    }
    e.finish();
  }
  r.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) { return load_config(path, json::object()); }

ExperimentConfig load_config(const std::string& path, const json& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, false);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": expected a JSON object");
  for (const auto& [k, v] : overrides.items()) j[k] = v;
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json cats = json::array();
  for (auto cat : c.eval.categories) cats.push_back(noise::name(cat));
  return json{
      {"name", c.name},
      {"seed", c.seed},
      {"variant", name(c.variant)},
      {"domain",
       {{"entity_kinds", c.domain.entity_kinds},
        {"tools", c.domain.tools},
        {"links", c.domain.links},
        {"records_per_kind", c.domain.records_per_kind}}},
      {"tasks",
       {{"train", c.tasks.train}, {"eval", c.tasks.eval}, {"min_chain", c.tasks.min_chain}, {"max_chain", c.tasks.max_chain}}},
      {"rollouts_per_task", c.rollouts_per_task},
      {"batch_size", c.batch_size},
      {"iterations", c.iterations},
      {"temperature", c.temperature},
      {"workers", c.workers},
      {"log_features", c.log_features},
      {"output_dir", c.output_dir},
      {"optimizer",
       {{"lr", c.optimizer.lr},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"eps", c.optimizer.eps},
        {"clip_norm", c.optimizer.clip_norm}}},
      {"objective",
       {{"clip_lo", c.objective.clip_lo},
        {"clip_hi", c.objective.clip_hi},
        {"ratio_mode", optim::name(c.objective.ratio_mode)},
        {"aggregation", optim::name(c.objective.aggregation)},
        {"ratio_cap", c.objective.ratio_cap},
        {"ppo_epochs", c.objective.ppo_epochs},
        {"reuse_epochs", c.objective.reuse_epochs}}},
      {"scheduler",
       {{"theta", c.scheduler.theta},
        {"frac_step", c.scheduler.frac_step},
        {"rho_max", c.scheduler.cap},
        {"window", c.scheduler.window},
        {"probe_tasks", c.scheduler.probe_tasks},
        {"probe_runs", c.scheduler.probe_runs}}},
      {"eval", {{"k", c.eval.k}, {"level", c.eval.level}, {"categories", cats}}},
  };
}

std::string config_hash(const ExperimentConfig& c) {
  // workers and output location do not change results
  auto j = to_json(c);
  j.erase("workers");
  j.erase("output_dir");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_string(j.dump())));
  return buf;
}

std::string run_directory(const ExperimentConfig& c) {
  std::filesystem::path dir(c.output_dir);
  if (dir.is_relative()) {
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) dir = std::filesystem::path(root) / dir;
  }
  return (dir / c.name).string();
}

}  // namespace narl::exp
