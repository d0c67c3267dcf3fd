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

#include <cstdio>
#include <filesystem>
#include <memory>
#include <numeric>

#include "narl/core/error.hpp"
#include "narl/core/rng.hpp"
#include "narl/exp/io.hpp"
#include "narl/exp/runner.hpp"

#ifndef NARL_VERSION
#define NARL_VERSION "unknown"
#endif

namespace narl::exp {

namespace fs = std::filesystem;
using nlohmann::json;

const char* code_version() { return NARL_VERSION; }

namespace {

std::vector<env::SynthesizedTask> make_tasks(const env::DomainGraph& domain, const TaskCounts& counts,
                                             std::uint64_t seed, Stream stream, int n, const std::string& prefix) {
  std::vector<env::SynthesizedTask> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    Rng len_rng(derive_seed(seed, {tag(Stream::kTaskLength), tag(stream), idx}));
    const int len = static_cast<int>(len_rng.range(counts.min_chain, counts.max_chain));
    char id[32];
    std::snprintf(id, sizeof id, "%s-%04d", prefix.c_str(), i);
    out.push_back(env::synthesize_task(domain, len, derive_seed(seed, {tag(stream), idx}), id));
  }
  return out;
}

std::string iter_name(int it) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "checkpoints/iter_%04d.json", it);
  return buf;
}

json checkpoint_doc(const policy::PolicyParams& params, const policy::FeatureLayout& layout,
                    const curriculum::SchedulerState& state, int iteration, const policy::OptimizerState& opt) {
  auto j = policy::checkpoint_to_json(params, layout);
  j["iteration"] = iteration;
  j["optimizer_step"] = opt.step;
  j["scheduler"] = state.to_json();
  return j;
}

// Success counts of one iteration's training rollouts.
json batch_success(const std::vector<rollout::RolloutGroup>& groups) {
  int clean_n = 0, clean_ok = 0, noisy_n = 0, noisy_ok = 0;
  std::array<int, noise::kTaxonomy.size()> cat_n{}, cat_ok{};
  for (const auto& g : groups) {
    for (auto i : g.clean) {
      ++clean_n;
      clean_ok += g.trajectories[i].reward;
    }
    for (std::size_t c = 0; c < g.noisy.size(); ++c)
      for (auto i : g.noisy[c]) {
        ++noisy_n;
        ++cat_n[c];
        noisy_ok += g.trajectories[i].reward;
        cat_ok[c] += g.trajectories[i].reward;
      }
  }
  auto rate = [](int ok, int n) { return n ? json(static_cast<double>(ok) / n) : json(nullptr); };
  json per_cat = json::object();
  for (std::size_t c = 0; c < cat_n.size(); ++c)
    if (cat_n[c]) per_cat[noise::name(noise::kTaxonomy[c])] = {{"count", cat_n[c]}, {"success", rate(cat_ok[c], cat_n[c])}};
  return {{"clean", {{"count", clean_n}, {"success", rate(clean_ok, clean_n)}}},
          {"noisy", {{"count", noisy_n}, {"success", rate(noisy_ok, noisy_n)}}},
          {"by_category", per_cat}};
}

class ManifestWriter {
 public:
  ManifestWriter(std::string dir, const ExperimentConfig& config) : dir_(std::move(dir)) {
    doc_ = {{"format", "narl-run-manifest"},
            {"format_version", 1},
            {"name", config.name},
            {"variant", name(config.variant)},
            {"seed", config.seed},
            {"config_hash", config_hash(config)},
            {"code_version", code_version()},
            {"status", "running"},
            {"last_completed_iteration", -1},
            {"failed_iteration", nullptr},
            {"error", nullptr},
            {"artifacts", json::object()},
            {"iterations", json::array()},
            {"checkpoints", json::array()},
            {"final_checkpoint", nullptr},
            {"final_report", nullptr}};
  }

  json& doc() { return doc_; }
  void artifact(const std::string& key, const std::string& path, const std::string& hash) {
    doc_["artifacts"][key] = {{"path", path}, {"hash", hash}};
  }
  ArtifactRef file(const std::string& rel) { return {rel, hash_file((fs::path(dir_) / rel).string())}; }
  void save() const { write_text((fs::path(dir_) / "manifest.json").string(), doc_.dump(1) + "\n"); }

 private:
  std::string dir_;
  json doc_;
};

json ref_json(const ArtifactRef& r) { return {{"path", r.path}, {"hash", r.hash}}; }

json ref_json(const ArtifactRef& r, int iteration) {
  auto j = ref_json(r);
  j["iteration"] = iteration;
  return j;
}

}  // namespace

Workspace make_workspace(const ExperimentConfig& config) {
  Workspace w;
  w.domain = env::build_domain(config.domain, derive_seed(config.seed, {tag(Stream::kDomain)}));
  w.train = make_tasks(w.domain, config.tasks, config.seed, Stream::kTrainTasks, config.tasks.train, "train");
  w.eval = make_tasks(w.domain, config.tasks, config.seed, Stream::kEvalTasks, config.tasks.eval, "eval");
  return w;
}

std::string RunManifest::path_of(const std::string& artifact) const {
  return (fs::path(run_dir) / doc.at("artifacts").at(artifact).at("path").get<std::string>()).string();
}

std::vector<std::string> RunManifest::verify() const {
  std::vector<std::string> problems;
  auto check = [&](const std::string& what, const json& ref) {
    if (!ref.is_object()) return;
    const auto path = (fs::path(run_dir) / ref.at("path").get<std::string>()).string();
    if (!fs::exists(path)) {
      problems.push_back(what + ": missing " + path);
      return;
    }
    const auto h = hash_file(path);
    if (h != ref.at("hash").get<std::string>()) problems.push_back(what + ": hash mismatch for " + path);
  };
  for (const auto& [k, ref] : doc.at("artifacts").items()) check(k, ref);
  for (const auto& c : doc.at("checkpoints")) check("checkpoint " + c.at("path").get<std::string>(), c);
  check("final_checkpoint", doc.at("final_checkpoint"));
  check("final_report", doc.at("final_report"));
  return problems;
}

RunManifest RunManifest::load(const std::string& manifest_path) {
  if (!fs::exists(manifest_path)) throw ConfigError("manifest not found: " + manifest_path);
  RunManifest m;
  m.run_dir = fs::path(manifest_path).parent_path().string();
  if (m.run_dir.empty()) m.run_dir = ".";
  m.doc = read_json(manifest_path);
  if (m.doc.value("format", "") != "narl-run-manifest") throw ConfigError(manifest_path + ": not a run manifest");
  return m;
}

RunManifest run_train(const ExperimentConfig& config, const TrainOptions& options) {
  config.validate();
  const std::string dir = run_directory(config);
  fs::create_directories(fs::path(dir) / "checkpoints");
  auto log = [&](const std::string& s) {
    if (options.log) *options.log << s << std::endl;
  };

  ManifestWriter manifest(dir, config);
  write_text((fs::path(dir) / "config.json").string(), to_json(config).dump(1) + "\n");
  {
    const auto r = manifest.file("config.json");
    manifest.artifact("config", r.path, r.hash);
  }
  manifest.save();

  const bool curriculum_on = config.variant == Variant::kHybridCurriculum;
  int current = 0;
  std::unique_ptr<JsonlWriter> trajectories, diagnostics, scheduler_log;
  auto sync_logs = [&] {
    if (!trajectories) return;
    manifest.artifact("trajectories", "trajectories.jsonl", trajectories->hash());
    manifest.artifact("diagnostics", "diagnostics.jsonl", diagnostics->hash());
    manifest.artifact("scheduler", "scheduler.jsonl", scheduler_log->hash());
  };
  try {
    const Workspace ws = make_workspace(config);
    const policy::FeatureLayout layout(ws.domain);
    auto params = policy::init_params(layout.dim(), derive_seed(config.seed, {tag(Stream::kInit)}));
    auto opt = policy::make_optimizer(layout.dim(), config.optimizer);
    auto state = curriculum::initial_state(config.scheduler);

    trajectories = std::make_unique<JsonlWriter>((fs::path(dir) / "trajectories.jsonl").string());
    diagnostics = std::make_unique<JsonlWriter>((fs::path(dir) / "diagnostics.jsonl").string());
    scheduler_log = std::make_unique<JsonlWriter>((fs::path(dir) / "scheduler.jsonl").string());

    auto save_ckpt = [&](const std::string& rel, int iteration) {
      write_text((fs::path(dir) / rel).string(), checkpoint_doc(params, layout, state, iteration, opt).dump(1) + "\n");
      return manifest.file(rel);
    };
    manifest.doc()["checkpoints"].push_back(ref_json(save_ckpt(iter_name(0), 0), 0));

    {
      const auto initial = run_eval(params, config, default_settings(config), config.eval.k, "initial");
      write_text((fs::path(dir) / "eval_initial.json").string(), initial.doc.dump(1) + "\n");
      const auto r = manifest.file("eval_initial.json");
      manifest.artifact("eval_initial", r.path, r.hash);
      log("initial clean Avg@" + std::to_string(config.eval.k) + " " + std::to_string(initial.report.ideal.avg));
    }
    sync_logs();
    manifest.save();

    const auto n_train = ws.train.size();
    const optim::ObjectiveConfig& objective = config.objective;
    for (int it = 0; it < config.iterations; ++it) {
      current = it;
      const auto uit = static_cast<std::uint64_t>(it);
      const rollout::Allocation alloc =
          curriculum_on ? curriculum::allocate_noise(state, config.rollouts_per_task) : rollout::Allocation{};
      const auto levels = state.levels();

      Rng batch_rng(derive_seed(config.seed, {tag(Stream::kBatch), uit}));
      std::vector<std::size_t> batch(static_cast<std::size_t>(config.batch_size));
      for (auto& b : batch) b = batch_rng.below(n_train);

      std::vector<rollout::RolloutGroup> groups(batch.size());
      const rollout::EpisodeOptions ep{config.temperature, 0};
      parallel_for(config.workers, batch.size(), [&](std::size_t b) {
        groups[b] = rollout::run_group(params, layout, ws.domain, ws.train[batch[b]], config.rollouts_per_task, alloc,
                                       levels, derive_seed(config.seed, {tag(Stream::kRollout), uit, b}), ep);
      });

      for (std::size_t b = 0; b < groups.size(); ++b) {
        if (!curriculum_on && groups[b].noise_count() != 0)
          throw InvariantError("clean-only variant produced a noisy trajectory");
        for (std::size_t i = 0; i < groups[b].trajectories.size(); ++i) {
          json line{{"iteration", it}, {"group", b}, {"index", i}};
          line.update(rollout::to_json(groups[b].trajectories[i], config.log_features));
          trajectories->write(line);
        }
      }

      const auto diag = config.variant == Variant::kGrpo ? optim::update_policy_plain(groups, params, opt, objective)
                                                         : optim::update_policy(groups, params, opt, objective);

      json alloc_j = json::object();
      for (std::size_t c = 0; c < alloc.size(); ++c)
        if (alloc[c]) alloc_j[noise::name(noise::kTaxonomy[c])] = alloc[c];
      json batch_ids = json::array();
      for (auto b : batch) batch_ids.push_back(ws.train[b].task.task_id);
      diagnostics->write({{"iteration", it},
                         {"tasks", batch_ids},
                         {"allocation", alloc_j},
                         {"noise_fraction", state.total_fraction()},
                         {"train", batch_success(groups)},
                         {"update", diag.to_json()},
                         {"policy_version", params.version}});
      manifest.doc()["iterations"].push_back({{"iteration", it}, {"diagnostics_line", diagnostics->lines()}});

      if ((it + 1) % config.scheduler.window == 0) {
        const int window = state.windows;
        Rng probe_rng(derive_seed(config.seed, {tag(Stream::kProbe), static_cast<std::uint64_t>(window)}));
        std::vector<std::size_t> idx(n_train);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        probe_rng.shuffle(idx);
        std::vector<env::SynthesizedTask> probe_tasks;
        for (int i = 0; i < config.scheduler.probe_tasks; ++i) probe_tasks.push_back(ws.train[idx[i]]);
        const auto probes = curriculum::probe_all(
            params, layout, ws.domain, probe_tasks, state,
            derive_seed(config.seed, {tag(Stream::kProbe), static_cast<std::uint64_t>(window), 1}));

        const auto before = state;
        if (curriculum_on) {
          state = curriculum::schedule_step(state, probes);
        } else {
          ++state.windows;  // baselines probe for the dynamics plot but never escalate
        }
        json pj = json::array();
        std::vector<int> all_noisy;
        for (const auto& p : probes) {
          pj.push_back({{"category", noise::name(p.category)},
                        {"level", p.level},
                        {"clean_rate", p.clean_rate},
                        {"noisy_rate", p.noisy_rate},
                        {"delta", p.delta()}});
          all_noisy.insert(all_noisy.end(), p.noisy_rewards.begin(), p.noisy_rewards.end());
        }
        json escalated = json::array();
        for (std::size_t c = 0; c < curriculum::kCategories; ++c)
          if (state.categories[c].level != before.categories[c].level)
            escalated.push_back(noise::name(noise::kTaxonomy[c]));
        const double noisy_rate =
            all_noisy.empty() ? 0.0
                              : static_cast<double>(std::accumulate(all_noisy.begin(), all_noisy.end(), 0)) /
                                    static_cast<double>(all_noisy.size());
        scheduler_log->write({{"iteration", it + 1},
                             {"window", window},
                             {"noise_fraction_before", before.total_fraction()},
                             {"noise_fraction", state.total_fraction()},
                             {"clean_rate", probes[0].clean_rate},
                             {"noisy_rate", noisy_rate},
                             {"probes", pj},
                             {"escalated", escalated},
                             {"state", state.to_json()}});
        manifest.doc()["checkpoints"].push_back(ref_json(save_ckpt(iter_name(it + 1), it + 1), it + 1));
      }

      manifest.doc()["last_completed_iteration"] = it;
      sync_logs();
      manifest.save();
      if (options.log && ((it + 1) % 10 == 0 || it + 1 == config.iterations)) {
        const auto s = batch_success(groups);
        log("iter " + std::to_string(it + 1) + " clean " + s["clean"]["success"].dump() + " noisy " +
            s["noisy"]["success"].dump() + " frac " + std::to_string(state.total_fraction()));
      }
    }

    current = config.iterations;
    manifest.doc()["final_checkpoint"] = ref_json(save_ckpt("checkpoints/final.json", config.iterations));
    const auto final_eval = run_eval(params, config, default_settings(config), config.eval.k, config.name);
    write_text((fs::path(dir) / "eval_final.json").string(), final_eval.doc.dump(1) + "\n");
    write_text((fs::path(dir) / "eval_final.txt").string(), eval_text(final_eval.report));
    manifest.doc()["final_report"] = ref_json(manifest.file("eval_final.json"));
    {
      const auto r = manifest.file("eval_final.txt");
      manifest.artifact("eval_final_text", r.path, r.hash);
    }
    log("final clean Avg@" + std::to_string(config.eval.k) + " " + std::to_string(final_eval.report.ideal.avg) +
        " noisy " + std::to_string(final_eval.report.pooled.avg));
    sync_logs();
    manifest.doc()["status"] = "completed";
    manifest.save();
  } catch (const std::exception& e) {
    sync_logs();
    manifest.doc()["status"] = "failed";
    manifest.doc()["failed_iteration"] = current;
    manifest.doc()["error"] = e.what();
    manifest.save();
    throw;
  }
  RunManifest m;
  m.run_dir = dir;
  m.doc = manifest.doc();
  return m;
}

}  // namespace narl::exp
