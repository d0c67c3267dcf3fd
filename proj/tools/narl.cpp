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

// Command-line entry point: gen-domain, train, eval, inject, report.
//
// Exit codes: 0 success, 1 config error, 2 runtime abort, 3 check failure
// (inject found the realization unsolvable).

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "narl/core/error.hpp"
#include "narl/core/rng.hpp"
#include "narl/env/json_io.hpp"
#include "narl/exp/io.hpp"
#include "narl/exp/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace narl;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeAbort = 2;
constexpr int kCheckFailed = 3;

std::string under_output_root(const std::string& rel) {
  fs::path p(rel);
  if (p.is_relative())
    if (const char* root = std::getenv(exp::kOutputRootEnv); root && *root) p = fs::path(root) / p;
  return p.string();
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string name;
  std::optional<int> iterations;

  json overrides() const {
    json o = json::object();
    if (seed) o["seed"] = *seed;
    if (!variant.empty()) o["variant"] = variant;
    if (!name.empty()) o["name"] = name;
    if (iterations) o["iterations"] = *iterations;
    return o;
  }
  exp::ExperimentConfig load() const { return exp::load_config(config, overrides()); }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--variant", c.variant, "override the variant (grpo, gspo, hybrid-curriculum)");
  cmd->add_option("--name", c.name, "override the run name");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-aware agent RL experiments"};
  app.require_subcommand(1);

  Common gen_c;
  std::string gen_split = "eval", gen_out;
  std::optional<int> gen_count;
  auto* gen = app.add_subcommand("gen-domain", "write a domain and task fixture");
  add_common(gen, gen_c);
  gen->add_option("--split", gen_split, "task set to include")->check(CLI::IsMember({"train", "eval"}));
  gen->add_option("--count", gen_count, "number of tasks (default: the split's size)")->check(CLI::PositiveNumber);
  gen->add_option("-o,--out", gen_out, "output file");

  Common train_c;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "run one training experiment");
  add_common(train, train_c);
  train->add_option("--iterations", train_c.iterations, "override the iteration count");
  train->add_flag("-q,--quiet", quiet, "no progress output");

  Common eval_c;
  std::string eval_ckpt, eval_out;
  std::optional<int> eval_k, eval_level;
  std::vector<std::string> eval_cats;
  bool ideal_only = false;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint under ideal and noisy settings");
  add_common(ev, eval_c);
  ev->add_option("--checkpoint", eval_ckpt, "policy checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("-k", eval_k, "runs per task (default: eval.k)")->check(CLI::PositiveNumber);
  ev->add_option("--level", eval_level, "noise level for noisy settings (default: eval.level)");
  ev->add_option("--category", eval_cats, "noise categories (default: eval.categories)");
  ev->add_flag("--ideal-only", ideal_only, "skip the noisy settings");
  ev->add_option("-o,--out", eval_out, "output prefix; writes <out>.json and <out>.txt");

  std::string inj_fixture, inj_task_id, inj_category, inj_realization, inj_out;
  std::size_t inj_task = 0;
  int inj_level = 1;
  std::uint64_t inj_seed = 0;
  bool inj_json = false;
  auto* inj = app.add_subcommand("inject", "preview one noise realization on a fixture task");
  inj->add_option("--fixture", inj_fixture, "fixture written by gen-domain")->required()->check(CLI::ExistingFile);
  auto* by_index = inj->add_option("--task", inj_task, "task index in the fixture");
  auto* by_id = inj->add_option("--task-id", inj_task_id, "task id in the fixture");
  by_index->excludes(by_id);
  auto* cat_opt = inj->add_option("--category", inj_category, "noise category, e.g. user.ambiguous");
  inj->add_option("--level", inj_level, "difficulty level")->check(CLI::NonNegativeNumber);
  inj->add_option("--seed", inj_seed, "realization seed");
  auto* real_opt =
      inj->add_option("--realization", inj_realization, "realization JSON (spec, seed, overrides)")->check(CLI::ExistingFile);
  cat_opt->excludes(real_opt);
  inj->add_flag("--json", inj_json, "print JSON instead of text");
  inj->add_option("-o,--out", inj_out, "also write the JSON result here");

  std::vector<std::string> rep_manifests;
  std::string rep_out = "report";
  auto* rep = app.add_subcommand("report", "tables and plots from one or more runs");
  rep->add_option("-m,--manifest", rep_manifests, "run manifests; the first is the baseline")->required();
  rep->add_option("-o,--out", rep_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) {
      const auto cfg = gen_c.load();
      const auto ws = exp::make_workspace(cfg);
      env::Fixture f{ws.domain, gen_split == "train" ? ws.train : ws.eval};
      if (gen_count) {
        if (static_cast<std::size_t>(*gen_count) > f.tasks.size())
          throw ConfigError("--count exceeds the " + gen_split + " split size " + std::to_string(f.tasks.size()));
        f.tasks.resize(static_cast<std::size_t>(*gen_count));
      }
      std::string out = gen_out;
      if (out.empty()) {
        fs::create_directories(exp::run_directory(cfg));
        out = (fs::path(exp::run_directory(cfg)) / ("fixture_" + gen_split + ".json")).string();
      } else {
        out = under_output_root(out);
      }
      env::save_fixture(f, out);
      std::cout << out << "\n";
      return kOk;
    }

    if (*train) {
      const auto cfg = train_c.load();
      exp::TrainOptions opts;
      if (!quiet) opts.log = &std::cerr;
      const auto m = exp::run_train(cfg, opts);
      std::cout << (fs::path(m.run_dir) / "manifest.json").string() << "\n";
      return kOk;
    }

    if (*ev) {
      auto cfg = eval_c.load();
      if (eval_level) cfg.eval.level = *eval_level;
      if (!eval_cats.empty()) {
        cfg.eval.categories.clear();
        for (const auto& c : eval_cats) cfg.eval.categories.push_back(noise::category_from_name(c));
      }
      if (ideal_only) cfg.eval.categories.clear();
      cfg.validate();
      const int k = eval_k.value_or(cfg.eval.k);
      const auto out = exp::run_eval(eval_ckpt, cfg, exp::default_settings(cfg), k, fs::path(eval_ckpt).stem().string());
      const auto text = exp::eval_text(out.report);
      std::cout << text;
      if (!eval_out.empty()) {
        const auto prefix = under_output_root(eval_out);
        if (fs::path(prefix).has_parent_path()) fs::create_directories(fs::path(prefix).parent_path());
        exp::write_text(prefix + ".json", out.doc.dump(1) + "\n");
        exp::write_text(prefix + ".txt", text);
      }
      return kOk;
    }

    if (*inj) {
      const auto fixture = env::load_fixture(inj_fixture);
      const env::SynthesizedTask* task = nullptr;
      if (!inj_task_id.empty()) {
        for (const auto& t : fixture.tasks)
          if (t.task.task_id == inj_task_id) task = &t;
        if (!task) throw ConfigError("no task '" + inj_task_id + "' in " + inj_fixture);
      } else {
        if (inj_task >= fixture.tasks.size())
          throw ConfigError("--task " + std::to_string(inj_task) + " out of range (fixture has " +
                            std::to_string(fixture.tasks.size()) + " tasks)");
        task = &fixture.tasks[inj_task];
      }
      noise::NoiseRealization real;
      if (!inj_realization.empty()) {
        real = noise::realization_from_json(exp::read_json(inj_realization));
      } else {
        if (inj_category.empty()) throw ConfigError("inject needs --category or --realization");
        real.spec = noise::make_spec(noise::category_from_name(inj_category), inj_level);
        real.seed = inj_seed;
      }
      const auto r = exp::run_inject(fixture.domain, *task, real);
      if (inj_json)
        std::cout << r.to_json().dump(1) << "\n";
      else
        std::cout << "task " << task->task.task_id << " (chain " << task->task.chain_length() << ")\n" << r.to_text();
      if (!inj_out.empty()) exp::write_text(under_output_root(inj_out), r.to_json().dump(1) + "\n");
      return r.verdict.solvable ? kOk : kCheckFailed;
    }

    if (*rep) {
      const auto out = exp::run_report(rep_manifests, under_output_root(rep_out));
      std::cout << out.text;
      for (const auto& f : out.files) std::cerr << "wrote " << f << "\n";
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeAbort;
  }
  return kOk;
}
