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

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "narl/core/error.hpp"
#include "narl/exp/io.hpp"
#include "narl/exp/runner.hpp"

namespace narl::exp {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("narl_" + std::string(info->name()) + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string write_config(const TempDir& dir, const json& j, const std::string& name = "config.json") {
  const auto p = dir.file(name);
  write_text(p, j.dump(2));
  return p;
}

// Small enough to train in well under a second.
json tiny(const TempDir& dir, const std::string& variant, int iterations = 4) {
  return {{"seed", 3},
          {"variant", variant},
          {"tasks", {{"train", 12}, {"eval", 6}}},
          {"rollouts_per_task", 8},
          {"batch_size", 2},
          {"iterations", iterations},
          {"scheduler", {{"window", 2}, {"probe_tasks", 4}, {"probe_runs", 2}}},
          {"eval", {{"k", 2}, {"categories", {"tool.failure", "user.ambiguous"}}}},
          {"output_dir", dir.file("runs")}};
}

TEST(Config, MinimalFileTakesDefaults) {
  TempDir dir;
  const auto c = load_config(write_config(dir, {{"seed", 7}}));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.variant, Variant::kHybridCurriculum);
  EXPECT_EQ(c.name, "hybrid-curriculum-s7");
  EXPECT_EQ(c.rollouts_per_task, 16);
  EXPECT_EQ(c.scheduler.cap, 0.5);
  EXPECT_EQ(c.scheduler.theta, 0.05);
  EXPECT_EQ(c.eval.k, 4);
}

TEST(Config, RejectsCapAboveHalf) {
  TempDir dir;
  try {
    load_config(write_config(dir, {{"seed", 1}, {"scheduler", {{"rho_max", 0.7}}}}));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("0.5"), std::string::npos) << e.what();
  }
}

TEST(Config, NamesMisspelledKey) {
  TempDir dir;
  try {
    load_config(write_config(dir, {{"seed", 1}, {"batch_sise", 4}}));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("batch_sise"), std::string::npos) << e.what();
  }
  try {
    load_config(write_config(dir, {{"seed", 1}, {"optimizer", {{"learning_rate", 0.1}}}}));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("optimizer.learning_rate"), std::string::npos) << e.what();
  }
}

TEST(Config, OtherErrors) {
  TempDir dir;
  EXPECT_THROW(load_config(dir.file("missing.json")), ConfigError);
  write_text(dir.file("bad.json"), "{ not json");
  EXPECT_THROW(load_config(dir.file("bad.json")), ConfigError);
  EXPECT_THROW(load_config(write_config(dir, json::object())), ConfigError);  // seed required
  EXPECT_THROW(load_config(write_config(dir, {{"seed", 1}, {"iterations", "ten"}})), ConfigError);
  EXPECT_THROW(load_config(write_config(dir, {{"seed", 1}, {"variant", "ppo"}})), ConfigError);
  EXPECT_THROW(load_config(write_config(dir, {{"seed", 1}, {"rollouts_per_task", 1}})), ConfigError);
}

TEST(Config, RoundTripAndOverrides) {
  TempDir dir;
  const auto path = write_config(dir, tiny(dir, "gspo"));
  const auto c = load_config(path);
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  const auto o = load_config(path, {{"seed", 9}, {"variant", "grpo"}});
  EXPECT_EQ(o.seed, 9u);
  EXPECT_EQ(o.variant, Variant::kGrpo);
  EXPECT_NE(config_hash(o), config_hash(c));
  auto w = c;
  w.workers = 4;
  EXPECT_EQ(config_hash(w), config_hash(c));
}

TEST(Config, RelativeOutputUnderRoot) {
  TempDir dir;
  ::setenv(kOutputRootEnv, dir.str().c_str(), 1);
  const auto c = load_config(write_config(dir, {{"seed", 2}, {"name", "r"}, {"output_dir", "out"}}));
  EXPECT_EQ(fs::path(run_directory(c)), fs::path(dir.str()) / "out" / "r");
  ::unsetenv(kOutputRootEnv);
}

TEST(Workspace, DeterministicAndSized) {
  TempDir dir;
  const auto c = load_config(write_config(dir, tiny(dir, "grpo")));
  const auto a = make_workspace(c), b = make_workspace(c);
  ASSERT_EQ(a.train.size(), 12u);
  ASSERT_EQ(a.eval.size(), 6u);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].task.task_id, b.train[i].task.task_id);
    EXPECT_EQ(a.train[i].task.reference_chain.size(), b.train[i].task.reference_chain.size());
    EXPECT_GE(a.train[i].task.reference_chain.size(), 2u);
    EXPECT_LE(a.train[i].task.reference_chain.size(), 4u);
  }
}

TEST(Train, GrpoProducesNoNoisyTrajectories) {
  TempDir dir;
  const auto m = run_train(load_config(write_config(dir, tiny(dir, "grpo"))));
  EXPECT_EQ(m.status(), "completed");
  const auto lines = read_jsonl(m.path_of("trajectories"));
  ASSERT_EQ(lines.size(), 4u * 2 * 8);
  for (const auto& l : lines) {
    EXPECT_EQ(l.at("noise_tag"), "clean");
    EXPECT_FALSE(l.contains("realization"));
  }
  for (const auto& d : read_jsonl(m.path_of("diagnostics"))) EXPECT_EQ(d.at("noise_fraction"), 0.0);
  EXPECT_TRUE(m.verify().empty());
}

TEST(Train, DeterministicAcrossRunsAndWorkers) {
  TempDir dir;
  auto j = tiny(dir, "hybrid-curriculum", 6);
  j["name"] = "a";
  const auto a = run_train(load_config(write_config(dir, j)));
  j["name"] = "b";
  j["workers"] = 3;
  const auto b = run_train(load_config(write_config(dir, j)));
  for (const char* key : {"trajectories", "diagnostics", "scheduler"})
    EXPECT_EQ(hash_file(a.path_of(key)), hash_file(b.path_of(key))) << key;
  EXPECT_EQ(a.doc.at("checkpoints"), b.doc.at("checkpoints"));
}

TEST(Train, SmokeRunImprovesCleanAvg) {
  TempDir dir;
  const json j{{"seed", 1},
               {"tasks", {{"train", 50}, {"eval", 20}}},
               {"rollouts_per_task", 16},
               {"iterations", 50},
               {"output_dir", dir.file("runs")}};
  const auto m = run_train(load_config(write_config(dir, j)));
  const auto initial = report_from_eval_doc(read_json(m.path_of("eval_initial")));
  const auto final_report = report_from_eval_doc(read_json(m.run_dir + "/eval_final.json"));
  EXPECT_GT(final_report.ideal.avg, initial.ideal.avg);
  EXPECT_EQ(initial.ideal.k, 4);
}

TEST(Train, ManifestVerifyCatchesTampering) {
  TempDir dir;
  const auto m = run_train(load_config(write_config(dir, tiny(dir, "gspo", 2))));
  ASSERT_TRUE(m.verify().empty());
  const auto reloaded = RunManifest::load(m.run_dir + "/manifest.json");
  EXPECT_EQ(reloaded.doc, m.doc);
  std::ofstream(m.path_of("diagnostics"), std::ios::app) << "{}\n";
  fs::remove(m.path_of("scheduler"));
  const auto problems = m.verify();
  ASSERT_EQ(problems.size(), 2u);
}

TEST(Train, FailureRecordedInManifest) {
  TempDir dir;
  auto j = tiny(dir, "grpo");
  j["domain"] = {{"entity_kinds", 1}, {"tools", 3}, {"links", 0}, {"records_per_kind", 1}};
  const auto c = load_config(write_config(dir, j));
  EXPECT_ANY_THROW(run_train(c));
  const auto doc = read_json(run_directory(c) + "/manifest.json");
  EXPECT_EQ(doc.at("status"), "failed");
  EXPECT_FALSE(doc.at("error").get<std::string>().empty());
}

TEST(Eval, OracleCheckpointScoresFull) {
  TempDir dir;
  const auto c = load_config(write_config(dir, tiny(dir, "grpo")));
  const auto ws = make_workspace(c);
  const policy::FeatureLayout layout(ws.domain);
  const auto ckpt = dir.file("oracle.json");
  save_checkpoint(ckpt, testing::oracle_params(layout), layout);
  const auto out = run_eval(ckpt, c, {eval::EvalSetting{"ideal", std::nullopt}}, 4, "oracle");
  EXPECT_DOUBLE_EQ(out.report.ideal.avg, 100.0);
  EXPECT_DOUBLE_EQ(out.report.ideal.pass, 100.0);

  const auto rnd = run_eval(policy::init_params(layout.dim(), 1), c, default_settings(c), 4, "init");
  EXPECT_LT(rnd.report.ideal.avg, 100.0);
  EXPECT_EQ(rnd.report.noisy.size(), 2u);
  const auto again = report_from_eval_doc(rnd.doc);
  EXPECT_EQ(again.to_json(), rnd.report.to_json());
  const auto one = run_eval(policy::init_params(layout.dim(), 1), c, default_settings(c), 1);
  EXPECT_DOUBLE_EQ(one.report.ideal.avg, one.report.ideal.pass);
}

TEST(Eval, DimensionMismatchIsConfigError) {
  TempDir dir;
  const auto c = load_config(write_config(dir, tiny(dir, "grpo")));
  const auto ws = make_workspace(c);
  const policy::FeatureLayout layout(ws.domain);
  EXPECT_THROW(run_eval(policy::init_params(layout.dim() + 1, 1), c, default_settings(c), 2), ConfigError);
  auto short_ckpt = checkpoint_to_json(policy::init_params(layout.dim(), 1), layout);
  short_ckpt["weights"] = std::vector<double>(3, 0.0);
  short_ckpt["feature_dim"] = 3;
  write_text(dir.file("short.json"), short_ckpt.dump());
  EXPECT_THROW(run_eval(dir.file("short.json"), c, default_settings(c), 2), ConfigError);
}

class InjectTest : public ::testing::Test {
 protected:
  const env::DomainGraph& d = testing::default_domain();
  std::vector<env::SynthesizedTask> tasks = testing::make_tasks(d, 6, 70, 3, 3);
};

TEST_F(InjectTest, LevelZeroChangesNothing) {
  const auto r = run_inject(d, tasks[0], {noise::make_spec(noise::Category::kAmbiguous, 0), 1, {}, {}});
  EXPECT_TRUE(r.diff.empty());
  EXPECT_TRUE(r.verdict.solvable);
  EXPECT_EQ(r.bound, 4);
}

TEST_F(InjectTest, AmbiguousWithholdsOneSlot) {
  const auto r = run_inject(d, tasks[0], {noise::make_spec(noise::Category::kAmbiguous, 1), 1, {}, {}});
  ASSERT_FALSE(r.diff.empty());
  int removed = 0;
  for (const auto& line : r.diff) removed += line.rfind("- ", 0) == 0;
  EXPECT_GE(removed, 1);
  EXPECT_TRUE(r.verdict.solvable);
  EXPECT_EQ(r.verdict.anomalies, 1);
  EXPECT_LE(static_cast<int>(r.verdict.oracle.witness.size()), r.bound);
  EXPECT_NE(r.to_text().find("solvable"), std::string::npos);
  EXPECT_EQ(r.to_json().at("verdict").at("solvable"), true);
}

TEST_F(InjectTest, HostileRealizationUnsolvable) {
  const noise::NoiseRealization hostile{
      noise::make_spec(noise::Category::kFailure, 1), 0, {}, {{"", std::nullopt, true, true}}};
  const auto r = run_inject(d, tasks[0], hostile);
  EXPECT_FALSE(r.verdict.solvable);
  EXPECT_NE(r.to_text().find("UNSOLVABLE"), std::string::npos);
}

TEST_F(InjectTest, ToolNoiseShowsObservationDiff) {
  const noise::NoiseRealization r0{noise::make_spec(noise::Category::kFailure, 1), 0, {}, {{"", 0, true, false}}};
  const auto r = run_inject(d, tasks[0], r0);
  EXPECT_TRUE(r.verdict.solvable);
  EXPECT_FALSE(r.diff.empty());
}

TEST(Report, WritesArtifactsAndRegeneratesIdentically) {
  TempDir dir;
  std::vector<std::string> manifests;
  for (const char* v : {"gspo", "hybrid-curriculum"}) {
    const auto m = run_train(load_config(write_config(dir, tiny(dir, v))));
    manifests.push_back(m.run_dir + "/manifest.json");
  }
  const auto a = run_report(manifests, dir.file("rep1"));
  const auto b = run_report(manifests, dir.file("rep2"));
  ASSERT_EQ(a.files.size(), b.files.size());
  ASSERT_GE(a.files.size(), 6u);  // json, txt, two plots per run
  for (std::size_t i = 0; i < a.files.size(); ++i) {
    EXPECT_TRUE(fs::exists(a.files[i])) << a.files[i];
    EXPECT_EQ(fs::path(a.files[i]).filename(), fs::path(b.files[i]).filename());
    EXPECT_EQ(read_text(a.files[i]), read_text(b.files[i])) << a.files[i];
  }
  EXPECT_EQ(a.doc.at("runs").size(), 2u);
  EXPECT_EQ(a.doc.at("comparisons").size(), 1u);
  EXPECT_NE(a.text.find("gap"), std::string::npos);
  bool dynamics = false;
  for (const auto& f : a.files) {
    if (f.find("_dynamics.svg") == std::string::npos) continue;
    const auto svg = read_text(f);
    dynamics = svg.find("data-name=\"clean\"") != std::string::npos || svg.find("clean") != std::string::npos;
  }
  EXPECT_TRUE(dynamics);
}

TEST(Report, IncompleteRunListed) {
  TempDir dir;
  const auto m = run_train(load_config(write_config(dir, tiny(dir, "grpo", 2))));
  fs::remove(m.run_dir + "/eval_final.json");
  try {
    run_report({m.run_dir + "/manifest.json"}, dir.file("rep"));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("eval_final"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace narl::exp
