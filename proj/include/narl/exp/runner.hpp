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

#ifndef NARL_EXP_RUNNER_HPP_
#define NARL_EXP_RUNNER_HPP_

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "narl/eval/metrics.hpp"
#include "narl/exp/config.hpp"

namespace narl::exp {

const char* code_version();

// Domain, feature layout and task sets derived from a config's seed.
struct Workspace {
  env::DomainGraph domain;
  std::vector<env::SynthesizedTask> train;
  std::vector<env::SynthesizedTask> eval;
};

Workspace make_workspace(const ExperimentConfig& config);

// Paths in a manifest are relative to the run directory.
struct ArtifactRef {
  std::string path;
  std::string hash;
};

struct RunManifest {
  std::string run_dir;
  nlohmann::json doc;  // manifest.json contents

  std::string status() const { return doc.at("status"); }
  std::string path_of(const std::string& artifact) const;  // absolute
  // Every referenced artifact must exist and match its hash. Returns the
  // problems found, one per artifact.
  std::vector<std::string> verify() const;
  static RunManifest load(const std::string& manifest_path);
};

struct TrainOptions {
  std::ostream* log = nullptr;  // progress lines, optional
};

// Iterates allocate_noise -> run_group -> update -> (every window) probe,
// schedule_step and checkpoint, then evaluates the initial and final
// policies. On error the manifest records the failed iteration and the
// exception propagates.
RunManifest run_train(const ExperimentConfig& config, const TrainOptions& options = {});

// Ideal plus every configured category at eval.level.
std::vector<eval::EvalSetting> default_settings(const ExperimentConfig& config);

struct EvalOutput {
  eval::MetricsReport report;
  nlohmann::json doc;  // settings with raw records and interaction stats, plus the report
};

EvalOutput run_eval(const policy::PolicyParams& params, const ExperimentConfig& config,
                    const std::vector<eval::EvalSetting>& settings, int k, const std::string& label = {});
// Loads the checkpoint against the config's domain; a dimension mismatch is a ConfigError.
EvalOutput run_eval(const std::string& checkpoint_path, const ExperimentConfig& config,
                    const std::vector<eval::EvalSetting>& settings, int k, const std::string& label = {});

// Rebuilds the report from a saved eval document.
eval::MetricsReport report_from_eval_doc(const nlohmann::json& doc);
std::string eval_text(const eval::MetricsReport& report);

struct InjectResult {
  std::vector<std::string> diff;  // "-"/"+" line pairs; empty when nothing changed
  noise::SolvabilityVerdict verdict;
  noise::NoiseRealization realization;
  int max_depth = 0;
  int bound = 0;  // chain_length + 2 * anomalies + 1
  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Perturbs one task of a fixture and runs the solvability check. The
// realization's seed and overrides are used as given.
InjectResult run_inject(const env::DomainGraph& domain, const env::SynthesizedTask& task,
                        const noise::NoiseRealization& realization);

struct ReportOutput {
  nlohmann::json doc;
  std::string text;
  std::vector<std::string> files;  // written, absolute
};

// Comparison tables (first manifest is the baseline), per-run training
// dynamics series and SVG plots, written under out_dir.
ReportOutput run_report(const std::vector<std::string>& manifest_paths, const std::string& out_dir);

}  // namespace narl::exp

#endif  // NARL_EXP_RUNNER_HPP_
