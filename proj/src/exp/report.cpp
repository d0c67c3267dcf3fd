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
#include <map>
#include <set>

#include "narl/core/error.hpp"
#include "narl/exp/io.hpp"
#include "narl/exp/runner.hpp"

namespace narl::exp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(double x, const char* f = "%.2f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string pad(const std::string& s, std::size_t w, bool right = true) {
  if (s.size() >= w) return s;
  return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
}

struct RunData {
  RunManifest manifest;
  eval::MetricsReport report;
  json dynamics;
  std::string stem;
};

json dynamics_of(const RunManifest& m) {
  json iters = json::array(), clean = json::array(), noisy = json::array(), windows = json::array();
  for (const auto& d : read_jsonl(m.path_of("diagnostics"))) {
    iters.push_back(d.at("iteration"));
    clean.push_back(d.at("train").at("clean").at("success"));
    noisy.push_back(d.at("train").at("noisy").at("success"));
  }
  std::optional<int> first_escalation;
  std::optional<int> first_below;
  const double theta = read_json(m.path_of("config")).at("scheduler").at("theta").get<double>();
  for (const auto& s : read_jsonl(m.path_of("scheduler"))) {
    json levels = json::object();
    double mean_level = 0;
    for (const auto& [cat, st] : s.at("state").at("categories").items()) {
      levels[cat] = st.at("level");
      mean_level += st.at("level").get<double>();
    }
    mean_level /= static_cast<double>(std::max<std::size_t>(levels.size(), 1));
    bool below = false;
    for (const auto& p : s.at("probes"))
      if (p.at("delta").get<double>() < theta) below = true;
    const int it = s.at("iteration");
    if (below && !first_below) first_below = it;
    if (!s.at("escalated").empty() && !first_escalation) first_escalation = it;
    windows.push_back({{"iteration", it},
                       {"clean_rate", s.at("clean_rate")},
                       {"noisy_rate", s.at("noisy_rate")},
                       {"noise_fraction_before", s.at("noise_fraction_before")},
                       {"noise_fraction", s.at("noise_fraction")},
                       {"mean_level", mean_level},
                       {"levels", levels},
                       {"escalated", s.at("escalated")}});
  }
  return {{"iterations", iters},
          {"train_clean_success", clean},
          {"train_noisy_success", noisy},
          {"windows", windows},
          {"first_window_below_theta", first_below ? json(*first_below) : json(nullptr)},
          {"first_escalation", first_escalation ? json(*first_escalation) : json(nullptr)}};
}

std::string dynamics_svg(const std::string& name, const json& dyn) {
  Series tc{"train clean", {}, kPalette[0]}, tn{"train noisy", {}, kPalette[1]};
  Series pc{"probe clean", {}, kPalette[0], true}, pn{"probe noisy", {}, kPalette[1], true};
  const auto& iters = dyn.at("iterations");
  for (std::size_t i = 0; i < iters.size(); ++i) {
    const double x = iters[i].get<double>() + 1;
    if (!dyn["train_clean_success"][i].is_null()) tc.points.push_back({x, 100 * dyn["train_clean_success"][i].get<double>()});
    if (!dyn["train_noisy_success"][i].is_null()) tn.points.push_back({x, 100 * dyn["train_noisy_success"][i].get<double>()});
  }
  for (const auto& w : dyn.at("windows")) {
    pc.points.push_back({w.at("iteration").get<double>(), 100 * w.at("clean_rate").get<double>()});
    pn.points.push_back({w.at("iteration").get<double>(), 100 * w.at("noisy_rate").get<double>()});
  }
  return svg_line_plot("Training dynamics: " + name, "iteration", "success rate (%)", {tc, tn, pc, pn}, 0, 100);
}

std::string curriculum_svg(const std::string& name, const json& dyn) {
  std::vector<Series> series;
  Series frac{"noise fraction x10", {}, "#000000", true};
  std::map<std::string, Series> levels;
  double ymax = 1;
  for (const auto& w : dyn.at("windows")) {
    const double x = w.at("iteration");
    frac.points.push_back({x, 10 * w.at("noise_fraction").get<double>()});
    for (const auto& [cat, lv] : w.at("levels").items()) {
      auto& s = levels[cat];
      s.name = cat;
      s.points.push_back({x, lv.get<double>()});
      ymax = std::max(ymax, lv.get<double>());
    }
  }
  std::size_t i = 0;
  for (auto& [cat, s] : levels) {
    s.color = kPalette[i++ % 8];
    series.push_back(s);
  }
  series.push_back(frac);
  return svg_line_plot("Curriculum: " + name, "iteration", "level / noise fraction x10", series, 0, std::max(ymax, 5.0));
}

std::string variant_table(const std::vector<RunData>& runs, json& out) {
  struct Acc {
    int n = 0;
    double ideal_avg = 0, noisy_avg = 0, ideal_pass = 0, noisy_pass = 0;
  };
  std::map<std::string, Acc> by;
  std::vector<std::string> order;
  for (const auto& r : runs) {
    const std::string v = r.manifest.doc.at("variant");
    if (!by.count(v)) order.push_back(v);
    auto& a = by[v];
    ++a.n;
    a.ideal_avg += r.report.ideal.avg;
    a.noisy_avg += r.report.pooled.avg;
    a.ideal_pass += r.report.ideal.pass;
    a.noisy_pass += r.report.pooled.pass;
  }
  const std::string k = std::to_string(runs.front().report.ideal.k);
  std::string t = "variant x setting (mean over runs)\n" + pad("variant", 20, false) + pad("runs", 6) +
                  pad("ideal Avg@" + k, 14) + pad("noisy Avg@" + k, 14) + pad("gap", 8) + pad("ideal Pass@" + k, 15) +
                  pad("noisy Pass@" + k, 15) + pad("gap", 8) + "\n";
  out = json::array();
  for (const auto& v : order) {
    auto a = by[v];
    const double n = a.n;
    a.ideal_avg /= n;
    a.noisy_avg /= n;
    a.ideal_pass /= n;
    a.noisy_pass /= n;
    t += pad(v, 20, false) + pad(std::to_string(a.n), 6) + pad(fmt(a.ideal_avg), 14) + pad(fmt(a.noisy_avg), 14) +
         pad(fmt(a.ideal_avg - a.noisy_avg), 8) + pad(fmt(a.ideal_pass), 15) + pad(fmt(a.noisy_pass), 15) +
         pad(fmt(a.ideal_pass - a.noisy_pass), 8) + "\n";
    out.push_back({{"variant", v},
                   {"runs", a.n},
                   {"ideal_avg", a.ideal_avg},
                   {"noisy_avg", a.noisy_avg},
                   {"ideal_pass", a.ideal_pass},
                   {"noisy_pass", a.noisy_pass}});
  }
  return t;
}

}  // namespace

ReportOutput run_report(const std::vector<std::string>& manifest_paths, const std::string& out_dir) {
  if (manifest_paths.empty()) throw ConfigError("report: no manifests given");
  std::vector<RunData> runs;
  std::vector<std::string> problems;
  for (const auto& p : manifest_paths) {
    RunData r{RunManifest::load(p), {}, {}, {}};
    if (r.manifest.status() != "completed")
      problems.push_back(p + ": run status is '" + r.manifest.status() + "'");
    for (const auto& pr : r.manifest.verify()) problems.push_back(p + ": " + pr);
    for (const char* key : {"config", "diagnostics", "scheduler"})
      if (!r.manifest.doc.at("artifacts").contains(key)) problems.push_back(p + ": no " + std::string(key) + " artifact");
    if (!r.manifest.doc.at("final_report").is_object()) problems.push_back(p + ": no final report");
    runs.push_back(std::move(r));
  }
  if (!problems.empty()) {
    std::string msg = "report: missing or corrupt artifacts";
    for (const auto& pr : problems) msg += "\n  " + pr;
    throw Error(msg);
  }

  fs::create_directories(out_dir);
  ReportOutput out;
  std::set<std::string> stems;
  json jruns = json::array();
  std::string text;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    auto& r = runs[i];
    const auto& ref = r.manifest.doc.at("final_report");
    r.report = report_from_eval_doc(read_json((fs::path(r.manifest.run_dir) / ref.at("path").get<std::string>()).string()));
    r.report.label = r.manifest.doc.at("name");
    r.dynamics = dynamics_of(r.manifest);
    r.stem = r.report.label;
    if (!stems.insert(r.stem).second) r.stem += "_" + std::to_string(i);
    stems.insert(r.stem);

    const auto dyn_svg = (fs::path(out_dir) / (r.stem + "_dynamics.svg")).string();
    const auto cur_svg = (fs::path(out_dir) / (r.stem + "_curriculum.svg")).string();
    write_text(dyn_svg, dynamics_svg(r.report.label, r.dynamics));
    write_text(cur_svg, curriculum_svg(r.report.label, r.dynamics));
    out.files.push_back(fs::absolute(dyn_svg).string());
    out.files.push_back(fs::absolute(cur_svg).string());

    jruns.push_back({{"name", r.report.label},
                     {"variant", r.manifest.doc.at("variant")},
                     {"seed", r.manifest.doc.at("seed")},
                     {"config_hash", r.manifest.doc.at("config_hash")},
                     {"eval", r.report.to_json()},
                     {"dynamics", r.dynamics}});
    text += "== " + r.report.label + " (" + r.manifest.doc.at("variant").get<std::string>() + ")\n";
    text += eval_text(r.report);
    const auto& fe = r.dynamics.at("first_escalation");
    text += "first curriculum escalation: " + (fe.is_null() ? std::string("none") : "iteration " + fe.dump()) + "\n\n";
  }

  json comparisons = json::array();
  for (std::size_t i = 1; i < runs.size(); ++i) {
    comparisons.push_back(eval::comparison_json(runs[0].report, runs[i].report));
    text += "== " + runs[i].report.label + " vs " + runs[0].report.label + "\n" +
            eval::comparison_text(runs[0].report, runs[i].report) + "\n";
  }
  json variants;
  text += variant_table(runs, variants);

  out.doc = {{"format", "narl-report"}, {"runs", jruns}, {"comparisons", comparisons}, {"variants", variants}};
  out.text = text;
  const auto jpath = (fs::path(out_dir) / "report.json").string();
  const auto tpath = (fs::path(out_dir) / "report.txt").string();
  write_text(jpath, out.doc.dump(1) + "\n");
  write_text(tpath, text);
  out.files.insert(out.files.begin(), {fs::absolute(jpath).string(), fs::absolute(tpath).string()});
  return out;
}

}  // namespace narl::exp
