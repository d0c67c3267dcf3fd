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

#ifndef NARL_TESTS_FIXTURES_HPP_
#define NARL_TESTS_FIXTURES_HPP_

#include <utility>
#include <vector>

#include "narl/core/rng.hpp"
#include "narl/env/domain.hpp"
#include "narl/env/task.hpp"
#include "narl/policy/policy.hpp"

namespace narl::testing {

inline const env::DomainGraph& default_domain() {
  static const env::DomainGraph d = env::build_domain(env::DomainSize{}, 1);
  return d;
}

inline const policy::FeatureLayout& default_layout() {
  static const policy::FeatureLayout l(default_domain());
  return l;
}

// Hand-set weights that solve clean tasks: ground arguments in goal values
// and the freshest list item, write once, finish after the write. Some
// required reads happen after the write, so episodes can exceed the chain.
inline policy::PolicyParams oracle_params(const policy::FeatureLayout& layout) {
  policy::PolicyParams p;
  p.weights.assign(layout.dim(), 0.0);
  const std::pair<const char*, double> w[] = {
      {"ground.goal", 3},        {"ground.list_last", 4},   {"ground.list_nonlast", -6}, {"write.intent", 4},
      {"finish.write_done", 3},  {"finish.no_write", -4},   {"call.repeat_ok", -3},      {"write.done_before", -3},
      {"call.record_read", -2},  {"call.tool_ok_before", -2}, {"type.read", 1}};
  for (const auto& [name, v] : w) p.weights[layout.index(name)] = v;
  return p;
}

inline std::vector<env::SynthesizedTask> make_tasks(const env::DomainGraph& d, int n, std::uint64_t seed,
                                                    int min_len = 2, int max_len = 4) {
  std::vector<env::SynthesizedTask> out;
  for (int i = 0; i < n; ++i) {
    const int len = min_len + i % (max_len - min_len + 1);
    out.push_back(env::synthesize_task(d, len, derive_seed(seed, {static_cast<std::uint64_t>(i)}),
                                       "t" + std::to_string(i)));
  }
  return out;
}

// Random features in [0, 1] with a few exact zeros.
inline std::vector<policy::FeatureVector> random_features(Rng& rng, std::size_t k, std::size_t dim) {
  std::vector<policy::FeatureVector> out(k, policy::FeatureVector(dim));
  for (auto& f : out)
    for (auto& x : f) x = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
  return out;
}

}  // namespace narl::testing

#endif  // NARL_TESTS_FIXTURES_HPP_
