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

#ifndef NARL_ENV_ORACLE_HPP_
#define NARL_ENV_ORACLE_HPP_

#include <cstddef>
#include <vector>

#include "narl/env/env.hpp"

namespace narl::env {

struct OracleResult {
  bool success = false;
  std::vector<Action> witness;  // shortest action sequence, ending in Finish
  std::size_t explored = 0;     // expanded search nodes
};

// Breadth-first search over action sequences drawn from enumerate_actions,
// under a fixed noise realization (the perturbed script in ctx plus the
// tool-side filter). Depth counts agent actions including the final Finish.
//
// Two pruning rules keep the search small without losing solutions:
// calls that would return not_found change nothing and are skipped, and
// writes that set a field away from its target value are skipped, since any
// plan containing one needs a later write that undoes it.
OracleResult oracle_solve(const EpisodeContext& ctx, const Database& initial, int max_depth,
                          const ToolResultFilter* filter = nullptr);

}  // namespace narl::env

#endif  // NARL_ENV_ORACLE_HPP_
