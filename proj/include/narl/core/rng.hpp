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

#ifndef NARL_CORE_RNG_HPP_
#define NARL_CORE_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace narl {

// Seed splitting. Every stochastic consumer derives its own stream from the
// global seed plus a path of integers (purpose tag, iteration, task, rollout),
// so results do not depend on how work is scheduled across threads.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v);
std::uint64_t hash_string(std::string_view s);  // FNV-1a 64
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

// Stream tags used with derive_seed.
enum class Stream : std::uint64_t {
  kDomain = 1,
  kTrainTasks = 2,
  kEvalTasks = 3,
  kInit = 4,
  kBatch = 5,
  kRollout = 6,
  kNoise = 7,
  kProbe = 8,
  kEval = 9,
  kTaskLength = 10,
};

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

// mt19937_64 with distribution code written out, so draws are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();                    // [0, 1)
  std::size_t below(std::size_t n);    // [0, n), n > 0
  std::int64_t range(std::int64_t lo, std::int64_t hi);  // inclusive
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace narl

#endif  // NARL_CORE_RNG_HPP_
