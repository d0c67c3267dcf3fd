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

#ifndef NARL_CORE_ERROR_HPP_
#define NARL_CORE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace narl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller violated an operation's documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Rewards in a group (or subset) are all equal; the group must be filtered.
class DegenerateGroupError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite value reached a gradient, ratio or parameter.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Internal invariant broken; carries whatever log the thrower attached.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace narl

#endif  // NARL_CORE_ERROR_HPP_
