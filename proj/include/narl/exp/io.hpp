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

#ifndef NARL_EXP_IO_HPP_
#define NARL_EXP_IO_HPP_

#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace narl::exp {

// Incremental FNV-1a 64; same digest as hash_string over the concatenation.
class Fnv1a {
 public:
  void update(std::string_view bytes);
  std::uint64_t digest() const { return h_; }
  std::string hex() const;

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string hash_file(const std::string& path);  // hex; throws Error if unreadable
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);
nlohmann::json read_json(const std::string& path);
std::vector<nlohmann::json> read_jsonl(const std::string& path);

// Appends JSON lines and keeps the running hash of everything written.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path);
  void write(const nlohmann::json& j);
  std::string hash() const { return fnv_.hex(); }
  std::size_t lines() const { return lines_; }

 private:
  std::ofstream out_;
  Fnv1a fnv_;
  std::size_t lines_ = 0;
};

// fn(i) for i in [0, n) on up to `workers` threads. The first exception by
// index is rethrown after all threads finish.
void parallel_for(int workers, std::size_t n, const std::function<void(std::size_t)>& fn);

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  std::string color = "#1f77b4";
  bool dashed = false;
};

// Static line plot with axes, ticks and a legend.
std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<Series>& series, double ymin, double ymax);

}  // namespace narl::exp

#endif  // NARL_EXP_IO_HPP_
