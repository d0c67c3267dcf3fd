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

#include "narl/exp/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "narl/core/error.hpp"

namespace narl::exp {

void Fnv1a::update(std::string_view bytes) {
  for (unsigned char c : bytes) {
    h_ ^= c;
    h_ *= 0x100000001b3ULL;
  }
}

std::string Fnv1a::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
  return buf;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hash_file(const std::string& path) {
  Fnv1a f;
  f.update(read_text(path));
  return f.hex();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

JsonlWriter::JsonlWriter(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error("cannot write " + path);
}

void JsonlWriter::write(const nlohmann::json& j) {
  const std::string line = j.dump() + "\n";
  out_ << line;
  out_.flush();
  fnv_.update(line);
  ++lines_;
}

void parallel_for(int workers, std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t w = std::min<std::size_t>(std::max(workers, 1), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= n) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < w; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tick_label(double v) {
  char buf[32];
  if (std::fabs(v - std::round(v)) < 1e-9)
    std::snprintf(buf, sizeof buf, "%.0f", v);
  else
    std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<Series>& series, double ymin, double ymax) {
  constexpr double W = 720, H = 420, L = 70, R = 190, T = 40, B = 55;
  const double pw = W - L - R, ph = H - T - B;
  double xmin = 0, xmax = 1;
  bool any = false;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!any) xmin = xmax = x;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      any = true;
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return T + (1 - (y - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(L + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = ymin + (ymax - ymin) * i / 5.0;
    o << "<line x1=\"" << num(L) << "\" x2=\"" << num(L + pw) << "\" y1=\"" << num(sy(y)) << "\" y2=\"" << num(sy(y))
      << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << num(L - 6) << "\" y=\"" << num(sy(y) + 4) << "\" text-anchor=\"end\">" << tick_label(y)
      << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double x = xmin + (xmax - xmin) * i / 5.0;
    o << "<text x=\"" << num(sx(x)) << "\" y=\"" << num(T + ph + 18) << "\" text-anchor=\"middle\">" << tick_label(x)
      << "</text>\n";
  }
  o << "<rect x=\"" << num(L) << "\" y=\"" << num(T) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << num(L + pw / 2) << "\" y=\"" << num(H - 12) << "\" text-anchor=\"middle\">" << escape(xlabel)
    << "</text>\n";
  o << "<text x=\"18\" y=\"" << num(T + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << num(T + ph / 2) << ")\">" << escape(ylabel) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const std::string dash = s.dashed ? " stroke-dasharray=\"6 4\"" : "";
    if (!s.points.empty()) {
      o << "<polyline class=\"series\" data-name=\"" << escape(s.name) << "\" fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"" << dash << " points=\"";
      for (std::size_t p = 0; p < s.points.size(); ++p)
        o << (p ? " " : "") << num(sx(s.points[p].first)) << "," << num(sy(s.points[p].second));
      o << "\"/>\n";
    }
    const double ly = T + 12 + 20.0 * static_cast<double>(i);
    o << "<line x1=\"" << num(L + pw + 14) << "\" x2=\"" << num(L + pw + 40) << "\" y1=\"" << num(ly) << "\" y2=\""
      << num(ly) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"" << dash << "/>\n";
    o << "<text x=\"" << num(L + pw + 46) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace narl::exp
