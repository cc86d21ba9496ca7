// Copyright 2026 The PRMPPI Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prmppi/common.hpp"

#include <cstdio>
#include <iostream>
#include <mutex>
#include <set>
#include <string>

namespace prmppi {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink() {
  static WarningSink s = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return s;
}

std::set<std::string, std::less<>>& reported() {
  static std::set<std::string, std::less<>> r;
  return r;
}

}  // namespace

void set_warning_sink(WarningSink s) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  sink() = std::move(s);
  reported().clear();
}

void warn(std::string_view message) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  if (sink()) sink()(message);
}

void warn_once(std::string_view message) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  if (!reported().emplace(message).second) return;
  if (sink()) sink()(message);
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

Eigen::VectorXd sample_uniform(const Box& box, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd v(box.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = box.lower(i) + unit(rng) * (box.upper(i) - box.lower(i));
  }
  return v;
}

}  // namespace prmppi
