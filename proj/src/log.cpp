//
// Copyright 2026 The TBCNN Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "tbcnn/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace tbcnn {

namespace {

int initial_level() {
  const char* env = std::getenv("TBCNN_LOG");
  if (env == nullptr || *env < '0' || *env > '3' || env[1] != '\0') return 1;
  return *env - '0';
}

std::atomic<int>& level_store() {
  static std::atomic<int> level{initial_level()};
  return level;
}

}  // namespace

LogLevel log_level() { return static_cast<LogLevel>(level_store().load()); }

void set_log_level(LogLevel level) { level_store().store(static_cast<int>(level)); }

void log_message(LogLevel level, std::string_view msg) {
  if (level == LogLevel::Quiet || static_cast<int>(level) > level_store().load()) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[tbcnn] " << msg << '\n';
}

}  // namespace tbcnn
