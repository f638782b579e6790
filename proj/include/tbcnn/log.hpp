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

#ifndef TBCNN_LOG_HPP
#define TBCNN_LOG_HPP

#include <string_view>

namespace tbcnn {

enum class LogLevel { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

// Initial level comes from the TBCNN_LOG environment variable (0-3, default 1).
LogLevel log_level();
void set_log_level(LogLevel level);

// Writes "[tbcnn] <msg>" to stderr when `level` is enabled.
void log_message(LogLevel level, std::string_view msg);

}  // namespace tbcnn

#endif  // TBCNN_LOG_HPP
