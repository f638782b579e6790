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

#ifndef TBCNN_ERROR_HPP
#define TBCNN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace tbcnn {

// Every failure raised by the library falls in one of three buckets. The
// buckets line up with the CLI exit statuses and the C API status codes.
enum class ErrorKind { Usage = 1, Data = 2, Numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Bad arguments: dimension mismatch, out-of-range option, wrong call order.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

// Malformed or inconsistent input documents and files.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

// Divergence or non-finite values during learning.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

}  // namespace tbcnn

#endif  // TBCNN_ERROR_HPP
