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

// Internal helpers for the versioned JSON checkpoint documents.

#ifndef TBCNN_SRC_JSON_UTIL_HPP
#define TBCNN_SRC_JSON_UTIL_HPP

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

#include "tbcnn/ast.hpp"
#include "tbcnn/error.hpp"
#include "tbcnn/numerics.hpp"

namespace tbcnn::detail {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

inline ordered_json to_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

inline ordered_json to_json(const Vector& v) { return ordered_json(v); }

inline json parse_document(std::string_view text, std::string_view format, int version) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("corrupt ") + std::string(format) + " file: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("format") || doc["format"] != format)
    throw DataError("not a " + std::string(format) + " document");
  if (!doc.contains("version") || !doc["version"].is_number_integer())
    throw DataError("missing version field");
  if (doc["version"].get<int>() != version)
    throw DataError("unsupported " + std::string(format) + " version " +
                    std::to_string(doc["version"].get<int>()));
  return doc;
}

inline const json& field(const json& doc, const char* name) {
  auto it = doc.find(name);
  if (it == doc.end()) throw DataError(std::string("missing field: ") + name);
  return *it;
}

inline Matrix matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const char* what) {
  if (!j.is_array() || j.size() != rows) throw DataError(std::string("bad shape for ") + what);
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const json& row = j[r];
    if (!row.is_array() || row.size() != cols) throw DataError(std::string("bad shape for ") + what);
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw DataError(std::string("non-numeric entry in ") + what);
      m(r, c) = row[c].get<double>();
    }
  }
  if (!all_finite(m.data())) throw DataError(std::string("non-finite entry in ") + what);
  return m;
}

inline Vector vector_from_json(const json& j, std::size_t n, const char* what) {
  if (!j.is_array() || j.size() != n) throw DataError(std::string("bad shape for ") + what);
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!j[i].is_number()) throw DataError(std::string("non-numeric entry in ") + what);
    v[i] = j[i].get<double>();
  }
  if (!all_finite(v)) throw DataError(std::string("non-finite entry in ") + what);
  return v;
}

inline SymbolVocab vocab_from_json(const json& j) {
  if (!j.is_array()) throw DataError("vocab must be an array of strings");
  std::vector<std::string> symbols;
  for (const auto& s : j) {
    if (!s.is_string()) throw DataError("vocab must be an array of strings");
    symbols.push_back(s.get<std::string>());
  }
  return SymbolVocab(std::move(symbols));
}

inline int positive_int(const json& doc, const char* name) {
  const json& v = field(doc, name);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw DataError(std::string("bad value for ") + name);
  return v.get<int>();
}

}  // namespace tbcnn::detail

#endif  // TBCNN_SRC_JSON_UTIL_HPP
