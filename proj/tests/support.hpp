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

#ifndef TBCNN_TESTS_SUPPORT_HPP
#define TBCNN_TESTS_SUPPORT_HPP

#include <string>
#include <string_view>

#include "tbcnn/ast.hpp"
#include "tbcnn/gradcheck.hpp"
#include "tbcnn/numerics.hpp"
#include "tbcnn/trainer.hpp"

namespace testing {

inline std::string data_path(std::string_view name) {
  return std::string(TBCNN_TEST_DATA_DIR) + "/" + std::string(name);
}

inline tbcnn::AnnotatedAst annotated(std::string_view doc, tbcnn::SymbolVocab& vocab) {
  return tbcnn::annotate(tbcnn::load_ast(doc, vocab, tbcnn::UnknownSymbols::Extend));
}

inline tbcnn::AnnotatedAst decl_tree(tbcnn::SymbolVocab& vocab) {
  return annotated(tbcnn::read_file(data_path("decl.json")), vocab);
}

// Random tree with a size drawn from [lo, hi].
inline tbcnn::AnnotatedAst random_annotated(tbcnn::SeededRng& rng, int lo, int hi, int vocab = 6) {
  const int n = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  return tbcnn::annotate(tbcnn::random_tree(n, vocab, rng));
}

}  // namespace testing

#endif  // TBCNN_TESTS_SUPPORT_HPP
