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

#ifndef TBCNN_AST_HPP
#define TBCNN_AST_HPP

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tbcnn {

// Reserved symbol for kinds not seen when the vocabulary was built. Its id is
// always SymbolVocab::size().
inline constexpr std::string_view kUnknownSymbol = "<UNK>";

// Dense bijection between symbol strings and ids [0, size()).
class SymbolVocab {
 public:
  SymbolVocab() = default;
  // Throws DataError on duplicates or on the reserved <UNK> string.
  explicit SymbolVocab(std::vector<std::string> symbols);

  int size() const { return static_cast<int>(symbols_.size()); }
  int unknown_id() const { return size(); }
  // Rows needed by a table holding one entry per symbol plus <UNK>.
  int table_rows() const { return size() + 1; }

  std::optional<int> find(std::string_view symbol) const;
  // Returns the id of `symbol`, appending it when absent.
  int intern(std::string_view symbol);
  // Symbol string for an id in [0, size()]; size() maps to <UNK>.
  const std::string& symbol(int id) const;
  const std::vector<std::string>& symbols() const { return symbols_; }

  bool operator==(const SymbolVocab& other) const { return symbols_ == other.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

struct AstNode {
  int symbol = 0;
  std::vector<int> children;

  bool operator==(const AstNode&) const = default;
};

// Rooted ordered tree over symbol ids. Always valid once constructed.
class Ast {
 public:
  // Validates that `nodes` form exactly one rooted tree: indices in range,
  // one parent per non-root node, no cycles, non-empty. Throws DataError.
  static Ast create(std::vector<AstNode> nodes, int root);

  int size() const { return static_cast<int>(nodes_.size()); }
  int root() const { return root_; }
  const AstNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<AstNode>& nodes() const { return nodes_; }
  bool is_leaf(int i) const { return node(i).children.empty(); }

  bool operator==(const Ast&) const = default;

 private:
  Ast() = default;
  std::vector<AstNode> nodes_;
  int root_ = 0;
};

// Tree with symbol strings, as read from or written to interchange documents.
// Nodes are in pre-order with the root at index 0.
struct SymbolTree {
  std::vector<std::string> symbols;
  std::vector<std::vector<int>> children;

  int size() const { return static_cast<int>(symbols.size()); }
  bool operator==(const SymbolTree&) const = default;
};

struct LabeledTree {
  SymbolTree tree;
  int label = 0;
};

enum class UnknownSymbols {
  Extend,        // add unseen symbols to the vocabulary
  Reject,        // throw DataError
  MapToUnknown,  // map to the reserved <UNK> id
};

// {"symbol": <string>, "children": [<node>, ...]}
SymbolTree parse_ast_document(std::string_view text);
std::string format_ast_document(const SymbolTree& tree);

// One sample per non-empty line: {"label": <int >= 0>, "ast": <node>}
std::vector<LabeledTree> parse_dataset(std::string_view text);
std::string format_dataset(std::span<const LabeledTree> samples);

// Vocabulary in first-occurrence (pre-order, corpus order) order.
SymbolVocab build_vocab(std::span<const SymbolTree> corpus);
SymbolVocab build_vocab(std::span<const LabeledTree> corpus);

Ast intern_tree(const SymbolTree& tree, SymbolVocab& vocab, UnknownSymbols policy);
SymbolTree to_symbol_tree(const Ast& ast, const SymbolVocab& vocab);

Ast load_ast(std::string_view text, SymbolVocab& vocab, UnknownSymbols policy);
std::string save_ast(const Ast& ast, const SymbolVocab& vocab);

// Half-open interval of left-to-right leaf ordinals under a node.
struct LeafSpan {
  int lo = 0;
  int hi = 0;
  bool operator==(const LeafSpan&) const = default;
};

// Per-node structural annotations. Depth is 1 at the root; h_pos is the
// midpoint of the node's leaf span divided by the total leaf count.
struct AnnotatedAst {
  Ast ast;
  std::vector<int> parent;    // -1 at the root
  std::vector<int> position;  // 1-based ordinal among siblings; 0 at the root
  std::vector<int> leaf_count;
  std::vector<int> depth;
  std::vector<LeafSpan> span;
  std::vector<double> h_pos;
  int total_leaves = 0;
  double mean_leaf_depth = 0.0;

  int size() const { return ast.size(); }
  bool operator==(const AnnotatedAst&) const = default;
};

AnnotatedAst annotate(Ast ast);

// l_i = leaf_count(c_i) / leaf_count(node). Throws UsageError on a leaf.
std::vector<double> child_coefficients(const AnnotatedAst& tree, int node);

}  // namespace tbcnn

#endif  // TBCNN_AST_HPP
