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

#include "tbcnn/ast.hpp"

#include <json.hpp>

#include <sstream>
#include <utility>

#include "tbcnn/error.hpp"

namespace tbcnn {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void read_node(const json& doc, SymbolTree& out) {
  if (!doc.is_object()) throw DataError("AST node must be an object");
  auto sym = doc.find("symbol");
  auto kids = doc.find("children");
  if (sym == doc.end() || !sym->is_string()) throw DataError("AST node needs a string \"symbol\"");
  if (kids == doc.end() || !kids->is_array()) throw DataError("AST node needs a \"children\" array");
  const std::string& symbol = sym->get_ref<const std::string&>();
  if (symbol.empty()) throw DataError("AST node has an empty symbol");

  const int self = out.size();
  out.symbols.push_back(symbol);
  out.children.emplace_back();
  for (const auto& child : *kids) {
    const int index = out.size();
    out.children[static_cast<std::size_t>(self)].push_back(index);
    read_node(child, out);
  }
}

SymbolTree tree_from_json(const json& doc) {
  SymbolTree tree;
  read_node(doc, tree);
  return tree;
}

ordered_json tree_to_json(const SymbolTree& tree, int node) {
  ordered_json out;
  out["symbol"] = tree.symbols[static_cast<std::size_t>(node)];
  ordered_json kids = ordered_json::array();
  for (int c : tree.children[static_cast<std::size_t>(node)]) kids.push_back(tree_to_json(tree, c));
  out["children"] = std::move(kids);
  return out;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed document: ") + e.what());
  }
}

}  // namespace

SymbolVocab::SymbolVocab(std::vector<std::string> symbols) {
  for (auto& s : symbols) {
    if (s == kUnknownSymbol) throw DataError("vocabulary may not contain the reserved <UNK> symbol");
    if (find(s)) throw DataError("duplicate symbol in vocabulary: " + s);
    intern(s);
  }
}

std::optional<int> SymbolVocab::find(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int SymbolVocab::intern(std::string_view symbol) {
  if (auto id = find(symbol)) return *id;
  const int id = size();
  symbols_.emplace_back(symbol);
  index_.emplace(symbols_.back(), id);
  return id;
}

const std::string& SymbolVocab::symbol(int id) const {
  static const std::string unknown(kUnknownSymbol);
  if (id == size()) return unknown;
  if (id < 0 || id > size()) throw UsageError("symbol id out of range: " + std::to_string(id));
  return symbols_[static_cast<std::size_t>(id)];
}

Ast Ast::create(std::vector<AstNode> nodes, int root) {
  const int n = static_cast<int>(nodes.size());
  if (n == 0) throw DataError("empty tree");
  if (root < 0 || root >= n) throw DataError("root index out of range");

  std::vector<int> parents(static_cast<std::size_t>(n), -1);
  for (int p = 0; p < n; ++p) {
    if (nodes[static_cast<std::size_t>(p)].symbol < 0) throw DataError("negative symbol id");
    for (int c : nodes[static_cast<std::size_t>(p)].children) {
      if (c < 0 || c >= n) throw DataError("child index out of range: " + std::to_string(c));
      if (c == root) throw DataError("cycle: the root appears as a child");
      if (parents[static_cast<std::size_t>(c)] != -1)
        throw DataError("multi-parent: node " + std::to_string(c) + " has more than one parent");
      parents[static_cast<std::size_t>(c)] = p;
    }
  }
  // Every node must be reachable from the root; an unreachable node with a
  // parent can only sit on a cycle.
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> stack{root};
  int reached = 0;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (seen[static_cast<std::size_t>(v)]) throw DataError("cycle detected");
    seen[static_cast<std::size_t>(v)] = 1;
    ++reached;
    for (int c : nodes[static_cast<std::size_t>(v)].children) stack.push_back(c);
  }
  if (reached != n) throw DataError("nodes not connected to the root (cycle or orphan)");

  Ast ast;
  ast.nodes_ = std::move(nodes);
  ast.root_ = root;
  return ast;
}

SymbolTree parse_ast_document(std::string_view text) { return tree_from_json(parse_json(text)); }

std::string format_ast_document(const SymbolTree& tree) {
  if (tree.size() == 0) throw DataError("empty tree");
  return tree_to_json(tree, 0).dump();
}

std::vector<LabeledTree> parse_dataset(std::string_view text) {
  std::vector<LabeledTree> out;
  std::istringstream lines{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json doc = parse_json(line);
      if (!doc.is_object()) throw DataError("sample must be an object");
      auto label = doc.find("label");
      auto ast = doc.find("ast");
      if (label == doc.end() || !label->is_number_integer() || label->get<long long>() < 0)
        throw DataError("sample needs a non-negative integer \"label\"");
      if (ast == doc.end()) throw DataError("sample needs an \"ast\"");
      out.push_back({tree_from_json(*ast), label->get<int>()});
    } catch (const DataError& e) {
      throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError("dataset has no samples");
  return out;
}

std::string format_dataset(std::span<const LabeledTree> samples) {
  std::string out;
  for (const auto& s : samples) {
    ordered_json line;
    line["label"] = s.label;
    line["ast"] = tree_to_json(s.tree, 0);
    out += line.dump();
    out += '\n';
  }
  return out;
}

SymbolVocab build_vocab(std::span<const SymbolTree> corpus) {
  if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  SymbolVocab vocab;
  for (const auto& tree : corpus)
    for (const auto& s : tree.symbols)
      if (s != kUnknownSymbol) vocab.intern(s);
  return vocab;
}

SymbolVocab build_vocab(std::span<const LabeledTree> corpus) {
  if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  SymbolVocab vocab;
  for (const auto& sample : corpus)
    for (const auto& s : sample.tree.symbols)
      if (s != kUnknownSymbol) vocab.intern(s);
  return vocab;
}

Ast intern_tree(const SymbolTree& tree, SymbolVocab& vocab, UnknownSymbols policy) {
  if (tree.size() == 0) throw DataError("empty tree");
  if (tree.children.size() != tree.symbols.size()) throw DataError("symbol/children size mismatch");
  std::vector<AstNode> nodes(tree.symbols.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string& s = tree.symbols[i];
    int id = 0;
    if (auto found = vocab.find(s)) {
      id = *found;
    } else if (s == kUnknownSymbol) {
      id = vocab.unknown_id();
    } else {
      switch (policy) {
        case UnknownSymbols::Extend: id = vocab.intern(s); break;
        case UnknownSymbols::Reject: throw DataError("unknown symbol: " + s);
        case UnknownSymbols::MapToUnknown: id = vocab.unknown_id(); break;
      }
    }
    nodes[i].symbol = id;
    nodes[i].children = tree.children[i];
  }
  // Ids may have shifted <UNK> if the vocabulary grew while interning.
  if (policy == UnknownSymbols::Extend) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (tree.symbols[i] == kUnknownSymbol) nodes[i].symbol = vocab.unknown_id();
  }
  return Ast::create(std::move(nodes), 0);
}

SymbolTree to_symbol_tree(const Ast& ast, const SymbolVocab& vocab) {
  // Re-index in pre-order so the root lands at 0.
  SymbolTree out;
  std::vector<std::pair<int, int>> stack{{ast.root(), -1}};
  while (!stack.empty()) {
    auto [node, parent] = stack.back();
    stack.pop_back();
    const int index = out.size();
    out.symbols.push_back(vocab.symbol(ast.node(node).symbol));
    out.children.emplace_back();
    if (parent >= 0) out.children[static_cast<std::size_t>(parent)].push_back(index);
    const auto& kids = ast.node(node).children;
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.emplace_back(*it, index);
  }
  return out;
}

Ast load_ast(std::string_view text, SymbolVocab& vocab, UnknownSymbols policy) {
  return intern_tree(parse_ast_document(text), vocab, policy);
}

std::string save_ast(const Ast& ast, const SymbolVocab& vocab) {
  return format_ast_document(to_symbol_tree(ast, vocab));
}

AnnotatedAst annotate(Ast ast) {
  const std::size_t n = static_cast<std::size_t>(ast.size());
  AnnotatedAst out{.ast = std::move(ast), .parent = {}, .position = {}, .leaf_count = {},
                   .depth = {}, .span = {}, .h_pos = {}, .total_leaves = 0, .mean_leaf_depth = 0.0};
  const Ast& t = out.ast;
  out.parent.assign(n, -1);
  out.position.assign(n, 0);
  out.leaf_count.assign(n, 0);
  out.depth.assign(n, 0);
  out.span.assign(n, {});
  out.h_pos.assign(n, 0.0);

  // Pre-order: parents precede children, children left to right.
  std::vector<int> order;
  order.reserve(n);
  std::vector<int> stack{t.root()};
  out.depth[static_cast<std::size_t>(t.root())] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    order.push_back(v);
    const auto& kids = t.node(v).children;
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const auto c = static_cast<std::size_t>(kids[i]);
      out.parent[c] = v;
      out.position[c] = static_cast<int>(i) + 1;
      out.depth[c] = out.depth[static_cast<std::size_t>(v)] + 1;
    }
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }

  int next_leaf = 0;
  long long depth_sum = 0;
  for (int v : order) {
    if (t.is_leaf(v)) {
      out.span[static_cast<std::size_t>(v)] = {next_leaf, next_leaf + 1};
      ++next_leaf;
      depth_sum += out.depth[static_cast<std::size_t>(v)];
    }
  }
  out.total_leaves = next_leaf;
  out.mean_leaf_depth = static_cast<double>(depth_sum) / next_leaf;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto v = static_cast<std::size_t>(*it);
    const auto& kids = t.node(*it).children;
    if (kids.empty()) {
      out.leaf_count[v] = 1;
    } else {
      int total = 0;
      for (int c : kids) total += out.leaf_count[static_cast<std::size_t>(c)];
      out.leaf_count[v] = total;
      out.span[v] = {out.span[static_cast<std::size_t>(kids.front())].lo,
                     out.span[static_cast<std::size_t>(kids.back())].hi};
    }
    out.h_pos[v] = 0.5 * (out.span[v].lo + out.span[v].hi) / out.total_leaves;
  }
  return out;
}

std::vector<double> child_coefficients(const AnnotatedAst& tree, int node) {
  if (node < 0 || node >= tree.size()) throw UsageError("node index out of range");
  const auto& kids = tree.ast.node(node).children;
  if (kids.empty()) throw UsageError("child_coefficients called on a leaf");
  const double total = tree.leaf_count[static_cast<std::size_t>(node)];
  std::vector<double> l;
  l.reserve(kids.size());
  for (int c : kids) l.push_back(tree.leaf_count[static_cast<std::size_t>(c)] / total);
  return l;
}

}  // namespace tbcnn
