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

#include "tbcnn/datagen.hpp"

#include <algorithm>
#include <array>

#include "tbcnn/error.hpp"
#include "tbcnn/numerics.hpp"

namespace tbcnn {

namespace {

struct Node {
  std::string symbol;
  std::vector<Node> children;

  int size() const {
    int n = 1;
    for (const auto& c : children) n += c.size();
    return n;
  }
};

Node leaf(const char* s) { return {s, {}}; }
Node node(const char* s, std::vector<Node> kids) { return {s, std::move(kids)}; }

constexpr int kMinMotifSize = 7;

// Small expressions used inside motifs; sizes 1..3.
std::vector<Node> expression_templates() {
  return {leaf("ID"),
          leaf("Constant"),
          node("UnaryOp", {leaf("ID")}),
          node("BinaryOp", {leaf("ID"), leaf("Constant")}),
          node("BinaryOp", {leaf("ID"), leaf("ID")}),
          node("ArrayRef", {leaf("ID"), leaf("Constant")}),
          node("Assignment", {leaf("ID"), leaf("Constant")})};
}

// Filler statements; sizes 1..5. EmptyStatement always fits.
std::vector<Node> statement_templates() {
  return {leaf("EmptyStatement"),
          node("Decl", {node("TypeDecl", {leaf("IdentifierType")})}),
          node("Decl", {node("TypeDecl", {leaf("IdentifierType")}), leaf("Constant")}),
          node("Assignment", {leaf("ID"), node("BinaryOp", {leaf("ID"), leaf("Constant")})}),
          node("FuncCall", {leaf("ID"), node("ExprList", {leaf("ID")})}),
          node("Return", {leaf("ID")}),
          node("UnaryOp", {leaf("ID")}),
          node("Assignment", {leaf("ID"), node("ArrayRef", {leaf("ID"), leaf("Constant")})}),
          // Control-flow distractors: the motif kinds also occur outside the
          // motif, alone or nested in shapes no class uses.
          node("If", {node("BinaryOp", {leaf("ID"), leaf("Constant")}), leaf("EmptyStatement")}),
          node("While", {leaf("ID"), node("UnaryOp", {leaf("ID")})}),
          node("For", {leaf("ID"), leaf("Constant"), leaf("ID")}),
          node("For", {node("If", {leaf("ID")}), leaf("ID")}),
          node("If", {leaf("ID"), node("While", {leaf("ID")})}),
          node("While", {node("For", {leaf("ID")}), leaf("Constant")})};
}

// The parts of a motif shared across a count-matched group.
struct MotifFill {
  std::array<Node, 4> expr;  // inner's two children, the third kind's child, outer's own child
  int size() const {
    int n = 3;
    for (const auto& e : expr) n += e.size();
    return n;
  }
};

// A tree skeleton: statements and motif slots (marked by index into motifs).
struct Skeleton {
  std::vector<Node> statements;
  std::vector<MotifFill> motifs;
  std::vector<int> slot;  // per root child: -1 for a statement, else motif index
};

const char* third_kind(const std::string& a, const std::string& b) {
  for (const char* k : {"For", "If", "While"})
    if (a != k && b != k) return k;
  return "While";
}

Node build_motif(const MotifFill& fill, const MotifVariant& v) {
  Node inner{v.inner, {fill.expr[0], fill.expr[1]}};
  Node middle{third_kind(v.outer, v.inner), {fill.expr[2]}};
  Node outer{v.outer, {}};
  if (v.inner_first) {
    outer.children = {std::move(inner), std::move(middle), fill.expr[3]};
  } else {
    outer.children = {fill.expr[3], std::move(middle), std::move(inner)};
  }
  return outer;
}

Node build_tree(const Skeleton& sk, const MotifVariant& v) {
  Node root{"Compound", {}};
  std::size_t next_statement = 0;
  for (int s : sk.slot) {
    if (s < 0) {
      root.children.push_back(sk.statements[next_statement++]);
    } else {
      root.children.push_back(build_motif(sk.motifs[static_cast<std::size_t>(s)], v));
    }
  }
  return root;
}

void flatten(const Node& n, SymbolTree& out) {
  const int self = out.size();
  out.symbols.push_back(n.symbol);
  out.children.emplace_back();
  for (const auto& c : n.children) {
    out.children[static_cast<std::size_t>(self)].push_back(out.size());
    flatten(c, out);
  }
}

SymbolTree to_tree(const Node& n) {
  SymbolTree t;
  flatten(n, t);
  return t;
}

template <typename T>
const T& pick(const std::vector<T>& items, SeededRng& rng) {
  return items[static_cast<std::size_t>(rng.below(items.size()))];
}

// `bias` >= 0 marks a statement template drawn three times as often.
Skeleton make_skeleton(const GenConfig& c, SeededRng& rng, int bias) {
  static const std::vector<Node> exprs = expression_templates();
  static const std::vector<Node> stmts = statement_templates();

  const int target = c.min_size + static_cast<int>(rng.below(static_cast<std::uint64_t>(c.max_size - c.min_size + 1)));
  Skeleton sk;
  int budget = target - 1;  // the Compound root

  const int wanted = 1 + static_cast<int>(rng.below(2));
  for (int m = 0; m < wanted; ++m) {
    MotifFill fill;
    for (auto& e : fill.expr) e = pick(exprs, rng);
    // Shrink expressions to bare identifiers until the motif fits.
    for (std::size_t i = 0; i < fill.expr.size() && fill.size() > budget; ++i) fill.expr[i] = leaf("ID");
    if (fill.size() > budget) break;
    budget -= fill.size();
    sk.motifs.push_back(std::move(fill));
  }

  while (budget > 0) {
    std::vector<const Node*> fits;
    for (std::size_t i = 0; i < stmts.size(); ++i) {
      if (stmts[i].size() > budget) continue;
      fits.push_back(&stmts[i]);
      if (static_cast<int>(i) == bias) {
        fits.push_back(&stmts[i]);
        fits.push_back(&stmts[i]);
      }
    }
    const Node& s = *fits[static_cast<std::size_t>(rng.below(fits.size()))];
    budget -= s.size();
    sk.statements.push_back(s);
  }

  sk.slot.assign(sk.statements.size(), -1);
  for (int m = 0; m < static_cast<int>(sk.motifs.size()); ++m) {
    const auto at = static_cast<std::ptrdiff_t>(rng.below(sk.slot.size() + 1));
    sk.slot.insert(sk.slot.begin() + at, m);
  }
  return sk;
}

}  // namespace

MotifVariant motif_variant(int label) {
  static const std::array<std::pair<const char*, const char*>, 6> pairs{{
      {"For", "If"}, {"If", "For"}, {"For", "While"}, {"While", "For"}, {"If", "While"}, {"While", "If"}}};
  if (label < 0 || label >= kMaxGenClasses) throw UsageError("no motif for label " + std::to_string(label));
  const auto& p = pairs[static_cast<std::size_t>(label / 2)];
  return {p.first, p.second, label % 2 == 0};
}

const std::vector<std::string>& generator_alphabet() {
  static const std::vector<std::string> alphabet{
      "Compound", "For",      "If",         "While",    "ID",     "Constant",
      "UnaryOp",  "BinaryOp", "ArrayRef",   "Assignment", "EmptyStatement", "Decl",
      "TypeDecl", "IdentifierType", "FuncCall", "ExprList", "Return"};
  return alphabet;
}

GeneratedCorpus generate_corpus(const GenConfig& c) {
  if (c.n_classes < 2 || c.n_classes > kMaxGenClasses)
    throw UsageError("n_classes must be in [2, " + std::to_string(kMaxGenClasses) + "]");
  if (c.per_class < 1) throw UsageError("per_class must be positive");
  if (c.min_size > c.max_size) throw UsageError("min_size exceeds max_size");
  if (c.min_size < 1 + kMinMotifSize)
    throw UsageError("min_size must be at least " + std::to_string(1 + kMinMotifSize) + " to hold a motif");

  if (!(c.ambiguity >= 0.0 && c.ambiguity <= 1.0)) throw UsageError("ambiguity must be in [0, 1]");

  SeededRng rng(c.seed);
  SeededRng drift = SeededRng::for_worker(c.seed, 1);
  // Atypical samples carry a uniformly drawn class's motif. Every variant has
  // the same control-kind multiset, so count matching is unaffected.
  const auto variant_for = [&](int label) {
    if (c.ambiguity > 0.0 && drift.uniform() < c.ambiguity)
      return motif_variant(static_cast<int>(drift.below(static_cast<std::uint64_t>(c.n_classes))));
    return motif_variant(label);
  };
  GeneratedCorpus out;
  const int n_stmt_templates = static_cast<int>(statement_templates().size());
  for (int g = 0; g < c.per_class; ++g) {
    if (c.count_matched) {
      const Skeleton sk = make_skeleton(c, rng, -1);
      for (int label = 0; label < c.n_classes; ++label) {
        out.samples.push_back({to_tree(build_tree(sk, variant_for(label))), label});
        out.group.push_back(g);
      }
    } else {
      for (int label = 0; label < c.n_classes; ++label) {
        // Statement 0 (EmptyStatement) is the size filler; bias the others.
        const int bias = 1 + label % (n_stmt_templates - 1);
        const Skeleton sk = make_skeleton(c, rng, bias);
        out.samples.push_back({to_tree(build_tree(sk, variant_for(label))), label});
        out.group.push_back(static_cast<int>(out.group.size()));
      }
    }
  }
  return out;
}

}  // namespace tbcnn
