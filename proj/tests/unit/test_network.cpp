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

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"
#include "tbcnn/baselines.hpp"
#include "tbcnn/error.hpp"
#include "tbcnn/network.hpp"

using namespace tbcnn;

namespace {

ModelShape small_shape(int vocab_rows, int dims, int classes, int bow_dim = 0) {
  ModelShape s;
  s.vocab_rows = vocab_rows;
  s.nf = s.nc = s.nh = dims;
  s.n_classes = classes;
  s.bow_dim = bow_dim;
  return s;
}

TbcnnParams random_params(const ModelShape& shape, SeededRng& rng, double scale = 0.5) {
  TbcnnParams p = TbcnnParams::zeros(shape);
  for (auto& t : p.tensors()) fill_uniform(t.data, scale, rng);
  return p;
}

// Dense restatement of one convolution output: materializes the effective
// weight matrix of every window member and sums the products.
Vector dense_window(const AnnotatedAst& tree, std::span<const Vector> x, const TbcnnParams& p, int node) {
  const int nc = p.shape.nc, nf = p.shape.nf;
  Vector out = p.conv_bias;
  const auto add = [&](int member, double et, double el, double er) {
    Matrix w(static_cast<std::size_t>(nc), static_cast<std::size_t>(nf));
    for (int r = 0; r < nc; ++r)
      for (int c = 0; c < nf; ++c)
        w(r, c) = et * p.conv_top(r, c) + el * p.conv_left(r, c) + er * p.conv_right(r, c);
    const Vector y = matvec(w, x[static_cast<std::size_t>(member)]);
    for (int r = 0; r < nc; ++r) out[static_cast<std::size_t>(r)] += y[static_cast<std::size_t>(r)];
  };
  add(node, 1.0, 0.0, 0.0);
  const auto& kids = tree.ast.node(node).children;
  const int n = static_cast<int>(kids.size());
  for (int i = 0; i < n; ++i) {
    const double er = n == 1 ? 0.5 : double(i) / double(n - 1);
    add(kids[static_cast<std::size_t>(i)], 0.0, 1.0 - er, er);
  }
  for (double& v : out) v = std::tanh(v);
  return out;
}

double loss_of(const AnnotatedAst& tree, const TbcnnParams& p, int label, const BowVector* bow) {
  return cross_entropy(forward(tree, p, bow), label);
}

}  // namespace

TEST_CASE("convolution coefficients") {
  const auto top = conv_coefficients(WindowLevel::Top);
  CHECK(top.top == 1.0);
  CHECK(top.left == 0.0);
  CHECK(top.right == 0.0);
  const double expect[3][3] = {{0, 1, 0}, {0, 0.5, 0.5}, {0, 0, 1}};
  for (int p = 1; p <= 3; ++p) {
    const auto e = conv_coefficients(WindowLevel::Bottom, p, 3);
    CHECK(e.top == expect[p - 1][0]);
    CHECK(e.left == expect[p - 1][1]);
    CHECK(e.right == expect[p - 1][2]);
  }
  const auto only = conv_coefficients(WindowLevel::Bottom, 1, 1);
  CHECK(only.left == 0.5);
  CHECK(only.right == 0.5);
  for (int n = 1; n <= 20; ++n)
    for (int p = 1; p <= n; ++p) {
      const auto e = conv_coefficients(WindowLevel::Bottom, p, n);
      CHECK(e.top + e.left + e.right == 1.0);
    }
  CHECK_THROWS_AS(conv_coefficients(WindowLevel::Bottom, 4, 3), UsageError);
  CHECK_THROWS_AS(conv_coefficients(WindowLevel::Bottom, 0, 3), UsageError);
  const std::string table = describe_eta_conventions(3);
  CHECK(table.find("implemented") != std::string::npos);
  CHECK(table.find("literal") != std::string::npos);
}

TEST_CASE("combined node vectors") {
  SymbolVocab vocab;
  const auto decl = testing::decl_tree(vocab);
  SeededRng rng(21);
  TbcnnParams p = random_params(small_shape(vocab.table_rows(), 4, 3), rng);
  for (int i = 0; i < decl.size(); ++i)
    if (decl.ast.is_leaf(i)) {
      const auto x = combined_node_vectors(decl, p)[static_cast<std::size_t>(i)];
      const auto e = p.emb[decl.ast.node(i).symbol];
      CHECK(x == Vector(e.begin(), e.end()));
    }

  SUBCASE("self term only") {
    p.comb_self = Matrix::identity(4);
    p.comb_coded = Matrix(4, 4);
    const auto xs = combined_node_vectors(decl, p);
    for (int i = 0; i < decl.size(); ++i) {
      const auto e = p.emb[decl.ast.node(i).symbol];
      CHECK(xs[static_cast<std::size_t>(i)] == Vector(e.begin(), e.end()));
    }
  }
  SUBCASE("coded term only") {
    p.comb_self = Matrix(4, 4);
    p.comb_coded = Matrix::identity(4);
    const auto xs = combined_node_vectors(decl, p);
    for (int i = 0; i < decl.size(); ++i) {
      if (decl.ast.is_leaf(i)) continue;
      for (double v : xs[static_cast<std::size_t>(i)]) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
      }
      // coded term uses the children's embeddings
      PretrainSample s{decl.ast.node(i).symbol, {}, child_coefficients(decl, i)};
      for (int c : decl.ast.node(i).children) s.children.push_back(decl.ast.node(c).symbol);
      CHECK(xs[static_cast<std::size_t>(i)] == code_children(s, p.emb, p.coding));
    }
  }
}

TEST_CASE("tree convolution") {
  SUBCASE("zero leaf stays zero") {
    SymbolVocab vocab;
    const auto t = testing::annotated(R"({"symbol":"A","children":[]})", vocab);
    TbcnnParams p = TbcnnParams::zeros(small_shape(vocab.table_rows(), 3, 2));
    const auto y = tree_convolve(combined_node_vectors(t, p), t, p);
    CHECK(y[0] == Vector(3, 0.0));
  }
  SUBCASE("single node through the top kernel") {
    SymbolVocab vocab;
    const auto t = testing::annotated(R"({"symbol":"A","children":[]})", vocab);
    TbcnnParams p = TbcnnParams::zeros(small_shape(vocab.table_rows(), 3, 2));
    p.conv_top = Matrix::identity(3);
    const Vector v{1e-4, 2e-4, -3e-4};
    std::copy(v.begin(), v.end(), p.emb[0].begin());
    const auto y = tree_convolve(combined_node_vectors(t, p), t, p);
    for (int i = 0; i < 3; ++i) CHECK(y[0][static_cast<std::size_t>(i)] == doctest::Approx(v[i]).epsilon(1e-7));
  }
  SUBCASE("dense window oracle") {
    SeededRng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
      const auto t = testing::random_annotated(rng, 1, 20);
      ModelShape shape = small_shape(7, 5, 3);
      shape.nc = 4;
      const TbcnnParams p = random_params(shape, rng);
      const auto x = combined_node_vectors(t, p);
      const auto y = tree_convolve(x, t, p);
      REQUIRE(static_cast<int>(y.size()) == t.size());
      for (int node = 0; node < t.size(); ++node) {
        const Vector ref = dense_window(t, x, p, node);
        for (std::size_t r = 0; r < ref.size(); ++r)
          REQUIRE(y[static_cast<std::size_t>(node)][r] == doctest::Approx(ref[r]).epsilon(1e-12));
      }
    }
  }
  SUBCASE("three-node tree by hand") {
    SymbolVocab vocab;
    const auto t = testing::annotated(
        R"({"symbol":"P","children":[{"symbol":"L","children":[]},{"symbol":"R","children":[]}]})", vocab);
    TbcnnParams p = TbcnnParams::zeros(small_shape(vocab.table_rows(), 1, 2));
    p.emb[0][0] = 0.1, p.emb[1][0] = 0.2, p.emb[2][0] = 0.3;
    p.comb_self = Matrix::identity(1);
    p.conv_top(0, 0) = 1.0, p.conv_left(0, 0) = 2.0, p.conv_right(0, 0) = 3.0;
    p.conv_bias = {0.05};
    const auto y = tree_convolve(combined_node_vectors(t, p), t, p);
    // root: 1*0.1 + 2*0.2 (left child, eta_l = 1) + 3*0.3 (right child, eta_r = 1) + 0.05
    CHECK(y[0][0] == doctest::Approx(std::tanh(0.1 + 0.4 + 0.9 + 0.05)).epsilon(1e-14));
    CHECK(y[1][0] == doctest::Approx(std::tanh(0.2 + 0.05)).epsilon(1e-14));
  }
}

TEST_CASE("pooling regions") {
  SUBCASE("single node") {
    SymbolVocab vocab;
    const auto t = testing::annotated(R"({"symbol":"A","children":[]})", vocab);
    CHECK(assign_pool_regions(t) == std::vector<PoolRegion>{PoolRegion::LowerLeft});
  }
  SUBCASE("declaration tree") {
    SymbolVocab vocab;
    const auto t = testing::decl_tree(vocab);
    // Decl, TypeDecl, IdentifierType, BinaryOp, ID (h_pos exactly 0.5), Constant
    CHECK(assign_pool_regions(t) ==
          std::vector<PoolRegion>{PoolRegion::Top, PoolRegion::LowerLeft, PoolRegion::LowerLeft,
                                  PoolRegion::LowerRight, PoolRegion::LowerLeft, PoolRegion::LowerRight});
  }
  SUBCASE("perfect binary tree of depth 4") {
    std::vector<AstNode> nodes(15);
    for (int i = 0; i < 7; ++i) nodes[static_cast<std::size_t>(i)].children = {2 * i + 1, 2 * i + 2};
    const auto t = annotate(Ast::create(nodes, 0));
    const auto regions = assign_pool_regions(t);
    for (int i = 0; i < 15; ++i) {
      const int depth = t.depth[static_cast<std::size_t>(i)];
      if (depth <= 2) CHECK(regions[static_cast<std::size_t>(i)] == PoolRegion::Top);
      else CHECK(regions[static_cast<std::size_t>(i)] != PoolRegion::Top);
    }
    for (int leaf = 7; leaf < 11; ++leaf) CHECK(regions[static_cast<std::size_t>(leaf)] == PoolRegion::LowerLeft);
    for (int leaf = 11; leaf < 15; ++leaf) CHECK(regions[static_cast<std::size_t>(leaf)] == PoolRegion::LowerRight);
  }
  SUBCASE("random trees against the rule") {
    SeededRng rng(12);
    for (int trial = 0; trial < 300; ++trial) {
      const auto t = testing::random_annotated(rng, 1, 30);
      const double k = trial % 3 == 0 ? 0.6 : rng.uniform(0.0, 1.5);
      const auto regions = assign_pool_regions(t, k);
      REQUIRE(static_cast<int>(regions.size()) == t.size());
      for (int i = 0; i < t.size(); ++i) CHECK(regions[static_cast<std::size_t>(i)] == oracle::region(t, i, k));
    }
  }
}

TEST_CASE("max pooling") {
  SUBCASE("one node per region") {
    const std::vector<Vector> conv{{0.1, -0.2}, {0.3, 0.4}, {-0.5, 0.6}};
    const std::vector<PoolRegion> regions{PoolRegion::Top, PoolRegion::LowerLeft, PoolRegion::LowerRight};
    const auto pooled = pool_max(conv, regions, 2);
    for (int r = 0; r < 3; ++r) {
      CHECK(pooled.values[static_cast<std::size_t>(r)] == conv[static_cast<std::size_t>(r)]);
      CHECK(pooled.argmax[static_cast<std::size_t>(r)] == std::vector<int>{r, r});
    }
    CHECK(pooled.concat() == Vector{0.1, -0.2, 0.3, 0.4, -0.5, 0.6});
  }
  SUBCASE("empty region pools to zero") {
    const std::vector<Vector> conv{{-0.1, -0.2}, {-0.3, -0.4}};
    const std::vector<PoolRegion> regions{PoolRegion::Top, PoolRegion::LowerLeft};
    const auto pooled = pool_max(conv, regions, 2);
    CHECK(pooled.values[2] == Vector{0.0, 0.0});
    CHECK(pooled.argmax[2] == std::vector<int>{kNoArgmax, kNoArgmax});
  }
  SUBCASE("ties go to the smallest node") {
    const std::vector<Vector> conv{{0.2}, {0.7}, {0.7}};
    const std::vector<PoolRegion> regions(3, PoolRegion::LowerRight);
    CHECK(pool_max(conv, regions, 1).argmax[2] == std::vector<int>{1});
  }
  SUBCASE("exhaustive scan") {
    SeededRng rng(13);
    for (int trial = 0; trial < 300; ++trial) {
      const int n = 1 + static_cast<int>(rng.below(15)), nc = 3;
      std::vector<Vector> conv(static_cast<std::size_t>(n), Vector(nc));
      std::vector<PoolRegion> regions(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        for (double& v : conv[static_cast<std::size_t>(i)]) v = std::round(rng.uniform(-4, 4)) / 4.0;  // ties
        regions[static_cast<std::size_t>(i)] = static_cast<PoolRegion>(rng.below(3));
      }
      const auto pooled = pool_max(conv, regions, nc);
      const auto want = oracle::exhaustive_max(conv, regions, nc);
      for (std::size_t r = 0; r < 3; ++r) {
        CHECK(pooled.values[r] == want.values[r]);
        CHECK(pooled.argmax[r] == want.argmax[r]);
      }
    }
  }
}

TEST_CASE("forward pass") {
  SymbolVocab vocab;
  const auto decl = testing::decl_tree(vocab);
  SUBCASE("zero parameters give uniform output") {
    const TbcnnParams p = TbcnnParams::zeros(small_shape(vocab.table_rows(), 30, 4));
    const auto trace = forward(decl, p);
    CHECK(trace.probabilities == Vector(4, 0.25));
    CHECK(cross_entropy(trace, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  }
  SUBCASE("probabilities sum to one") {
    SeededRng rng(14);
    for (int trial = 0; trial < 100; ++trial) {
      const auto t = testing::random_annotated(rng, 1, 25);
      const TbcnnParams p = random_params(small_shape(7, 6, 5), rng, 1.0);
      const auto probs = predict(t, p);
      double sum = 0;
      for (double v : probs) sum += v;
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
  SUBCASE("deterministic") {
    SeededRng rng(15);
    const TbcnnParams p = random_params(small_shape(vocab.table_rows(), 4, 3), rng);
    CHECK(predict(decl, p) == predict(decl, p));
  }
  SUBCASE("argmax nodes belong to their region") {
    SeededRng rng(16);
    for (int trial = 0; trial < 50; ++trial) {
      const auto t = testing::random_annotated(rng, 1, 25);
      const TbcnnParams p = random_params(small_shape(7, 4, 3), rng);
      const auto trace = forward(t, p);
      for (int r = 0; r < 3; ++r)
        for (int a : trace.pooled.argmax[static_cast<std::size_t>(r)])
          if (a != kNoArgmax) CHECK(static_cast<int>(trace.regions[static_cast<std::size_t>(a)]) == r);
    }
  }
  SUBCASE("bag-of-words input") {
    SeededRng rng(17);
    const int dim = vocab.table_rows();
    const TbcnnParams p = random_params(small_shape(dim, 4, 3, dim), rng);
    const BowVector bow = bow_features(decl.ast, dim);
    const auto trace = forward(decl, p, &bow);
    CHECK(trace.hidden_input.size() == static_cast<std::size_t>(3 * 4 + dim));
    CHECK_THROWS_AS(forward(decl, p), UsageError);
    const TbcnnParams plain = random_params(small_shape(dim, 4, 3), rng);
    CHECK_THROWS_AS(forward(decl, plain, &bow), UsageError);
  }
  SUBCASE("symbol out of range") {
    const TbcnnParams p = TbcnnParams::zeros(small_shape(3, 4, 2));
    CHECK_THROWS_AS(forward(decl, p), UsageError);
  }
}

TEST_CASE("child order matters") {
  SymbolVocab vocab;
  const auto a = testing::annotated(
      R"({"symbol":"P","children":[{"symbol":"A","children":[{"symbol":"x","children":[]}]},{"symbol":"B","children":[]}]})",
      vocab);
  const auto b = testing::annotated(
      R"({"symbol":"P","children":[{"symbol":"B","children":[]},{"symbol":"A","children":[{"symbol":"x","children":[]}]}]})",
      vocab);
  SeededRng rng(18);
  const TbcnnParams p = random_params(small_shape(vocab.table_rows(), 4, 3), rng);
  CHECK(bow_features(a.ast, vocab.table_rows()).counts == bow_features(b.ast, vocab.table_rows()).counts);
  CHECK(predict(a, p) != predict(b, p));
}

TEST_CASE("backward matches central differences") {
  const double h = 1e-5;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (bool with_bow : {false, true}) {
      SeededRng rng(100 + seed);
      const auto t = annotate(random_tree(12, 5, rng));
      const int rows = 6;
      TbcnnParams p = random_params(small_shape(rows, 4, 3, with_bow ? rows : 0), rng);
      std::optional<BowVector> bow;
      if (with_bow) bow = bow_features(t.ast, rows);
      const BowVector* bp = bow ? &*bow : nullptr;
      const int label = static_cast<int>(seed % 3);
      const auto trace = forward(t, p, bp);
      const TbcnnParams g = backward(t, trace, label, p);
      auto params = p.tensors();
      const auto grads = g.tensors();
      for (std::size_t k = 0; k < params.size(); ++k) {
        for (std::size_t i = 0; i < params[k].data.size(); ++i) {
          double& w = params[k].data[i];
          const double saved = w;
          w = saved + h;
          const double up = loss_of(t, p, label, bp);
          w = saved - h;
          const double down = loss_of(t, p, label, bp);
          w = saved;
          const double numeric = (up - down) / (2 * h);
          const double a = grads[k].data[i];
          CAPTURE(params[k].name);
          CAPTURE(i);
          REQUIRE(std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}) < 1e-4);
        }
      }
    }
  }
}

TEST_CASE("backward bookkeeping") {
  SymbolVocab vocab;
  const auto decl = testing::decl_tree(vocab);
  SeededRng rng(19);
  const TbcnnParams p = random_params(small_shape(vocab.table_rows(), 4, 3), rng);
  const auto trace = forward(decl, p);
  CHECK(backward(decl, trace, 1, p) == backward(decl, trace, 1, p));

  TbcnnParams acc = TbcnnParams::zeros(p.shape);
  backward(decl, trace, 1, p, acc);
  backward(decl, trace, 1, p, acc);
  const TbcnnParams once = backward(decl, trace, 1, p);
  CHECK(acc.output_bias[0] == doctest::Approx(2 * once.output_bias[0]));

  const auto other = testing::random_annotated(rng, 8, 8);
  CHECK_THROWS_AS(backward(other, trace, 1, p), UsageError);
  CHECK_THROWS_AS(backward(decl, trace, 3, p), UsageError);

  // symbols absent from the tree get no embedding gradient
  const TbcnnParams g = backward(decl, trace, 0, p);
  for (double v : g.emb[vocab.unknown_id()]) CHECK(v == 0.0);
}
