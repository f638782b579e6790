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

#include "tbcnn/network.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "tbcnn/error.hpp"

namespace tbcnn {

namespace {

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

bool same_shape(const Matrix& m, int rows, int cols) {
  return m.rows() == idx(rows) && m.cols() == idx(cols);
}

void check_symbols(const AnnotatedAst& tree, const TbcnnParams& params) {
  for (const auto& node : tree.ast.nodes())
    if (node.symbol >= params.shape.vocab_rows)
      throw UsageError("symbol id " + std::to_string(node.symbol) + " outside the embedding table");
}

// tanh(b_code + sum_i l_i (c_l W_left + c_r W_right) vec(c_i)) for internal node v.
Vector coded_vector(const AnnotatedAst& tree, int v, const TbcnnParams& params) {
  const auto& kids = tree.ast.node(v).children;
  const int n = static_cast<int>(kids.size());
  const double total = tree.leaf_count[idx(v)];
  Vector z = params.coding.bias;
  for (int i = 0; i < n; ++i) {
    const int c = kids[idx(i)];
    const double l = tree.leaf_count[idx(c)] / total;
    const auto [cl, cr] = coding_coefficients(i + 1, n);
    const auto x = params.emb[tree.ast.node(c).symbol];
    matvec_acc(params.coding.left, x, l * cl, z);
    matvec_acc(params.coding.right, x, l * cr, z);
  }
  for (double& e : z) e = std::tanh(e);
  return z;
}

void combine(const AnnotatedAst& tree, const TbcnnParams& params, std::vector<Vector>& coded,
             std::vector<Vector>& combined) {
  const int n = tree.size();
  coded.assign(idx(n), {});
  combined.assign(idx(n), {});
  for (int v = 0; v < n; ++v) {
    const auto self = params.emb[tree.ast.node(v).symbol];
    if (tree.ast.is_leaf(v)) {
      combined[idx(v)].assign(self.begin(), self.end());
      continue;
    }
    coded[idx(v)] = coded_vector(tree, v, params);
    Vector x = matvec(params.comb_self, self);
    matvec_acc(params.comb_coded, coded[idx(v)], 1.0, x);
    combined[idx(v)] = std::move(x);
  }
}

}  // namespace

TbcnnParams TbcnnParams::zeros(const ModelShape& s) {
  if (s.vocab_rows < 1 || s.nf < 1 || s.nc < 1 || s.nh < 1 || s.n_classes < 2 || s.bow_dim < 0)
    throw UsageError("invalid model shape");
  TbcnnParams p;
  p.shape = s;
  p.emb.vectors = Matrix(idx(s.vocab_rows), idx(s.nf));
  p.coding = CodingParams::zeros(s.nf);
  p.comb_self = Matrix(idx(s.nf), idx(s.nf));
  p.comb_coded = Matrix(idx(s.nf), idx(s.nf));
  p.conv_top = Matrix(idx(s.nc), idx(s.nf));
  p.conv_left = Matrix(idx(s.nc), idx(s.nf));
  p.conv_right = Matrix(idx(s.nc), idx(s.nf));
  p.conv_bias.assign(idx(s.nc), 0.0);
  p.hidden = Matrix(idx(s.nh), idx(s.hidden_input_dim()));
  p.hidden_bias.assign(idx(s.nh), 0.0);
  p.output = Matrix(idx(s.n_classes), idx(s.nh));
  p.output_bias.assign(idx(s.n_classes), 0.0);
  return p;
}

void TbcnnParams::validate() const {
  const ModelShape& s = shape;
  const bool ok = same_shape(emb.vectors, s.vocab_rows, s.nf) && same_shape(coding.left, s.nf, s.nf) &&
                  same_shape(coding.right, s.nf, s.nf) && coding.bias.size() == idx(s.nf) &&
                  same_shape(comb_self, s.nf, s.nf) && same_shape(comb_coded, s.nf, s.nf) &&
                  same_shape(conv_top, s.nc, s.nf) && same_shape(conv_left, s.nc, s.nf) &&
                  same_shape(conv_right, s.nc, s.nf) && conv_bias.size() == idx(s.nc) &&
                  same_shape(hidden, s.nh, s.hidden_input_dim()) && hidden_bias.size() == idx(s.nh) &&
                  same_shape(output, s.n_classes, s.nh) && output_bias.size() == idx(s.n_classes);
  if (!ok) throw UsageError("parameter tensors do not match the model shape");
}

std::vector<TensorRef> TbcnnParams::tensors() {
  return {{"embeddings", emb.vectors.data(), false},
          {"code_left", coding.left.data(), true},
          {"code_right", coding.right.data(), true},
          {"code_bias", coding.bias, false},
          {"comb_self", comb_self.data(), true},
          {"comb_coded", comb_coded.data(), true},
          {"conv_top", conv_top.data(), true},
          {"conv_left", conv_left.data(), true},
          {"conv_right", conv_right.data(), true},
          {"conv_bias", conv_bias, false},
          {"hidden_weight", hidden.data(), true},
          {"hidden_bias", hidden_bias, false},
          {"output_weight", output.data(), true},
          {"output_bias", output_bias, false}};
}

std::vector<ConstTensorRef> TbcnnParams::tensors() const {
  auto mutable_refs = const_cast<TbcnnParams*>(this)->tensors();
  std::vector<ConstTensorRef> out;
  out.reserve(mutable_refs.size());
  for (const auto& t : mutable_refs) out.push_back({t.name, t.data, t.l2});
  return out;
}

const char* to_string(PoolRegion region) {
  switch (region) {
    case PoolRegion::Top: return "TOP";
    case PoolRegion::LowerLeft: return "LOWER_LEFT";
    case PoolRegion::LowerRight: return "LOWER_RIGHT";
  }
  return "?";
}

EtaCoefficients conv_coefficients(WindowLevel level, int position, int siblings) {
  if (level == WindowLevel::Top) return {1.0, 0.0, 0.0};
  if (siblings < 1 || position < 1 || position > siblings)
    throw UsageError("conv_coefficients: need 1 <= position <= siblings");
  const double right =
      siblings == 1 ? 0.5 : static_cast<double>(position - 1) / static_cast<double>(siblings - 1);
  return {0.0, 1.0 - right, right};
}

std::string describe_eta_conventions(int siblings) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "window depth 2, top node with " << siblings << " children\n";
  out << "node        implemented (t, l, r)     literal top-down (t, l, r)\n";
  // Literal reading: in-window depth counted from the top, so the top node
  // has d_i = 1 -> eta_t = 0 and its position among siblings is undefined.
  out << "top         (1.000, 0.000, 0.000)     (0.000, undefined, undefined)\n";
  for (int p = 1; p <= siblings; ++p) {
    const auto e = conv_coefficients(WindowLevel::Bottom, p, siblings);
    out << "child " << p << "/" << siblings << "   (" << e.top << ", " << e.left << ", " << e.right
        << ")     (1.000, 0.000, 0.000)\n";
  }
  return out.str();
}

std::vector<Vector> combined_node_vectors(const AnnotatedAst& tree, const TbcnnParams& params) {
  params.validate();
  check_symbols(tree, params);
  std::vector<Vector> coded, combined;
  combine(tree, params, coded, combined);
  return combined;
}

std::vector<Vector> tree_convolve(std::span<const Vector> x, const AnnotatedAst& tree,
                                  const TbcnnParams& params) {
  const int n = tree.size();
  const auto nf = idx(params.shape.nf);
  if (x.size() != idx(n)) throw UsageError("tree_convolve: one vector per node required");
  for (const auto& v : x)
    if (v.size() != nf) throw UsageError("tree_convolve: node vector dimension mismatch");

  // Each node is the top of its own window and a bottom node of its parent's,
  // so project every node once through each of the three kernels.
  std::vector<Vector> as_top(idx(n)), as_left(idx(n)), as_right(idx(n));
  for (int v = 0; v < n; ++v) {
    as_top[idx(v)] = matvec(params.conv_top, x[idx(v)]);
    if (v != tree.ast.root()) {
      as_left[idx(v)] = matvec(params.conv_left, x[idx(v)]);
      as_right[idx(v)] = matvec(params.conv_right, x[idx(v)]);
    }
  }

  std::vector<Vector> y(idx(n));
  for (int v = 0; v < n; ++v) {
    Vector pre = params.conv_bias;
    axpy(1.0, as_top[idx(v)], pre);
    const auto& kids = tree.ast.node(v).children;
    const int count = static_cast<int>(kids.size());
    for (int i = 0; i < count; ++i) {
      const auto eta = conv_coefficients(WindowLevel::Bottom, i + 1, count);
      axpy(eta.left, as_left[idx(kids[idx(i)])], pre);
      axpy(eta.right, as_right[idx(kids[idx(i)])], pre);
    }
    for (double& e : pre) e = std::tanh(e);
    y[idx(v)] = std::move(pre);
  }
  return y;
}

std::vector<PoolRegion> assign_pool_regions(const AnnotatedAst& tree, double k) {
  const double threshold = k * tree.mean_leaf_depth;
  std::vector<PoolRegion> regions(idx(tree.size()));
  for (int v = 0; v < tree.size(); ++v) {
    if (tree.depth[idx(v)] < threshold) {
      regions[idx(v)] = PoolRegion::Top;
    } else {
      regions[idx(v)] = tree.h_pos[idx(v)] > 0.5 ? PoolRegion::LowerRight : PoolRegion::LowerLeft;
    }
  }
  return regions;
}

Vector PooledFeatures::concat() const {
  Vector out;
  for (const auto& v : values) out.insert(out.end(), v.begin(), v.end());
  return out;
}

PooledFeatures pool_max(std::span<const Vector> conv, std::span<const PoolRegion> regions, int nc) {
  if (conv.size() != regions.size()) throw UsageError("pool_max: one region per node required");
  PooledFeatures out;
  for (int r = 0; r < 3; ++r) {
    out.values[idx(r)].assign(idx(nc), 0.0);
    out.argmax[idx(r)].assign(idx(nc), kNoArgmax);
  }
  for (std::size_t v = 0; v < conv.size(); ++v) {
    if (conv[v].size() != idx(nc)) throw UsageError("pool_max: feature dimension mismatch");
    const auto r = static_cast<std::size_t>(regions[v]);
    auto& best = out.values[r];
    auto& arg = out.argmax[r];
    for (std::size_t j = 0; j < idx(nc); ++j) {
      if (arg[j] == kNoArgmax || conv[v][j] > best[j]) {
        best[j] = conv[v][j];
        arg[j] = static_cast<int>(v);
      }
    }
  }
  return out;
}

ForwardTrace forward(const AnnotatedAst& tree, const TbcnnParams& params, const BowVector* bow) {
  params.validate();
  check_symbols(tree, params);
  const ModelShape& s = params.shape;
  if (s.bow_dim > 0 && bow == nullptr) throw UsageError("model expects bag-of-words features");
  if (s.bow_dim == 0 && bow != nullptr) throw UsageError("bag-of-words given but the model is not sized for it");
  if (bow != nullptr && bow->dim() != s.bow_dim) throw UsageError("bag-of-words dimension mismatch");

  ForwardTrace t;
  t.node_count = tree.size();
  combine(tree, params, t.coded, t.combined);
  t.conv = tree_convolve(t.combined, tree, params);
  t.regions = assign_pool_regions(tree, s.pool_k);
  t.pooled = pool_max(t.conv, t.regions, s.nc);
  t.hidden_input = bow ? combine_tbcnn_bow(t.pooled.concat(), *bow) : t.pooled.concat();

  t.hidden = params.hidden_bias;
  matvec_acc(params.hidden, t.hidden_input, 1.0, t.hidden);
  for (double& h : t.hidden) h = std::tanh(h);
  Vector logits = params.output_bias;
  matvec_acc(params.output, t.hidden, 1.0, logits);
  t.probabilities = softmax(logits);
  return t;
}

Vector predict(const AnnotatedAst& tree, const TbcnnParams& params, const BowVector* bow) {
  return forward(tree, params, bow).probabilities;
}

double cross_entropy(const ForwardTrace& trace, int label) {
  if (label < 0 || idx(label) >= trace.probabilities.size()) throw UsageError("label out of range");
  return -std::log(trace.probabilities[idx(label)]);
}

void backward(const AnnotatedAst& tree, const ForwardTrace& trace, int label, const TbcnnParams& params,
              TbcnnParams& grads) {
  const ModelShape& s = params.shape;
  const int n = tree.size();
  if (trace.node_count != n || trace.combined.size() != idx(n) || trace.conv.size() != idx(n) ||
      trace.probabilities.size() != idx(s.n_classes) || trace.hidden.size() != idx(s.nh) ||
      trace.hidden_input.size() != idx(s.hidden_input_dim()))
    throw UsageError("stale forward trace: shapes do not match the tree and parameters");
  if (grads.shape != s) throw UsageError("gradient container has the wrong shape");
  if (label < 0 || label >= s.n_classes) throw UsageError("label out of range");

  // Softmax + cross-entropy.
  Vector dlogits = trace.probabilities;
  dlogits[idx(label)] -= 1.0;
  outer_acc(grads.output, 1.0, dlogits, trace.hidden);
  axpy(1.0, dlogits, grads.output_bias);

  Vector dhidden(idx(s.nh), 0.0);
  matvec_t_acc(params.output, dlogits, 1.0, dhidden);
  for (std::size_t i = 0; i < dhidden.size(); ++i) dhidden[i] *= tanh_prime(trace.hidden[i]);
  outer_acc(grads.hidden, 1.0, dhidden, trace.hidden_input);
  axpy(1.0, dhidden, grads.hidden_bias);

  // Bag-of-words inputs are constants; only the pooled slice propagates.
  Vector dinput(idx(s.hidden_input_dim()), 0.0);
  matvec_t_acc(params.hidden, dhidden, 1.0, dinput);

  // Max pooling routes each dimension to its argmax node.
  std::vector<Vector> dconv(idx(n));
  for (int r = 0; r < 3; ++r) {
    const auto& arg = trace.pooled.argmax[idx(r)];
    for (int j = 0; j < s.nc; ++j) {
      const int v = arg[idx(j)];
      if (v == kNoArgmax) continue;
      auto& d = dconv[idx(v)];
      if (d.empty()) d.assign(idx(s.nc), 0.0);
      d[idx(j)] += dinput[idx(r * s.nc + j)];
    }
  }

  std::vector<Vector> dx(idx(n));
  auto dx_of = [&](int v) -> Vector& {
    auto& d = dx[idx(v)];
    if (d.empty()) d.assign(idx(s.nf), 0.0);
    return d;
  };

  Vector back_left(idx(s.nf)), back_right(idx(s.nf));
  for (int v = 0; v < n; ++v) {
    Vector& dpre = dconv[idx(v)];
    if (dpre.empty()) continue;
    for (std::size_t j = 0; j < dpre.size(); ++j) dpre[j] *= tanh_prime(trace.conv[idx(v)][j]);

    outer_acc(grads.conv_top, 1.0, dpre, trace.combined[idx(v)]);
    axpy(1.0, dpre, grads.conv_bias);
    matvec_t_acc(params.conv_top, dpre, 1.0, dx_of(v));

    const auto& kids = tree.ast.node(v).children;
    if (kids.empty()) continue;
    std::fill(back_left.begin(), back_left.end(), 0.0);
    std::fill(back_right.begin(), back_right.end(), 0.0);
    matvec_t_acc(params.conv_left, dpre, 1.0, back_left);
    matvec_t_acc(params.conv_right, dpre, 1.0, back_right);
    const int count = static_cast<int>(kids.size());
    for (int i = 0; i < count; ++i) {
      const int c = kids[idx(i)];
      const auto eta = conv_coefficients(WindowLevel::Bottom, i + 1, count);
      outer_acc(grads.conv_left, eta.left, dpre, trace.combined[idx(c)]);
      outer_acc(grads.conv_right, eta.right, dpre, trace.combined[idx(c)]);
      Vector& dc = dx_of(c);
      axpy(eta.left, back_left, dc);
      axpy(eta.right, back_right, dc);
    }
  }

  // Coding layer and embeddings.
  Vector dcoded(idx(s.nf));
  for (int v = 0; v < n; ++v) {
    const Vector& d = dx[idx(v)];
    if (d.empty()) continue;
    const int sym = tree.ast.node(v).symbol;
    if (tree.ast.is_leaf(v)) {
      axpy(1.0, d, grads.emb[sym]);
      continue;
    }
    const auto self = params.emb[sym];
    const Vector& coded = trace.coded[idx(v)];
    matvec_t_acc(params.comb_self, d, 1.0, grads.emb[sym]);
    outer_acc(grads.comb_self, 1.0, d, self);
    outer_acc(grads.comb_coded, 1.0, d, coded);

    std::fill(dcoded.begin(), dcoded.end(), 0.0);
    matvec_t_acc(params.comb_coded, d, 1.0, dcoded);
    for (std::size_t j = 0; j < dcoded.size(); ++j) dcoded[j] *= tanh_prime(coded[j]);
    axpy(1.0, dcoded, grads.coding.bias);

    const auto& kids = tree.ast.node(v).children;
    const int count = static_cast<int>(kids.size());
    const double total = tree.leaf_count[idx(v)];
    for (int i = 0; i < count; ++i) {
      const int c = kids[idx(i)];
      const int csym = tree.ast.node(c).symbol;
      const double l = tree.leaf_count[idx(c)] / total;
      const auto [cl, cr] = coding_coefficients(i + 1, count);
      const auto x = params.emb[csym];
      outer_acc(grads.coding.left, l * cl, dcoded, x);
      outer_acc(grads.coding.right, l * cr, dcoded, x);
      matvec_t_acc(params.coding.left, dcoded, l * cl, grads.emb[csym]);
      matvec_t_acc(params.coding.right, dcoded, l * cr, grads.emb[csym]);
    }
  }
}

TbcnnParams backward(const AnnotatedAst& tree, const ForwardTrace& trace, int label,
                     const TbcnnParams& params) {
  TbcnnParams grads = TbcnnParams::zeros(params.shape);
  backward(tree, trace, label, params, grads);
  return grads;
}

}  // namespace tbcnn
