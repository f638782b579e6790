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

#ifndef TBCNN_NETWORK_HPP
#define TBCNN_NETWORK_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tbcnn/ast.hpp"
#include "tbcnn/baselines.hpp"
#include "tbcnn/numerics.hpp"
#include "tbcnn/pretrain.hpp"

namespace tbcnn {

inline constexpr double kDefaultPoolThreshold = 0.6;

struct ModelShape {
  int vocab_rows = 0;  // embedding rows, <UNK> included
  int nf = 30;         // feature (embedding) size
  int nc = 30;         // convolution kernels
  int nh = 30;         // hidden units
  int n_classes = 2;
  int bow_dim = 0;     // 0 disables the bag-of-words input to the hidden layer
  double pool_k = kDefaultPoolThreshold;

  int hidden_input_dim() const { return 3 * nc + bow_dim; }
  bool operator==(const ModelShape&) const = default;
};

// The full trainable parameter set. Also used as the gradient container.
struct TbcnnParams {
  ModelShape shape;
  EmbeddingTable emb;
  CodingParams coding;
  Matrix comb_self;   // nf x nf, applied to a node's own embedding
  Matrix comb_coded;  // nf x nf, applied to the coded children vector
  Matrix conv_top;    // nc x nf
  Matrix conv_left;
  Matrix conv_right;
  Vector conv_bias;
  Matrix hidden;      // nh x hidden_input_dim
  Vector hidden_bias;
  Matrix output;      // n_classes x nh
  Vector output_bias;

  static TbcnnParams zeros(const ModelShape& shape);
  // Throws UsageError when any tensor disagrees with `shape`.
  void validate() const;

  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;
  bool operator==(const TbcnnParams&) const = default;
};

enum class PoolRegion : std::uint8_t { Top = 0, LowerLeft = 1, LowerRight = 2 };

const char* to_string(PoolRegion region);

enum class WindowLevel { Top, Bottom };

struct EtaCoefficients {
  double top = 0.0;
  double left = 0.0;
  double right = 0.0;
};

// Continuous-binary-tree weights for a node in a depth-2 window. The window's
// top node gets (1, 0, 0). A bottom node at 1-based position p among n
// siblings gets right = (p - 1) / (n - 1) (0.5 when n == 1), left = 1 - right.
EtaCoefficients conv_coefficients(WindowLevel level, int position = 1, int siblings = 1);

// Text table contrasting the implemented coefficients with a literal top-down
// reading of the depth formula, for a window whose top has `siblings` children.
std::string describe_eta_conventions(int siblings = 3);

// Leaves: their embedding. Internal nodes:
//   comb_self * vec(p) + comb_coded * tanh(sum_i l_i W_code,i vec(c_i) + b_code)
std::vector<Vector> combined_node_vectors(const AnnotatedAst& tree, const TbcnnParams& params);

// One output per node: tanh over the depth-2 window {node} U children(node).
std::vector<Vector> tree_convolve(std::span<const Vector> x, const AnnotatedAst& tree,
                                  const TbcnnParams& params);

// TOP iff depth < k * mean leaf depth; otherwise LOWER_LEFT when h_pos <= 0.5,
// LOWER_RIGHT when h_pos > 0.5.
std::vector<PoolRegion> assign_pool_regions(const AnnotatedAst& tree, double k = kDefaultPoolThreshold);

inline constexpr int kNoArgmax = -1;

struct PooledFeatures {
  std::array<Vector, 3> values;         // indexed by PoolRegion
  std::array<std::vector<int>, 3> argmax;  // node per dimension, kNoArgmax if empty

  // top | lower_left | lower_right
  Vector concat() const;
};

// Per-dimension max over each region. Empty regions pool to zero. Ties go to
// the smallest node index.
PooledFeatures pool_max(std::span<const Vector> conv, std::span<const PoolRegion> regions, int nc);

struct ForwardTrace {
  int node_count = 0;
  std::vector<Vector> coded;     // per node; empty for leaves
  std::vector<Vector> combined;  // per node, nf
  std::vector<Vector> conv;      // per node, nc (post-activation)
  std::vector<PoolRegion> regions;
  PooledFeatures pooled;
  Vector hidden_input;
  Vector hidden;
  Vector probabilities;
};

// `bow` must be given exactly when params.shape.bow_dim > 0.
ForwardTrace forward(const AnnotatedAst& tree, const TbcnnParams& params,
                     const BowVector* bow = nullptr);

// Class probabilities only.
Vector predict(const AnnotatedAst& tree, const TbcnnParams& params, const BowVector* bow = nullptr);

// -log p[label]
double cross_entropy(const ForwardTrace& trace, int label);

// Exact gradient of cross_entropy w.r.t. every tensor, accumulated into
// `grads` (shaped like params). Throws UsageError for a stale trace.
void backward(const AnnotatedAst& tree, const ForwardTrace& trace, int label,
              const TbcnnParams& params, TbcnnParams& grads);

TbcnnParams backward(const AnnotatedAst& tree, const ForwardTrace& trace, int label,
                     const TbcnnParams& params);

}  // namespace tbcnn

#endif  // TBCNN_NETWORK_HPP
