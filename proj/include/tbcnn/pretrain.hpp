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

#ifndef TBCNN_PRETRAIN_HPP
#define TBCNN_PRETRAIN_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tbcnn/ast.hpp"
#include "tbcnn/numerics.hpp"

namespace tbcnn {

// One row per symbol id; the last row belongs to <UNK>.
struct EmbeddingTable {
  Matrix vectors;

  int rows() const { return static_cast<int>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
  std::span<const double> operator[](int id) const { return vectors.row(static_cast<std::size_t>(id)); }
  std::span<double> operator[](int id) { return vectors.row(static_cast<std::size_t>(id)); }

  // Sets the <UNK> row to the mean of all other rows.
  void reset_unknown_to_mean();

  bool operator==(const EmbeddingTable&) const = default;
};

// Continuous-binary-tree coding layer: two shared weights and a bias.
struct CodingParams {
  Matrix left;
  Matrix right;
  Vector bias;

  static CodingParams zeros(int nf);
  bool operator==(const CodingParams&) const = default;
};

// Everything the coding criterion learns.
struct PretrainModel {
  EmbeddingTable emb;
  CodingParams coding;

  static PretrainModel zeros(int rows, int nf);
  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;
  bool operator==(const PretrainModel&) const = default;
};

// A parent symbol with its ordered children and leaf-count weights.
struct PretrainSample {
  int parent = 0;
  std::vector<int> children;
  std::vector<double> weights;

  bool operator==(const PretrainSample&) const = default;
};

struct PretrainConfig {
  int nf = 30;
  double margin = 1.0;
  double lr = 0.03;
  int epochs = 10;
  std::uint64_t seed = 1;
  double init_scale = 0.1;
  double momentum = 0.0;
  double l2 = 0.0;
};

// Interpolation weights (c_left, c_right) of child i (1-based) out of n.
// c_right = (i - 1) / (n - 1); a lone child gets (0.5, 0.5).
std::pair<double, double> coding_coefficients(int i, int n);

// tanh(sum_i l_i (c_l W_left + c_r W_right) vec(c_i) + b)
Vector code_children(const PretrainSample& sample, const EmbeddingTable& emb, const CodingParams& cp);

// Squared Euclidean distance between vec(parent) and the coded vector.
double coding_distance(const PretrainSample& sample, const EmbeddingTable& emb, const CodingParams& cp);

// Replaces one uniformly chosen position (parent or a child) with a different
// symbol drawn uniformly from [0, vocab_size). Throws UsageError when
// vocab_size < 2.
PretrainSample negative_sample(const PretrainSample& sample, int vocab_size, SeededRng& rng);

// max{0, margin + d(positive) - d(negative)}
double coding_hinge_loss(const PretrainSample& positive, const PretrainSample& negative,
                         const PretrainModel& model, double margin);

// Same loss; when positive, accumulates its gradient into `grads` (which must
// be shaped like `model`). The kink at zero is treated as zero gradient.
double coding_hinge_gradient(const PretrainSample& positive, const PretrainSample& negative,
                             const PretrainModel& model, double margin, PretrainModel& grads);

struct PretrainStepResult {
  double loss = 0.0;
  bool updated = false;
};

// Draws one negative sample and applies one SGD step when the hinge is
// active. A non-finite loss or gradient skips the update (loss reported).
PretrainStepResult pretrain_step(const PretrainSample& sample, PretrainModel& model,
                                 const PretrainConfig& config, int vocab_size, SeededRng& rng,
                                 MomentumState& momentum);

// Every non-leaf node of every tree, in tree then pre-order.
std::vector<PretrainSample> extract_samples(std::span<const AnnotatedAst> corpus);

struct PretrainResult {
  PretrainModel model;
  std::vector<double> epoch_loss;
};

PretrainModel init_pretrain_model(int rows, const PretrainConfig& config, SeededRng& rng);

PretrainResult run_pretrain(std::span<const AnnotatedAst> corpus, const SymbolVocab& vocab,
                            const PretrainConfig& config);

// Embedding checkpoint: vocabulary, dimension, all vectors and coding params.
struct EmbeddingCheckpoint {
  SymbolVocab vocab;
  PretrainModel model;
  std::vector<double> epoch_loss;
};

std::string format_embeddings(const EmbeddingCheckpoint& ckpt);
EmbeddingCheckpoint parse_embeddings(std::string_view text);

}  // namespace tbcnn

#endif  // TBCNN_PRETRAIN_HPP
