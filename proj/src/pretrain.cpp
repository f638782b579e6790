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

#include "tbcnn/pretrain.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "json_util.hpp"
#include "tbcnn/error.hpp"
#include "tbcnn/log.hpp"

namespace tbcnn {

namespace {

void check_sample(const PretrainSample& s, const EmbeddingTable& emb, const CodingParams& cp) {
  if (s.children.empty() || s.children.size() != s.weights.size())
    throw UsageError("pretrain sample needs children with one weight each");
  const auto nf = static_cast<std::size_t>(emb.dim());
  if (cp.left.rows() != nf || cp.left.cols() != nf || cp.right.rows() != nf ||
      cp.right.cols() != nf || cp.bias.size() != nf)
    throw UsageError("coding params do not match the embedding dimension");
  auto in_range = [&](int id) { return id >= 0 && id < emb.rows(); };
  if (!in_range(s.parent)) throw UsageError("parent symbol id out of range");
  for (int c : s.children)
    if (!in_range(c)) throw UsageError("child symbol id out of range");
}

// Accumulates sign * d(distance) into grads; returns the distance.
double distance_gradient(const PretrainSample& s, const PretrainModel& model, double sign,
                         PretrainModel& grads) {
  const EmbeddingTable& emb = model.emb;
  const CodingParams& cp = model.coding;
  const Vector coded = code_children(s, emb, cp);
  const auto parent = emb[s.parent];
  const std::size_t nf = coded.size();

  Vector residual(nf);
  for (std::size_t k = 0; k < nf; ++k) residual[k] = parent[k] - coded[k];
  double distance = 0.0;
  for (double r : residual) distance += r * r;

  axpy(2.0 * sign, residual, grads.emb[s.parent]);

  Vector dz(nf);
  for (std::size_t k = 0; k < nf; ++k) dz[k] = -2.0 * residual[k] * tanh_prime(coded[k]);

  axpy(sign, dz, grads.coding.bias);
  const int n = static_cast<int>(s.children.size());
  for (int i = 0; i < n; ++i) {
    const auto [cl, cr] = coding_coefficients(i + 1, n);
    const double w = s.weights[static_cast<std::size_t>(i)];
    const int child = s.children[static_cast<std::size_t>(i)];
    const auto x = emb[child];
    outer_acc(grads.coding.left, sign * w * cl, dz, x);
    outer_acc(grads.coding.right, sign * w * cr, dz, x);
    matvec_t_acc(cp.left, dz, sign * w * cl, grads.emb[child]);
    matvec_t_acc(cp.right, dz, sign * w * cr, grads.emb[child]);
  }
  return distance;
}

}  // namespace

void EmbeddingTable::reset_unknown_to_mean() {
  const int n = rows() - 1;
  if (n <= 0) return;
  auto unk = (*this)[n];
  std::fill(unk.begin(), unk.end(), 0.0);
  for (int r = 0; r < n; ++r) axpy(1.0, (*this)[r], unk);
  for (double& v : unk) v /= n;
}

CodingParams CodingParams::zeros(int nf) {
  const auto n = static_cast<std::size_t>(nf);
  return {Matrix(n, n), Matrix(n, n), Vector(n, 0.0)};
}

PretrainModel PretrainModel::zeros(int rows, int nf) {
  return {EmbeddingTable{Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(nf))},
          CodingParams::zeros(nf)};
}

std::vector<TensorRef> PretrainModel::tensors() {
  return {{"embeddings", emb.vectors.data(), false},
          {"code_left", coding.left.data(), true},
          {"code_right", coding.right.data(), true},
          {"code_bias", coding.bias, false}};
}

std::vector<ConstTensorRef> PretrainModel::tensors() const {
  return {{"embeddings", emb.vectors.data(), false},
          {"code_left", coding.left.data(), true},
          {"code_right", coding.right.data(), true},
          {"code_bias", coding.bias, false}};
}

std::pair<double, double> coding_coefficients(int i, int n) {
  if (n < 1 || i < 1 || i > n) throw UsageError("coding_coefficients: need 1 <= i <= n");
  if (n == 1) return {0.5, 0.5};
  const double right = static_cast<double>(i - 1) / static_cast<double>(n - 1);
  return {1.0 - right, right};
}

Vector code_children(const PretrainSample& sample, const EmbeddingTable& emb, const CodingParams& cp) {
  check_sample(sample, emb, cp);
  Vector z = cp.bias;
  const int n = static_cast<int>(sample.children.size());
  for (int i = 0; i < n; ++i) {
    const auto [cl, cr] = coding_coefficients(i + 1, n);
    const double w = sample.weights[static_cast<std::size_t>(i)];
    const auto x = emb[sample.children[static_cast<std::size_t>(i)]];
    matvec_acc(cp.left, x, w * cl, z);
    matvec_acc(cp.right, x, w * cr, z);
  }
  for (double& v : z) v = std::tanh(v);
  return z;
}

double coding_distance(const PretrainSample& sample, const EmbeddingTable& emb, const CodingParams& cp) {
  const Vector coded = code_children(sample, emb, cp);
  return squared_distance(emb[sample.parent], coded);
}

PretrainSample negative_sample(const PretrainSample& sample, int vocab_size, SeededRng& rng) {
  if (vocab_size < 2) throw UsageError("negative sampling needs at least two symbols");
  PretrainSample out = sample;
  const auto slot = rng.below(sample.children.size() + 1);
  int& target = slot == 0 ? out.parent : out.children[static_cast<std::size_t>(slot - 1)];
  // Uniform over the ids in [0, vocab_size) that differ from the original.
  if (target >= 0 && target < vocab_size) {
    auto pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab_size - 1)));
    if (pick >= target) ++pick;
    target = pick;
  } else {
    target = static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab_size)));
  }
  return out;
}

double coding_hinge_loss(const PretrainSample& positive, const PretrainSample& negative,
                         const PretrainModel& model, double margin) {
  const double d = coding_distance(positive, model.emb, model.coding);
  const double dc = coding_distance(negative, model.emb, model.coding);
  const double value = margin + d - dc;
  // NaN must surface to the caller rather than clamp to zero.
  return std::isnan(value) || value > 0.0 ? value : 0.0;
}

double coding_hinge_gradient(const PretrainSample& positive, const PretrainSample& negative,
                             const PretrainModel& model, double margin, PretrainModel& grads) {
  const double loss = coding_hinge_loss(positive, negative, model, margin);
  if (loss <= 0.0) return loss;
  distance_gradient(positive, model, +1.0, grads);
  distance_gradient(negative, model, -1.0, grads);
  return loss;
}

PretrainStepResult pretrain_step(const PretrainSample& sample, PretrainModel& model,
                                 const PretrainConfig& config, int vocab_size, SeededRng& rng,
                                 MomentumState& momentum) {
  const PretrainSample negative = negative_sample(sample, vocab_size, rng);
  PretrainModel grads = PretrainModel::zeros(model.emb.rows(), model.emb.dim());
  const double loss = coding_hinge_gradient(sample, negative, model, config.margin, grads);
  if (!std::isfinite(loss)) {
    log_message(LogLevel::Warn, "pretrain: non-finite loss, step skipped");
    return {loss, false};
  }
  if (loss <= 0.0) return {loss, false};

  const auto params = model.tensors();
  const auto g = std::as_const(grads).tensors();
  const bool applied =
      sgd_momentum_step(params, g, momentum, {config.lr, config.momentum, config.l2});
  if (!applied) log_message(LogLevel::Warn, "pretrain: non-finite gradient, step skipped");
  return {loss, applied};
}

std::vector<PretrainSample> extract_samples(std::span<const AnnotatedAst> corpus) {
  std::vector<PretrainSample> out;
  for (const auto& tree : corpus) {
    // Pre-order walk so the sample order does not depend on node numbering.
    std::vector<int> stack{tree.ast.root()};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      const auto& kids = tree.ast.node(v).children;
      if (kids.empty()) continue;
      PretrainSample s;
      s.parent = tree.ast.node(v).symbol;
      s.weights = child_coefficients(tree, v);
      for (int c : kids) s.children.push_back(tree.ast.node(c).symbol);
      out.push_back(std::move(s));
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
  }
  return out;
}

PretrainModel init_pretrain_model(int rows, const PretrainConfig& config, SeededRng& rng) {
  PretrainModel model = PretrainModel::zeros(rows, config.nf);
  fill_uniform(model.emb.vectors.data(), config.init_scale, rng);
  fill_uniform(model.coding.left.data(), config.init_scale, rng);
  fill_uniform(model.coding.right.data(), config.init_scale, rng);
  model.emb.reset_unknown_to_mean();
  return model;
}

PretrainResult run_pretrain(std::span<const AnnotatedAst> corpus, const SymbolVocab& vocab,
                            const PretrainConfig& config) {
  if (corpus.empty()) throw DataError("pretraining corpus is empty");
  if (config.nf < 1) throw UsageError("nf must be at least 1");
  if (!(config.margin > 0.0)) throw UsageError("margin must be positive");
  if (config.epochs < 0) throw UsageError("epochs must be non-negative");
  if (vocab.size() < 2) throw DataError("pretraining needs at least two distinct symbols");

  SeededRng rng(config.seed);
  PretrainResult result{init_pretrain_model(vocab.table_rows(), config, rng), {}};
  std::vector<PretrainSample> samples = extract_samples(corpus);
  if (samples.empty()) throw DataError("corpus has no non-leaf nodes to pretrain on");
  for (const auto& s : samples) check_sample(s, result.model.emb, result.model.coding);

  MomentumState momentum;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(samples);
    double total = 0.0;
    int counted = 0;
    for (const auto& s : samples) {
      const auto step = pretrain_step(s, result.model, config, vocab.size(), rng, momentum);
      if (std::isfinite(step.loss)) {
        total += step.loss;
        ++counted;
      }
    }
    const double mean = counted ? total / counted : 0.0;
    result.epoch_loss.push_back(mean);
    log_message(LogLevel::Info, "pretrain epoch " + std::to_string(epoch) + " loss " + std::to_string(mean));
  }
  if (config.epochs > 0) result.model.emb.reset_unknown_to_mean();
  return result;
}

std::string format_embeddings(const EmbeddingCheckpoint& ckpt) {
  detail::ordered_json doc;
  doc["format"] = "tbcnn-embeddings";
  doc["version"] = 1;
  doc["nf"] = ckpt.model.emb.dim();
  doc["vocab"] = ckpt.vocab.symbols();
  doc["embeddings"] = detail::to_json(ckpt.model.emb.vectors);
  doc["coding"] = {{"left", detail::to_json(ckpt.model.coding.left)},
                   {"right", detail::to_json(ckpt.model.coding.right)},
                   {"bias", detail::to_json(ckpt.model.coding.bias)}};
  doc["epoch_loss"] = ckpt.epoch_loss;
  return doc.dump() + "\n";
}

EmbeddingCheckpoint parse_embeddings(std::string_view text) {
  using namespace detail;
  const json doc = parse_document(text, "tbcnn-embeddings", 1);
  EmbeddingCheckpoint out;
  out.vocab = vocab_from_json(field(doc, "vocab"));
  const int nf = positive_int(doc, "nf");
  if (nf < 1) throw DataError("nf must be positive");
  const auto rows = static_cast<std::size_t>(out.vocab.table_rows());
  const auto n = static_cast<std::size_t>(nf);
  out.model.emb.vectors = matrix_from_json(field(doc, "embeddings"), rows, n, "embeddings");
  const json& coding = field(doc, "coding");
  out.model.coding.left = matrix_from_json(field(coding, "left"), n, n, "coding.left");
  out.model.coding.right = matrix_from_json(field(coding, "right"), n, n, "coding.right");
  out.model.coding.bias = vector_from_json(field(coding, "bias"), n, "coding.bias");
  if (doc.contains("epoch_loss") && doc["epoch_loss"].is_array())
    out.epoch_loss = doc["epoch_loss"].get<std::vector<double>>();
  return out;
}

}  // namespace tbcnn
