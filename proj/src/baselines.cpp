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

#include "tbcnn/baselines.hpp"

#include <cmath>
#include <numeric>

#include "json_util.hpp"
#include "tbcnn/error.hpp"

namespace tbcnn {

BowVector bow_features(const Ast& ast, int dim) {
  if (dim < 1) throw UsageError("bow dimension must be positive");
  BowVector bow{std::vector<int>(static_cast<std::size_t>(dim), 0)};
  for (const auto& node : ast.nodes()) {
    const int id = node.symbol < dim ? node.symbol : dim - 1;
    ++bow.counts[static_cast<std::size_t>(id)];
  }
  return bow;
}

Vector bow_as_vector(const BowVector& bow) { return Vector(bow.counts.begin(), bow.counts.end()); }

Vector combine_tbcnn_bow(std::span<const double> pooled, const BowVector& bow) {
  Vector out(pooled.begin(), pooled.end());
  out.reserve(pooled.size() + bow.counts.size());
  for (int c : bow.counts) out.push_back(std::log1p(static_cast<double>(c)));
  return out;
}

Vector LinearModel::scores(std::span<const double> x) const {
  Vector s = bias;
  matvec_acc(weights, x, 1.0, s);
  return s;
}

int LinearModel::predict(std::span<const double> x) const {
  const Vector s = scores(x);
  int best = 0;
  for (int k = 1; k < static_cast<int>(s.size()); ++k)
    if (s[static_cast<std::size_t>(k)] > s[static_cast<std::size_t>(best)]) best = k;
  return best;
}

namespace {

void check_inputs(std::span<const Vector> features, std::span<const int> labels, int n_classes) {
  if (features.empty()) throw UsageError("no training samples");
  if (features.size() != labels.size()) throw UsageError("features and labels differ in length");
  if (n_classes < 2) throw UsageError("need at least two classes");
  const std::size_t dim = features.front().size();
  for (const auto& f : features)
    if (f.size() != dim) throw UsageError("inconsistent feature dimensions");
  for (int y : labels)
    if (y < 0 || y >= n_classes) throw UsageError("label out of range");
}

// d(loss)/d(score) for one sample.
Vector score_gradient(const LinearModel& m, std::span<const double> x, int label) {
  Vector s = m.scores(x);
  if (m.loss == LinearLoss::Logistic) {
    Vector p = softmax(s);
    p[static_cast<std::size_t>(label)] -= 1.0;
    return p;
  }
  // One-vs-rest hinge: sum_k max(0, 1 - y_k s_k), y_k = +1 for the label.
  Vector g(s.size(), 0.0);
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double y = static_cast<int>(k) == label ? 1.0 : -1.0;
    if (1.0 - y * s[k] > 0.0) g[k] = -y;
  }
  return g;
}

double sample_loss(const LinearModel& m, std::span<const double> x, int label) {
  const Vector s = m.scores(x);
  if (m.loss == LinearLoss::Logistic) {
    const Vector p = softmax(s);
    return -std::log(std::max(p[static_cast<std::size_t>(label)], 1e-300));
  }
  double total = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double y = static_cast<int>(k) == label ? 1.0 : -1.0;
    total += std::max(0.0, 1.0 - y * s[k]);
  }
  return total;
}

}  // namespace

LinearModel train_linear(std::span<const Vector> features, std::span<const int> labels,
                         int n_classes, const LinearTrainOptions& opts) {
  check_inputs(features, labels, n_classes);
  if (!(opts.lr > 0.0) || opts.l2 < 0.0 || opts.epochs < 0)
    throw UsageError("linear training needs lr > 0, l2 >= 0, epochs >= 0");

  const auto k = static_cast<std::size_t>(n_classes);
  const std::size_t dim = features.front().size();
  LinearModel m{opts.loss, Matrix(k, dim), Vector(k, 0.0)};
  SeededRng rng(opts.seed);
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      const Vector g = score_gradient(m, features[i], labels[i]);
      // Weight decay, then the data term.
      if (opts.l2 > 0.0) {
        const double shrink = 1.0 - opts.lr * opts.l2;
        for (double& w : m.weights.data()) w *= shrink;
      }
      outer_acc(m.weights, -opts.lr, g, features[i]);
      axpy(-opts.lr, g, m.bias);
    }
    if (!all_finite(m.weights.data()) || !all_finite(m.bias))
      throw NumericError("linear baseline diverged at epoch " + std::to_string(epoch + 1));
  }
  return m;
}

double linear_loss(const LinearModel& model, std::span<const Vector> features,
                   std::span<const int> labels) {
  if (features.empty() || features.size() != labels.size()) throw UsageError("bad evaluation set");
  double total = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) total += sample_loss(model, features[i], labels[i]);
  return total / static_cast<double>(features.size());
}

double linear_error_rate(const LinearModel& model, std::span<const Vector> features,
                         std::span<const int> labels) {
  if (features.empty() || features.size() != labels.size()) throw UsageError("bad evaluation set");
  int wrong = 0;
  for (std::size_t i = 0; i < features.size(); ++i)
    if (model.predict(features[i]) != labels[i]) ++wrong;
  return 100.0 * wrong / static_cast<double>(features.size());
}

std::string format_baseline(const BaselineCheckpoint& ckpt) {
  detail::ordered_json doc;
  doc["format"] = "tbcnn-baseline";
  doc["version"] = 1;
  doc["loss"] = ckpt.model.loss == LinearLoss::Logistic ? "logistic" : "hinge";
  doc["n_classes"] = ckpt.model.n_classes();
  doc["dim"] = ckpt.model.dim();
  doc["vocab"] = ckpt.vocab.symbols();
  doc["weights"] = detail::to_json(ckpt.model.weights);
  doc["bias"] = detail::to_json(ckpt.model.bias);
  return doc.dump() + "\n";
}

BaselineCheckpoint parse_baseline(std::string_view text) {
  using namespace detail;
  const json doc = parse_document(text, "tbcnn-baseline", 1);
  BaselineCheckpoint out;
  out.vocab = vocab_from_json(field(doc, "vocab"));
  const json& loss = field(doc, "loss");
  if (loss == "logistic") {
    out.model.loss = LinearLoss::Logistic;
  } else if (loss == "hinge") {
    out.model.loss = LinearLoss::Hinge;
  } else {
    throw DataError("unknown baseline loss kind");
  }
  const auto k = static_cast<std::size_t>(positive_int(doc, "n_classes"));
  const auto dim = static_cast<std::size_t>(positive_int(doc, "dim"));
  if (dim != static_cast<std::size_t>(out.vocab.table_rows()))
    throw DataError("baseline dimension does not match its vocabulary");
  out.model.weights = matrix_from_json(field(doc, "weights"), k, dim, "weights");
  out.model.bias = vector_from_json(field(doc, "bias"), k, "bias");
  return out;
}

}  // namespace tbcnn
