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

#ifndef TBCNN_BASELINES_HPP
#define TBCNN_BASELINES_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tbcnn/ast.hpp"
#include "tbcnn/numerics.hpp"

namespace tbcnn {

// Per-symbol occurrence counts. Ids past the end of the table fall into the
// last (<UNK>) bucket.
struct BowVector {
  std::vector<int> counts;

  int dim() const { return static_cast<int>(counts.size()); }
  bool operator==(const BowVector&) const = default;
};

// `dim` is normally SymbolVocab::table_rows().
BowVector bow_features(const Ast& ast, int dim);

// Counts as doubles, the feature vector the linear baselines consume.
Vector bow_as_vector(const BowVector& bow);

// Pooled TBCNN features followed by log(1 + count) of every BOW coordinate.
Vector combine_tbcnn_bow(std::span<const double> pooled, const BowVector& bow);

enum class LinearLoss { Logistic, Hinge };

// Multinomial logistic regression or one-vs-rest linear SVM.
struct LinearModel {
  LinearLoss loss = LinearLoss::Logistic;
  Matrix weights;  // n_classes x dim
  Vector bias;

  int n_classes() const { return static_cast<int>(weights.rows()); }
  int dim() const { return static_cast<int>(weights.cols()); }
  Vector scores(std::span<const double> x) const;
  // Highest score, ties to the smallest class id.
  int predict(std::span<const double> x) const;
  bool operator==(const LinearModel&) const = default;
};

struct LinearTrainOptions {
  LinearLoss loss = LinearLoss::Logistic;
  double lr = 0.01;
  double l2 = 1e-4;
  int epochs = 50;
  std::uint64_t seed = 1;
};

// Per-sample SGD with l2 on the weights, shuffled each epoch from the seed.
// Throws NumericError on divergence, UsageError on inconsistent inputs.
LinearModel train_linear(std::span<const Vector> features, std::span<const int> labels,
                         int n_classes, const LinearTrainOptions& opts);

// Mean unregularized loss of the model's own kind.
double linear_loss(const LinearModel& model, std::span<const Vector> features,
                   std::span<const int> labels);

// 100 * fraction misclassified.
double linear_error_rate(const LinearModel& model, std::span<const Vector> features,
                         std::span<const int> labels);

struct BaselineCheckpoint {
  SymbolVocab vocab;
  LinearModel model;
};

std::string format_baseline(const BaselineCheckpoint& ckpt);
BaselineCheckpoint parse_baseline(std::string_view text);

}  // namespace tbcnn

#endif  // TBCNN_BASELINES_HPP
