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

#ifndef TBCNN_TRAINER_HPP
#define TBCNN_TRAINER_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tbcnn/ast.hpp"
#include "tbcnn/baselines.hpp"
#include "tbcnn/network.hpp"
#include "tbcnn/pretrain.hpp"

namespace tbcnn {

struct LabeledDataset {
  SymbolVocab vocab;
  std::vector<AnnotatedAst> trees;
  std::vector<int> labels;
  int n_classes = 0;
  std::string provenance;

  int size() const { return static_cast<int>(trees.size()); }
};

// Interns every tree against `vocab` under `policy`. n_classes defaults to
// max label + 1; pass a larger value to fix it (e.g. from a checkpoint).
LabeledDataset make_dataset(std::span<const LabeledTree> samples, SymbolVocab vocab,
                            UnknownSymbols policy, std::string provenance = {},
                            std::optional<int> n_classes = std::nullopt);

// Builds the vocabulary from the samples themselves.
LabeledDataset make_dataset(std::span<const LabeledTree> samples, std::string provenance = {});

struct SplitSpec {
  std::vector<int> train;
  std::vector<int> cv;
  std::vector<int> test;
  std::uint64_t seed = 0;
  bool stratified = true;
};

// 60/20/20 shuffled split, stratified by label. Falls back to an unstratified
// split (with a warning) when some class has fewer than 3 samples. Throws
// DataError below 5 samples.
SplitSpec split_dataset(const LabeledDataset& ds, std::uint64_t seed);

enum class InitMode { Random, Pretrained, Zero };

struct TrainConfig {
  int nf = 30;
  int nc = 30;
  int nh = 30;
  double lr = 0.03;
  double momentum = 0.0;
  double l2 = 0.0;
  int epochs = 40;
  std::uint64_t seed = 1;
  std::uint64_t split_seed = 1;
  InitMode init = InitMode::Random;
  bool bow = false;
  int patience = 10;  // epochs without CV improvement before stopping; 0 disables
  double pool_k = kDefaultPoolThreshold;
  double init_scale = 0.03;
};

// `key = value` lines, '#' comments. Keys mirror TrainConfig field names.
// Throws UsageError on unknown keys or bad values.
TrainConfig parse_train_config(std::string_view text, TrainConfig base = {});
std::string format_train_config(const TrainConfig& config);

struct CurvePoint {
  int epoch = 0;
  double train_cost = 0.0;
  double cv_cost = 0.0;
};

struct TrainResult {
  TbcnnParams params;
  std::vector<CurvePoint> curve;
  int best_epoch = 0;  // 0 when no epoch ran
};

// Fresh parameters for `shape`. Random mode draws everything uniformly in
// [-init_scale, init_scale]; Pretrained copies embeddings and coding params
// from `pretrained` (matched by symbol string); Zero leaves every tensor at 0.
// Random draws happen in a fixed order so that Random and Pretrained agree on
// every tensor not taken from the checkpoint. Combination matrices start as
// identities except in Zero mode.
TbcnnParams initialize_params(const ModelShape& shape, const TrainConfig& config,
                              const SymbolVocab& vocab, const EmbeddingCheckpoint* pretrained);

ModelShape model_shape_for(const LabeledDataset& ds, const TrainConfig& config);

// Per-sample SGD with momentum and l2 over shuffled training samples. After
// each epoch, records mean train and CV cross-entropy; returns the parameters
// of the epoch with the lowest CV cost. Throws NumericError on divergence.
TrainResult train(const LabeledDataset& ds, const SplitSpec& split, const TrainConfig& config,
                  const EmbeddingCheckpoint* pretrained = nullptr);

struct Metrics {
  double error_rate = 0.0;  // percent
  double mean_cost = 0.0;
  int count = 0;
  std::vector<std::vector<int>> confusion;  // [true][predicted]
};

// Throws UsageError for an empty index list.
Metrics evaluate(const TbcnnParams& params, const LabeledDataset& ds, std::span<const int> indices);

std::string format_metrics_json(const Metrics& m, std::string_view split_name);

// epoch<TAB>train_cost<TAB>cv_cost with a header line.
std::string format_curve(std::span<const CurvePoint> curve);

struct RecordedMetrics {
  int best_epoch = 0;
  double cv_error = 0.0;
  double cv_cost = 0.0;
};

struct ModelCheckpoint {
  SymbolVocab vocab;
  TbcnnParams params;
  std::uint64_t split_seed = 0;
  std::optional<RecordedMetrics> recorded;
};

std::string format_model(const ModelCheckpoint& ckpt);
ModelCheckpoint parse_model(std::string_view text);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path);
ModelCheckpoint load_checkpoint(const std::string& path);

// Whole-file helpers shared by the tools. Throw DataError on I/O failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace tbcnn

#endif  // TBCNN_TRAINER_HPP
