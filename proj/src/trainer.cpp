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

#include "tbcnn/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "json_util.hpp"
#include "tbcnn/error.hpp"
#include "tbcnn/log.hpp"

namespace tbcnn {

namespace {

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

// Stream for the per-epoch sample order, kept apart from initialization.
constexpr std::uint64_t kShuffleStream = 0x73687566666c65ULL;

void zero(TbcnnParams& p) {
  for (auto& t : p.tensors()) std::fill(t.data.begin(), t.data.end(), 0.0);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for double is available, but strtod keeps older toolchains happy.
    char* end = nullptr;
    out = std::strtod(first, &end);
    if (end != last || value.empty()) throw UsageError("bad value for " + key + ": " + value);
  } else {
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) throw UsageError("bad value for " + key + ": " + value);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw UsageError("bad boolean for " + key + ": " + value);
}

const char* init_name(InitMode m) {
  switch (m) {
    case InitMode::Random: return "random";
    case InitMode::Pretrained: return "pretrained";
    case InitMode::Zero: return "zero";
  }
  return "random";
}

std::vector<BowVector> bows_for(const LabeledDataset& ds, const ModelShape& shape) {
  std::vector<BowVector> out;
  if (shape.bow_dim == 0) return out;
  out.reserve(ds.trees.size());
  for (const auto& t : ds.trees) out.push_back(bow_features(t.ast, shape.bow_dim));
  return out;
}

double mean_cost(const TbcnnParams& params, const LabeledDataset& ds, std::span<const int> indices,
                 const std::vector<BowVector>& bows) {
  if (indices.empty()) return 0.0;
  double total = 0.0;
  for (int i : indices) {
    const BowVector* bow = bows.empty() ? nullptr : &bows[idx(i)];
    total += cross_entropy(forward(ds.trees[idx(i)], params, bow), ds.labels[idx(i)]);
  }
  return total / static_cast<double>(indices.size());
}

void check_config(const TrainConfig& c) {
  if (c.nf < 1 || c.nc < 1 || c.nh < 1) throw UsageError("nf, nc and nh must be positive");
  if (!(c.lr > 0.0)) throw UsageError("learning rate must be positive");
  if (c.momentum < 0.0 || c.momentum >= 1.0) throw UsageError("momentum must be in [0, 1)");
  if (c.l2 < 0.0) throw UsageError("l2 must be non-negative");
  if (c.epochs < 0) throw UsageError("epochs must be non-negative");
  if (c.patience < 0) throw UsageError("patience must be non-negative");
  if (!(c.pool_k > 0.0)) throw UsageError("pool_k must be positive");
  if (c.init_scale < 0.0) throw UsageError("init_scale must be non-negative");
}

}  // namespace

LabeledDataset make_dataset(std::span<const LabeledTree> samples, SymbolVocab vocab,
                            UnknownSymbols policy, std::string provenance, std::optional<int> n_classes) {
  if (samples.empty()) throw DataError("dataset is empty");
  LabeledDataset ds;
  int max_label = 0;
  for (const auto& s : samples) {
    if (s.label < 0) throw DataError("negative label");
    max_label = std::max(max_label, s.label);
  }
  ds.n_classes = n_classes.value_or(max_label + 1);
  if (max_label >= ds.n_classes)
    throw DataError("label " + std::to_string(max_label) + " outside [0, " + std::to_string(ds.n_classes) + ")");
  ds.trees.reserve(samples.size());
  ds.labels.reserve(samples.size());
  for (const auto& s : samples) {
    ds.trees.push_back(annotate(intern_tree(s.tree, vocab, policy)));
    ds.labels.push_back(s.label);
  }
  ds.vocab = std::move(vocab);
  ds.provenance = std::move(provenance);
  return ds;
}

LabeledDataset make_dataset(std::span<const LabeledTree> samples, std::string provenance) {
  return make_dataset(samples, build_vocab(samples), UnknownSymbols::Reject, std::move(provenance));
}

SplitSpec split_dataset(const LabeledDataset& ds, std::uint64_t seed) {
  const int n = ds.size();
  if (n < 5) throw DataError("need at least 5 samples to split 60/20/20");
  SplitSpec split;
  split.seed = seed;
  SeededRng rng(seed);

  std::vector<std::vector<int>> by_class(idx(ds.n_classes));
  for (int i = 0; i < n; ++i) by_class[idx(ds.labels[idx(i)])].push_back(i);

  const int train_total = (6 * n + 5) / 10;  // round(0.6 n)
  const int cv_total = (2 * n + 5) / 10;     // round(0.2 n)

  const bool tiny = std::any_of(by_class.begin(), by_class.end(),
                                [](const auto& c) { return !c.empty() && c.size() < 3; });
  if (tiny) {
    log_message(LogLevel::Warn, "split: a class has fewer than 3 samples; using an unstratified split");
    split.stratified = false;
    std::vector<int> all(idx(n));
    for (int i = 0; i < n; ++i) all[idx(i)] = i;
    rng.shuffle(all);
    split.train.assign(all.begin(), all.begin() + train_total);
    split.cv.assign(all.begin() + train_total, all.begin() + train_total + cv_total);
    split.test.assign(all.begin() + train_total + cv_total, all.end());
  } else {
    // Per-class quotas: floors of the exact shares, then largest remainders
    // (ties to the lower class id) until the global totals are met.
    const auto quotas = [&](int tenths, int total, const std::vector<int>& cap) {
      std::vector<int> q(by_class.size());
      std::vector<std::pair<int, int>> remainders;  // (-remainder, class)
      int assigned = 0;
      for (std::size_t c = 0; c < by_class.size(); ++c) {
        const int size = static_cast<int>(by_class[c].size());
        q[c] = std::min(tenths * size / 10, cap[c]);
        assigned += q[c];
        if (q[c] < cap[c]) remainders.emplace_back(-(tenths * size % 10), static_cast<int>(c));
      }
      std::sort(remainders.begin(), remainders.end());
      for (const auto& [neg_rem, c] : remainders) {
        if (assigned >= total) break;
        ++q[idx(c)];
        ++assigned;
      }
      return q;
    };
    std::vector<int> caps(by_class.size());
    for (std::size_t c = 0; c < by_class.size(); ++c) caps[c] = static_cast<int>(by_class[c].size());
    const auto train_q = quotas(6, train_total, caps);
    for (std::size_t c = 0; c < by_class.size(); ++c) caps[c] -= train_q[c];
    const auto cv_q = quotas(2, cv_total, caps);

    for (std::size_t c = 0; c < by_class.size(); ++c) {
      auto members = by_class[c];
      rng.shuffle(members);
      const auto tr = static_cast<std::ptrdiff_t>(train_q[c]);
      const auto cv = static_cast<std::ptrdiff_t>(cv_q[c]);
      split.train.insert(split.train.end(), members.begin(), members.begin() + tr);
      split.cv.insert(split.cv.end(), members.begin() + tr, members.begin() + tr + cv);
      split.test.insert(split.test.end(), members.begin() + tr + cv, members.end());
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.cv.begin(), split.cv.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

TrainConfig parse_train_config(std::string_view text, TrainConfig c) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key == "nf") c.nf = parse_number<int>(key, value);
    else if (key == "nc") c.nc = parse_number<int>(key, value);
    else if (key == "nh") c.nh = parse_number<int>(key, value);
    else if (key == "lr") c.lr = parse_number<double>(key, value);
    else if (key == "momentum") c.momentum = parse_number<double>(key, value);
    else if (key == "l2") c.l2 = parse_number<double>(key, value);
    else if (key == "epochs") c.epochs = parse_number<int>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "split_seed") c.split_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "patience") c.patience = parse_number<int>(key, value);
    else if (key == "pool_k") c.pool_k = parse_number<double>(key, value);
    else if (key == "init_scale") c.init_scale = parse_number<double>(key, value);
    else if (key == "bow") c.bow = parse_bool(key, value);
    else if (key == "init") {
      if (value == "random") c.init = InitMode::Random;
      else if (value == "pretrained") c.init = InitMode::Pretrained;
      else if (value == "zero") c.init = InitMode::Zero;
      else throw UsageError("init must be random, pretrained or zero");
    } else {
      throw UsageError("unknown config key: " + key);
    }
  }
  check_config(c);
  return c;
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "nf = " << c.nf << "\nnc = " << c.nc << "\nnh = " << c.nh << "\nlr = " << c.lr
      << "\nmomentum = " << c.momentum << "\nl2 = " << c.l2 << "\nepochs = " << c.epochs
      << "\nseed = " << c.seed << "\nsplit_seed = " << c.split_seed << "\ninit = " << init_name(c.init)
      << "\nbow = " << (c.bow ? "true" : "false") << "\npatience = " << c.patience
      << "\npool_k = " << c.pool_k << "\ninit_scale = " << c.init_scale << "\n";
  return out.str();
}

ModelShape model_shape_for(const LabeledDataset& ds, const TrainConfig& config) {
  ModelShape s;
  s.vocab_rows = ds.vocab.table_rows();
  s.nf = config.nf;
  s.nc = config.nc;
  s.nh = config.nh;
  s.n_classes = std::max(ds.n_classes, 2);
  s.bow_dim = config.bow ? ds.vocab.table_rows() : 0;
  s.pool_k = config.pool_k;
  return s;
}

TbcnnParams initialize_params(const ModelShape& shape, const TrainConfig& config,
                              const SymbolVocab& vocab, const EmbeddingCheckpoint* pretrained) {
  TbcnnParams p = TbcnnParams::zeros(shape);
  if (config.init == InitMode::Zero) return p;
  if (vocab.table_rows() != shape.vocab_rows) throw UsageError("vocabulary does not match the model shape");

  SeededRng rng(config.seed);
  const double s = config.init_scale;
  fill_uniform(p.emb.vectors.data(), s, rng);
  fill_uniform(p.coding.left.data(), s, rng);
  fill_uniform(p.coding.right.data(), s, rng);
  fill_uniform(p.conv_top.data(), s, rng);
  fill_uniform(p.conv_left.data(), s, rng);
  fill_uniform(p.conv_right.data(), s, rng);
  fill_uniform(p.hidden.data(), s, rng);
  fill_uniform(p.output.data(), s, rng);
  p.emb.reset_unknown_to_mean();
  p.comb_self = Matrix::identity(static_cast<std::size_t>(shape.nf));
  p.comb_coded = Matrix::identity(static_cast<std::size_t>(shape.nf));

  if (config.init == InitMode::Pretrained) {
    if (pretrained == nullptr) throw UsageError("pretrained init requested without embeddings");
    if (pretrained->model.emb.dim() != shape.nf)
      throw DataError("pretrained embeddings have nf = " + std::to_string(pretrained->model.emb.dim()) +
                      ", model expects " + std::to_string(shape.nf));
    const auto& src = pretrained->model.emb;
    const int src_unknown = pretrained->vocab.unknown_id();
    int missing = 0;
    for (int id = 0; id < vocab.table_rows(); ++id) {
      int from = src_unknown;
      if (id < vocab.size()) {
        if (auto found = pretrained->vocab.find(vocab.symbol(id))) from = *found;
        else ++missing;
      }
      const auto row = src[from];
      std::copy(row.begin(), row.end(), p.emb[id].begin());
    }
    if (missing > 0)
      log_message(LogLevel::Warn, std::to_string(missing) + " symbols missing from the pretrained table; using <UNK>");
    p.coding = pretrained->model.coding;
  }
  return p;
}

TrainResult train(const LabeledDataset& ds, const SplitSpec& split, const TrainConfig& config,
                  const EmbeddingCheckpoint* pretrained) {
  check_config(config);
  if (split.train.empty()) throw DataError("training split is empty");
  const ModelShape shape = model_shape_for(ds, config);
  TrainResult result{initialize_params(shape, config, ds.vocab, pretrained), {}, 0};
  if (config.epochs == 0) return result;

  const auto bows = bows_for(ds, shape);
  TbcnnParams params = result.params;
  TbcnnParams grads = TbcnnParams::zeros(shape);
  MomentumState momentum;
  SeededRng order_rng = SeededRng::for_worker(config.seed, kShuffleStream);
  const SgdOptions sgd{config.lr, config.momentum, config.l2};
  std::vector<int> order = split.train;

  double best_cv = 0.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (int i : order) {
      const BowVector* bow = bows.empty() ? nullptr : &bows[idx(i)];
      const ForwardTrace trace = forward(ds.trees[idx(i)], params, bow);
      const double cost = cross_entropy(trace, ds.labels[idx(i)]);
      if (!std::isfinite(cost))
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
      zero(grads);
      backward(ds.trees[idx(i)], trace, ds.labels[idx(i)], params, grads);
      const auto refs = params.tensors();
      const auto grefs = std::as_const(grads).tensors();
      if (!sgd_momentum_step(refs, grefs, momentum, sgd))
        throw NumericError("training diverged: non-finite gradient at epoch " + std::to_string(epoch));
    }

    const CurvePoint point{epoch, mean_cost(params, ds, split.train, bows),
                           mean_cost(params, ds, split.cv, bows)};
    if (!std::isfinite(point.train_cost) || !std::isfinite(point.cv_cost))
      throw NumericError("training diverged: non-finite cost after epoch " + std::to_string(epoch));
    result.curve.push_back(point);
    log_message(LogLevel::Info, "epoch " + std::to_string(epoch) + " train " +
                                    std::to_string(point.train_cost) + " cv " + std::to_string(point.cv_cost));

    if (result.best_epoch == 0 || point.cv_cost < best_cv) {
      best_cv = point.cv_cost;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      log_message(LogLevel::Info, "early stop after epoch " + std::to_string(epoch));
      break;
    }
  }
  return result;
}

Metrics evaluate(const TbcnnParams& params, const LabeledDataset& ds, std::span<const int> indices) {
  if (indices.empty()) throw UsageError("evaluate: empty index list");
  const int k = params.shape.n_classes;
  if (ds.n_classes > k) throw UsageError("dataset has more classes than the model");
  if (ds.vocab.table_rows() != params.shape.vocab_rows)
    throw UsageError("dataset vocabulary does not match the model");
  const auto bows = bows_for(ds, params.shape);

  Metrics m;
  m.count = static_cast<int>(indices.size());
  m.confusion.assign(idx(k), std::vector<int>(idx(k), 0));
  int wrong = 0;
  double total = 0.0;
  for (int i : indices) {
    if (i < 0 || i >= ds.size()) throw UsageError("evaluate: index out of range");
    const BowVector* bow = bows.empty() ? nullptr : &bows[idx(i)];
    const ForwardTrace trace = forward(ds.trees[idx(i)], params, bow);
    const auto& p = trace.probabilities;
    const int predicted = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    const int label = ds.labels[idx(i)];
    ++m.confusion[idx(label)][idx(predicted)];
    if (predicted != label) ++wrong;
    total += cross_entropy(trace, label);
  }
  m.error_rate = 100.0 * wrong / static_cast<double>(m.count);
  m.mean_cost = total / static_cast<double>(m.count);
  return m;
}

std::string format_metrics_json(const Metrics& m, std::string_view split_name) {
  detail::ordered_json doc;
  doc["split"] = split_name;
  doc["count"] = m.count;
  doc["error_rate"] = m.error_rate;
  doc["accuracy"] = 100.0 - m.error_rate;
  doc["mean_cross_entropy"] = m.mean_cost;
  doc["confusion"] = m.confusion;
  return doc.dump();
}

std::string format_curve(std::span<const CurvePoint> curve) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "epoch\ttrain_cost\tcv_cost\n";
  for (const auto& p : curve) out << p.epoch << '\t' << p.train_cost << '\t' << p.cv_cost << '\n';
  return out.str();
}

std::string format_model(const ModelCheckpoint& ckpt) {
  const ModelShape& s = ckpt.params.shape;
  detail::ordered_json doc;
  doc["format"] = "tbcnn-model";
  doc["version"] = 1;
  doc["hyper"] = {{"vocab_rows", s.vocab_rows}, {"nf", s.nf},           {"nc", s.nc},
                  {"nh", s.nh},                 {"n_classes", s.n_classes}, {"pool_k", s.pool_k},
                  {"bow_dim", s.bow_dim}};
  doc["vocab"] = ckpt.vocab.symbols();
  doc["split_seed"] = ckpt.split_seed;
  if (ckpt.recorded) {
    doc["recorded"] = {{"best_epoch", ckpt.recorded->best_epoch},
                       {"cv_error", ckpt.recorded->cv_error},
                       {"cv_cost", ckpt.recorded->cv_cost}};
  }
  detail::ordered_json tensors;
  for (const auto& t : ckpt.params.tensors())
    tensors[std::string(t.name)] = std::vector<double>(t.data.begin(), t.data.end());
  doc["tensors"] = std::move(tensors);
  return doc.dump() + "\n";
}

ModelCheckpoint parse_model(std::string_view text) {
  using namespace detail;
  const json doc = parse_document(text, "tbcnn-model", 1);
  ModelCheckpoint out;
  out.vocab = vocab_from_json(field(doc, "vocab"));
  const json& hyper = field(doc, "hyper");
  ModelShape s;
  s.vocab_rows = positive_int(hyper, "vocab_rows");
  s.nf = positive_int(hyper, "nf");
  s.nc = positive_int(hyper, "nc");
  s.nh = positive_int(hyper, "nh");
  s.n_classes = positive_int(hyper, "n_classes");
  s.bow_dim = positive_int(hyper, "bow_dim");
  if (!field(hyper, "pool_k").is_number()) throw DataError("bad value for pool_k");
  s.pool_k = hyper["pool_k"].get<double>();
  if (s.vocab_rows != out.vocab.table_rows()) throw DataError("vocab_rows does not match the vocabulary");
  try {
    out.params = TbcnnParams::zeros(s);
  } catch (const UsageError& e) {
    throw DataError(std::string("invalid model shape: ") + e.what());
  }
  const json& split_seed = field(doc, "split_seed");
  if (!split_seed.is_number_unsigned() && !split_seed.is_number_integer()) throw DataError("bad split_seed");
  out.split_seed = split_seed.get<std::uint64_t>();
  if (doc.contains("recorded")) {
    const json& r = doc["recorded"];
    out.recorded = RecordedMetrics{positive_int(r, "best_epoch"), field(r, "cv_error").get<double>(),
                                   field(r, "cv_cost").get<double>()};
  }
  const json& tensors = field(doc, "tensors");
  for (auto& t : out.params.tensors()) {
    const std::string name(t.name);
    const Vector values = vector_from_json(field(tensors, name.c_str()), t.data.size(), name.c_str());
    std::copy(values.begin(), values.end(), t.data.begin());
  }
  return out;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path) {
  write_file(path, format_model(ckpt));
}

ModelCheckpoint load_checkpoint(const std::string& path) { return parse_model(read_file(path)); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw DataError("error reading " + path);
  return buf.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("error writing " + path);
}

}  // namespace tbcnn
