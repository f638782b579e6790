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

#include "tbcnn/tbcnn.h"

#include <cstdlib>
#include <cstring>
#include <iomanip>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "json_util.hpp"
#include "tbcnn/analysis.hpp"
#include "tbcnn/baselines.hpp"
#include "tbcnn/datagen.hpp"
#include "tbcnn/error.hpp"
#include "tbcnn/gradcheck.hpp"
#include "tbcnn/log.hpp"
#include "tbcnn/network.hpp"
#include "tbcnn/pretrain.hpp"
#include "tbcnn/trainer.hpp"

struct tbcnn_dataset {
  std::vector<tbcnn::LabeledTree> samples;  // as read, for re-interning
  tbcnn::LabeledDataset data;               // interned against its own vocab
};

struct tbcnn_embeddings {
  tbcnn::EmbeddingCheckpoint ckpt;
};

struct tbcnn_model {
  tbcnn::ModelCheckpoint ckpt;
};

struct tbcnn_baseline {
  tbcnn::BaselineCheckpoint ckpt;
};

namespace {

thread_local std::string last_error;

tbcnn_status fail(tbcnn_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

// Runs `body`, mapping exceptions onto status codes.
template <typename F>
tbcnn_status guarded(F&& body) {
  last_error.clear();
  try {
    body();
    return TBCNN_OK;
  } catch (const tbcnn::Error& e) {
    return fail(static_cast<tbcnn_status>(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(TBCNN_ERR_DATA, "out of memory");
  } catch (const std::exception& e) {
    return fail(TBCNN_ERR_DATA, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

template <typename T>
void require(const T* p, const char* what) {
  if (!p) throw tbcnn::UsageError(std::string(what) + " is NULL");
}

tbcnn_dataset* make_handle(std::vector<tbcnn::LabeledTree> samples, std::string provenance) {
  auto* h = new tbcnn_dataset;
  h->samples = std::move(samples);
  try {
    h->data = tbcnn::make_dataset(h->samples, std::move(provenance));
  } catch (...) {
    delete h;
    throw;
  }
  return h;
}

// The dataset interned against a checkpoint's vocabulary; unseen symbols map
// to the reserved unknown id.
tbcnn::LabeledDataset reintern(const tbcnn_dataset& ds, const tbcnn::SymbolVocab& vocab, int n_classes) {
  auto out = tbcnn::make_dataset(ds.samples, vocab, tbcnn::UnknownSymbols::MapToUnknown, ds.data.provenance,
                                 n_classes);
  if (out.n_classes != n_classes)
    throw tbcnn::DataError("dataset has labels beyond the model's " + std::to_string(n_classes) + " classes");
  return out;
}

std::vector<int> split_indices(const tbcnn::SplitSpec& split, const tbcnn::LabeledDataset& ds,
                               std::string_view name) {
  if (name == "train") return split.train;
  if (name == "cv") return split.cv;
  if (name == "test") return split.test;
  if (name == "all") {
    std::vector<int> all(static_cast<std::size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  throw tbcnn::UsageError("split must be train, cv, test or all");
}

void fill(tbcnn_metrics* out, const tbcnn::Metrics& m) {
  if (!out) return;
  out->error_rate = m.error_rate;
  out->mean_cost = m.mean_cost;
  out->count = m.count;
}

std::vector<tbcnn::Vector> bow_rows(const tbcnn::LabeledDataset& ds, const std::vector<int>& idx,
                                    std::vector<int>& labels) {
  const int dim = ds.vocab.table_rows();
  std::vector<tbcnn::Vector> rows;
  labels.clear();
  for (int i : idx) {
    rows.push_back(tbcnn::bow_as_vector(tbcnn::bow_features(ds.trees[static_cast<std::size_t>(i)].ast, dim)));
    labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
  }
  return rows;
}

}  // namespace

extern "C" {

const char* tbcnn_version(void) { return "1.0.0"; }

const char* tbcnn_last_error(void) { return last_error.c_str(); }

void tbcnn_string_free(char* s) { std::free(s); }

void tbcnn_set_log_level(int level) {
  if (level < 0) level = 0;
  if (level > 3) level = 3;
  tbcnn::set_log_level(static_cast<tbcnn::LogLevel>(level));
}

void tbcnn_gen_options_init(tbcnn_gen_options* opts) {
  if (!opts) return;
  const tbcnn::GenConfig d;
  *opts = {d.n_classes, d.per_class, d.count_matched ? 1 : 0, d.min_size, d.max_size, d.ambiguity, d.seed};
}

tbcnn_status tbcnn_generate(const tbcnn_gen_options* opts, char** dataset_text) {
  return guarded([&] {
    require(opts, "options");
    require(dataset_text, "output");
    tbcnn::GenConfig c;
    c.n_classes = opts->n_classes;
    c.per_class = opts->per_class;
    c.count_matched = opts->count_matched != 0;
    c.min_size = opts->min_size;
    c.max_size = opts->max_size;
    c.ambiguity = opts->ambiguity;
    c.seed = opts->seed;
    const auto corpus = tbcnn::generate_corpus(c);
    *dataset_text = dup_string(tbcnn::format_dataset(corpus.samples));
  });
}

tbcnn_status tbcnn_dataset_parse(const char* text, tbcnn_dataset** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "output");
    *out = make_handle(tbcnn::parse_dataset(text), "inline");
  });
}

tbcnn_status tbcnn_dataset_load(const char* path, tbcnn_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "output");
    *out = make_handle(tbcnn::parse_dataset(tbcnn::read_file(path)), path);
  });
}

void tbcnn_dataset_free(tbcnn_dataset* ds) { delete ds; }

int tbcnn_dataset_size(const tbcnn_dataset* ds) { return ds ? ds->data.size() : 0; }

int tbcnn_dataset_classes(const tbcnn_dataset* ds) { return ds ? ds->data.n_classes : 0; }

int tbcnn_dataset_vocab_size(const tbcnn_dataset* ds) { return ds ? ds->data.vocab.size() : 0; }

void tbcnn_pretrain_options_init(tbcnn_pretrain_options* opts) {
  if (!opts) return;
  const tbcnn::PretrainConfig d;
  *opts = {d.nf, d.margin, d.lr, d.epochs, d.seed, d.init_scale, d.momentum, d.l2};
}

tbcnn_status tbcnn_pretrain(const tbcnn_dataset* ds, const tbcnn_pretrain_options* opts,
                            tbcnn_embeddings** out, char** epoch_loss) {
  return guarded([&] {
    require(ds, "dataset");
    require(opts, "options");
    require(out, "output");
    tbcnn::PretrainConfig c;
    c.nf = opts->nf;
    c.margin = opts->margin;
    c.lr = opts->lr;
    c.epochs = opts->epochs;
    c.seed = opts->seed;
    c.init_scale = opts->init_scale;
    c.momentum = opts->momentum;
    c.l2 = opts->l2;
    auto result = tbcnn::run_pretrain(ds->data.trees, ds->data.vocab, c);
    auto* h = new tbcnn_embeddings{{ds->data.vocab, std::move(result.model), std::move(result.epoch_loss)}};
    if (epoch_loss) {
      std::ostringstream text;
      text << std::setprecision(17);
      for (double v : h->ckpt.epoch_loss) text << v << '\n';
      try {
        *epoch_loss = dup_string(text.str());
      } catch (...) {
        delete h;
        throw;
      }
    }
    *out = h;
  });
}

tbcnn_status tbcnn_embeddings_load(const char* path, tbcnn_embeddings** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "output");
    *out = new tbcnn_embeddings{tbcnn::parse_embeddings(tbcnn::read_file(path))};
  });
}

tbcnn_status tbcnn_embeddings_save(const tbcnn_embeddings* emb, const char* path) {
  return guarded([&] {
    require(emb, "embeddings");
    require(path, "path");
    tbcnn::write_file(path, tbcnn::format_embeddings(emb->ckpt));
  });
}

void tbcnn_embeddings_free(tbcnn_embeddings* emb) { delete emb; }

namespace {

tbcnn::Matrix symbol_rows(const tbcnn::EmbeddingCheckpoint& ckpt) {
  const int n = ckpt.vocab.size();
  const auto& table = ckpt.model.emb;
  tbcnn::Matrix points(n, table.dim());
  for (int r = 0; r < n; ++r) {
    const auto row = table[r];
    std::copy(row.begin(), row.end(), points.row(r).begin());
  }
  return points;
}

}  // namespace

tbcnn_status tbcnn_cluster(const tbcnn_embeddings* emb, const char* linkage, const char* format, char** out) {
  return guarded([&] {
    require(emb, "embeddings");
    require(out, "output");
    const auto link = tbcnn::parse_linkage(linkage ? linkage : "average");
    const auto fmt = tbcnn::parse_dendrogram_format(format ? format : "nested");
    if (emb->ckpt.vocab.size() < 2) throw tbcnn::DataError("clustering needs at least 2 symbols");
    const auto d = tbcnn::agglomerative_cluster(tbcnn::pairwise_distances(symbol_rows(emb->ckpt)), link);
    *out = dup_string(tbcnn::export_dendrogram(d, emb->ckpt.vocab.symbols(), fmt));
  });
}

tbcnn_status tbcnn_neighbors(const tbcnn_embeddings* emb, const char* symbol, int k, char** out) {
  return guarded([&] {
    require(emb, "embeddings");
    require(symbol, "symbol");
    require(out, "output");
    const auto& vocab = emb->ckpt.vocab;
    const auto id = vocab.find(symbol);
    if (!id) throw tbcnn::UsageError(std::string("unknown symbol: ") + symbol);
    std::ostringstream text;
    text << std::setprecision(17);
    for (const auto& [other, dist] : tbcnn::nearest_neighbors(symbol_rows(emb->ckpt), *id, k))
      text << vocab.symbol(other) << '\t' << dist << '\n';
    *out = dup_string(text.str());
  });
}

tbcnn_status tbcnn_train(const tbcnn_dataset* ds, const char* config_text, const char* init, int bow,
                         const tbcnn_embeddings* embeddings, tbcnn_model** out, char** curve) {
  return guarded([&] {
    require(ds, "dataset");
    require(out, "output");
    tbcnn::TrainConfig c = tbcnn::parse_train_config(config_text ? config_text : "");
    if (init) c = tbcnn::parse_train_config(std::string("init = ") + init, c);
    if (bow == 0 || bow == 1) c.bow = bow == 1;
    else if (bow != -1) throw tbcnn::UsageError("bow must be 0, 1 or -1");
    if (c.init == tbcnn::InitMode::Pretrained && !embeddings)
      throw tbcnn::UsageError("pretrained init needs an embedding checkpoint");
    const tbcnn::EmbeddingCheckpoint* pre = c.init == tbcnn::InitMode::Pretrained ? &embeddings->ckpt : nullptr;

    const auto split = tbcnn::split_dataset(ds->data, c.split_seed);
    auto result = tbcnn::train(ds->data, split, c, pre);
    auto* h = new tbcnn_model;
    h->ckpt.vocab = ds->data.vocab;
    h->ckpt.split_seed = c.split_seed;
    const auto cv = tbcnn::evaluate(result.params, ds->data, split.cv);
    h->ckpt.recorded = tbcnn::RecordedMetrics{result.best_epoch, cv.error_rate, cv.mean_cost};
    h->ckpt.params = std::move(result.params);
    if (curve) {
      try {
        *curve = dup_string(tbcnn::format_curve(result.curve));
      } catch (...) {
        delete h;
        throw;
      }
    }
    *out = h;
  });
}

tbcnn_status tbcnn_model_load(const char* path, tbcnn_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "output");
    *out = new tbcnn_model{tbcnn::load_checkpoint(path)};
  });
}

tbcnn_status tbcnn_model_save(const tbcnn_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    tbcnn::save_checkpoint(model->ckpt, path);
  });
}

void tbcnn_model_free(tbcnn_model* model) { delete model; }

int tbcnn_model_classes(const tbcnn_model* model) { return model ? model->ckpt.params.shape.n_classes : 0; }

tbcnn_status tbcnn_evaluate(const tbcnn_model* model, const tbcnn_dataset* ds, const char* split,
                            tbcnn_metrics* metrics, char** report) {
  return guarded([&] {
    require(model, "model");
    require(ds, "dataset");
    const std::string name = split ? split : "test";
    const auto& ck = model->ckpt;
    const auto data = reintern(*ds, ck.vocab, ck.params.shape.n_classes);
    std::vector<int> idx;
    if (name == "all") {
      idx = split_indices({}, data, name);
    } else {
      idx = split_indices(tbcnn::split_dataset(data, ck.split_seed), data, name);
    }
    const auto m = tbcnn::evaluate(ck.params, data, idx);
    fill(metrics, m);
    emit(report, tbcnn::format_metrics_json(m, name));
  });
}

tbcnn_status tbcnn_predict(const tbcnn_model* model, const char* ast_text, double* probs, int capacity,
                           int* n_classes) {
  return guarded([&] {
    require(model, "model");
    require(ast_text, "AST text");
    if (capacity > 0) require(probs, "probability buffer");
    const auto& ck = model->ckpt;
    tbcnn::SymbolVocab vocab = ck.vocab;
    const auto tree = tbcnn::annotate(tbcnn::load_ast(ast_text, vocab, tbcnn::UnknownSymbols::MapToUnknown));
    std::optional<tbcnn::BowVector> bow;
    if (ck.params.shape.bow_dim > 0) bow = tbcnn::bow_features(tree.ast, ck.params.shape.bow_dim);
    const auto p = tbcnn::predict(tree, ck.params, bow ? &*bow : nullptr);
    const int n = static_cast<int>(p.size());
    for (int i = 0; i < n && i < capacity; ++i) probs[i] = p[static_cast<std::size_t>(i)];
    if (n_classes) *n_classes = n;
  });
}

void tbcnn_baseline_options_init(tbcnn_baseline_options* opts) {
  if (!opts) return;
  const tbcnn::LinearTrainOptions d;
  *opts = {"lr", d.lr, d.l2, d.epochs, d.seed, 1};
}

tbcnn_status tbcnn_baseline_train(const tbcnn_dataset* ds, const tbcnn_baseline_options* opts,
                                  tbcnn_baseline** out, tbcnn_metrics* test_metrics, char** report) {
  return guarded([&] {
    require(ds, "dataset");
    require(opts, "options");
    const std::string method = opts->method ? opts->method : "lr";
    tbcnn::LinearTrainOptions o;
    if (method == "lr") o.loss = tbcnn::LinearLoss::Logistic;
    else if (method == "svm") o.loss = tbcnn::LinearLoss::Hinge;
    else throw tbcnn::UsageError("method must be lr or svm");
    o.lr = opts->lr;
    o.l2 = opts->l2;
    o.epochs = opts->epochs;
    o.seed = opts->seed;

    const auto& data = ds->data;
    const auto split = tbcnn::split_dataset(data, opts->split_seed);
    std::vector<int> labels;
    const auto train_x = bow_rows(data, split.train, labels);
    const auto model = tbcnn::train_linear(train_x, labels, data.n_classes, o);

    tbcnn::detail::ordered_json doc;
    doc["method"] = method;
    tbcnn_metrics test{};
    for (const char* name : {"train", "cv", "test"}) {
      const auto idx = split_indices(split, data, name);
      const auto x = bow_rows(data, idx, labels);
      tbcnn_metrics m{tbcnn::linear_error_rate(model, x, labels), tbcnn::linear_loss(model, x, labels),
                      static_cast<int>(idx.size())};
      doc[name] = {{"count", m.count}, {"error_rate", m.error_rate}, {"accuracy", 100.0 - m.error_rate},
                   {"mean_loss", m.mean_cost}};
      if (std::string_view(name) == "test") test = m;
    }
    if (test_metrics) *test_metrics = test;
    std::unique_ptr<tbcnn_baseline> h;
    if (out) h.reset(new tbcnn_baseline{{data.vocab, model}});
    emit(report, doc.dump());
    if (out) *out = h.release();
  });
}

tbcnn_status tbcnn_baseline_save(const tbcnn_baseline* model, const char* path) {
  return guarded([&] {
    require(model, "baseline");
    require(path, "path");
    tbcnn::write_file(path, tbcnn::format_baseline(model->ckpt));
  });
}

void tbcnn_baseline_free(tbcnn_baseline* model) { delete model; }

tbcnn_status tbcnn_gradcheck(uint64_t seed, int dims, int* passed, double* max_rel_error, char** report) {
  return guarded([&] {
    tbcnn::GradcheckOptions o;
    o.seed = seed;
    o.dims = dims;
    const auto r = tbcnn::run_gradcheck(o);
    if (passed) *passed = r.passed ? 1 : 0;
    if (max_rel_error) *max_rel_error = r.max_rel_error;
    emit(report, tbcnn::format_gradcheck(r, o));
  });
}

tbcnn_status tbcnn_eta_table(int siblings, char** out) {
  return guarded([&] {
    require(out, "output");
    if (siblings < 1) throw tbcnn::UsageError("siblings must be positive");
    *out = dup_string(tbcnn::describe_eta_conventions(siblings));
  });
}

}  // extern "C"
