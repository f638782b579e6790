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

// Command-line front end. Talks to the toolkit only through tbcnn.h.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tbcnn/tbcnn.h"

namespace {

// Carries an exit status out of a subcommand.
struct Exit {
  int code;
};

void check(tbcnn_status s) {
  if (s == TBCNN_OK) return;
  std::cerr << "tbcnn: " << tbcnn_last_error() << "\n";
  throw Exit{static_cast<int>(s)};
}

struct StringDeleter {
  void operator()(char* s) const { tbcnn_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

template <typename T, void (*Free)(T*)>
struct HandleDeleter {
  void operator()(T* p) const { Free(p); }
};
using Dataset = std::unique_ptr<tbcnn_dataset, HandleDeleter<tbcnn_dataset, tbcnn_dataset_free>>;
using Embeddings = std::unique_ptr<tbcnn_embeddings, HandleDeleter<tbcnn_embeddings, tbcnn_embeddings_free>>;
using Model = std::unique_ptr<tbcnn_model, HandleDeleter<tbcnn_model, tbcnn_model_free>>;
using Baseline = std::unique_ptr<tbcnn_baseline, HandleDeleter<tbcnn_baseline, tbcnn_baseline_free>>;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "tbcnn: cannot open " << path << "\n";
    throw Exit{TBCNN_ERR_DATA};
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::string& path, const char* text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) {
    std::cerr << "tbcnn: cannot write " << path << "\n";
    throw Exit{TBCNN_ERR_DATA};
  }
}

Dataset load_dataset(const std::string& path) {
  tbcnn_dataset* ds = nullptr;
  check(tbcnn_dataset_load(path.c_str(), &ds));
  return Dataset(ds);
}

void print_metrics(const char* label, const tbcnn_metrics& m) {
  std::printf("%s: n=%d error=%.2f%% accuracy=%.2f%% mean_cost=%.6f\n", label, m.count, m.error_rate,
              100.0 - m.error_rate, m.mean_cost);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-based convolutional networks over program ASTs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tbcnn_version());

  // gen
  tbcnn_gen_options gen;
  tbcnn_gen_options_init(&gen);
  bool count_matched = false;
  std::string gen_out;
  auto* cmd_gen = app.add_subcommand("gen", "Generate a synthetic labeled corpus");
  cmd_gen->add_option("--classes", gen.n_classes, "Number of classes (2-12)")->capture_default_str();
  cmd_gen->add_option("--per-class", gen.per_class, "Samples per class")->capture_default_str();
  cmd_gen->add_flag("--count-matched", count_matched, "Groups share one symbol multiset");
  cmd_gen->add_option("--min-size", gen.min_size, "Minimum tree size")->capture_default_str();
  cmd_gen->add_option("--max-size", gen.max_size, "Maximum tree size")->capture_default_str();
  cmd_gen->add_option("--ambiguity", gen.ambiguity, "Probability of a randomly drawn class motif")
      ->capture_default_str();
  cmd_gen->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  cmd_gen->add_option("--out", gen_out, "Dataset file to write")->required();

  // pretrain
  tbcnn_pretrain_options pre;
  tbcnn_pretrain_options_init(&pre);
  std::string pre_data, pre_out, pre_loss_out;
  auto* cmd_pre = app.add_subcommand("pretrain", "Pretrain symbol embeddings with the coding criterion");
  cmd_pre->add_option("--data", pre_data, "Dataset file")->required();
  cmd_pre->add_option("--nf", pre.nf, "Embedding dimension")->capture_default_str();
  cmd_pre->add_option("--margin", pre.margin, "Hinge margin")->capture_default_str();
  cmd_pre->add_option("--lr", pre.lr, "Learning rate")->capture_default_str();
  cmd_pre->add_option("--epochs", pre.epochs, "Epochs")->capture_default_str();
  cmd_pre->add_option("--seed", pre.seed, "Random seed")->capture_default_str();
  cmd_pre->add_option("--momentum", pre.momentum, "Momentum")->capture_default_str();
  cmd_pre->add_option("--l2", pre.l2, "L2 penalty on the coding weights")->capture_default_str();
  cmd_pre->add_option("--out", pre_out, "Embedding checkpoint to write")->required();
  cmd_pre->add_option("--loss-out", pre_loss_out, "Per-epoch loss file");

  // train
  std::string tr_data, tr_config, tr_init, tr_emb, tr_out, tr_curve;
  bool tr_bow = false;
  auto* cmd_train = app.add_subcommand("train", "Train a TBCNN classifier");
  cmd_train->add_option("--data", tr_data, "Dataset file")->required();
  cmd_train->add_option("--config", tr_config, "Config file (key = value lines)");
  cmd_train->add_option("--init", tr_init, "Initialization")
      ->check(CLI::IsMember({"random", "pretrained", "zero"}));
  cmd_train->add_option("--embeddings", tr_emb, "Embedding checkpoint for --init pretrained");
  auto* bow_flag = cmd_train->add_flag("--bow", tr_bow, "Append bag-of-words counts to the hidden input");
  cmd_train->add_option("--out", tr_out, "Model checkpoint to write")->required();
  cmd_train->add_option("--curve-out", tr_curve, "Learning curve (TSV) to write");

  // eval
  std::string ev_model, ev_data, ev_split = "test", ev_report;
  bool ev_json = false;
  auto* cmd_eval = app.add_subcommand("eval", "Evaluate a model on a split of a dataset");
  cmd_eval->add_option("--model", ev_model, "Model checkpoint")->required();
  cmd_eval->add_option("--data", ev_data, "Dataset file")->required();
  cmd_eval->add_option("--split", ev_split, "Split to evaluate")
      ->check(CLI::IsMember({"train", "cv", "test", "all"}))
      ->capture_default_str();
  cmd_eval->add_option("--report", ev_report, "Write the metrics document (JSON) here");
  cmd_eval->add_flag("--json", ev_json, "Print the metrics document instead of text");

  // predict
  std::string pr_model, pr_ast;
  auto* cmd_predict = app.add_subcommand("predict", "Class probabilities for one AST document");
  cmd_predict->add_option("--model", pr_model, "Model checkpoint")->required();
  cmd_predict->add_option("--ast", pr_ast, "AST interchange document")->required();

  // cluster
  std::string cl_emb, cl_linkage = "average", cl_format = "nested", cl_out, cl_neighbors;
  int cl_k = 5;
  auto* cmd_cluster = app.add_subcommand("cluster", "Hierarchical clustering of symbol embeddings");
  cmd_cluster->add_option("--embeddings", cl_emb, "Embedding checkpoint")->required();
  cmd_cluster->add_option("--linkage", cl_linkage, "Linkage")
      ->check(CLI::IsMember({"average", "single", "complete"}))
      ->capture_default_str();
  cmd_cluster->add_option("--format", cl_format, "Dendrogram format")
      ->check(CLI::IsMember({"nested", "newick"}))
      ->capture_default_str();
  cmd_cluster->add_option("--out", cl_out, "Write the dendrogram here instead of stdout");
  cmd_cluster->add_option("--neighbors", cl_neighbors, "Print the nearest symbols to this one instead");
  cmd_cluster->add_option("-k", cl_k, "Neighbour count for --neighbors")->capture_default_str();

  // baseline
  tbcnn_baseline_options bl;
  tbcnn_baseline_options_init(&bl);
  std::string bl_data, bl_method = "lr", bl_out, bl_report;
  auto* cmd_base = app.add_subcommand("baseline", "Bag-of-words linear baseline");
  cmd_base->add_option("--data", bl_data, "Dataset file")->required();
  cmd_base->add_option("--method", bl_method, "Classifier")
      ->check(CLI::IsMember({"lr", "svm"}))
      ->capture_default_str();
  cmd_base->add_option("--lr", bl.lr, "Learning rate")->capture_default_str();
  cmd_base->add_option("--l2", bl.l2, "L2 penalty")->capture_default_str();
  cmd_base->add_option("--epochs", bl.epochs, "Epochs")->capture_default_str();
  cmd_base->add_option("--seed", bl.seed, "Random seed")->capture_default_str();
  cmd_base->add_option("--split-seed", bl.split_seed, "Split seed")->capture_default_str();
  cmd_base->add_option("--out", bl_out, "Baseline checkpoint to write");
  cmd_base->add_option("--report", bl_report, "Write the metrics document (JSON) here");

  // gradcheck
  std::uint64_t gc_seed = 7;
  int gc_dims = 4;
  bool gc_eta = false;
  auto* cmd_grad = app.add_subcommand("gradcheck", "Finite-difference check of all analytic gradients");
  cmd_grad->add_option("--seed", gc_seed, "First of 5 consecutive seeds")->capture_default_str();
  cmd_grad->add_option("--dims", gc_dims, "Nf = Nc = Nh")->capture_default_str();
  cmd_grad->add_flag("--show-eta", gc_eta, "Also print the convolution weight conventions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return TBCNN_ERR_USAGE;
  }

  try {
    if (*cmd_gen) {
      gen.count_matched = count_matched ? 1 : 0;
      char* text = nullptr;
      check(tbcnn_generate(&gen, &text));
      OwnedString owned(text);
      write_text(gen_out, text);
      std::printf("wrote %d samples (%d classes) to %s\n", gen.n_classes * gen.per_class, gen.n_classes,
                  gen_out.c_str());
    } else if (*cmd_pre) {
      auto ds = load_dataset(pre_data);
      tbcnn_embeddings* emb = nullptr;
      char* losses = nullptr;
      check(tbcnn_pretrain(ds.get(), &pre, &emb, &losses));
      Embeddings owned(emb);
      OwnedString loss_text(losses);
      check(tbcnn_embeddings_save(emb, pre_out.c_str()));
      if (!pre_loss_out.empty()) write_text(pre_loss_out, losses);
      std::printf("pretrained %d symbols, nf=%d, %d epochs -> %s\n", tbcnn_dataset_vocab_size(ds.get()), pre.nf,
                  pre.epochs, pre_out.c_str());
    } else if (*cmd_train) {
      auto ds = load_dataset(tr_data);
      const std::string config = tr_config.empty() ? std::string() : read_text(tr_config);
      Embeddings emb;
      if (!tr_emb.empty()) {
        tbcnn_embeddings* e = nullptr;
        check(tbcnn_embeddings_load(tr_emb.c_str(), &e));
        emb.reset(e);
      }
      tbcnn_model* model = nullptr;
      char* curve = nullptr;
      check(tbcnn_train(ds.get(), config.c_str(), tr_init.empty() ? nullptr : tr_init.c_str(),
                        bow_flag->count() > 0 ? 1 : -1, emb.get(), &model, &curve));
      Model owned(model);
      OwnedString curve_text(curve);
      check(tbcnn_model_save(model, tr_out.c_str()));
      if (!tr_curve.empty()) write_text(tr_curve, curve);
      tbcnn_metrics cv{};
      check(tbcnn_evaluate(model, ds.get(), "cv", &cv, nullptr));
      print_metrics("cv", cv);
      std::printf("model -> %s\n", tr_out.c_str());
    } else if (*cmd_eval) {
      tbcnn_model* m = nullptr;
      check(tbcnn_model_load(ev_model.c_str(), &m));
      Model model(m);
      auto ds = load_dataset(ev_data);
      tbcnn_metrics metrics{};
      char* report = nullptr;
      check(tbcnn_evaluate(model.get(), ds.get(), ev_split.c_str(), &metrics, &report));
      OwnedString report_text(report);
      if (!ev_report.empty()) write_text(ev_report, report);
      if (ev_json) {
        std::printf("%s\n", report);
      } else {
        print_metrics(ev_split.c_str(), metrics);
      }
    } else if (*cmd_predict) {
      tbcnn_model* m = nullptr;
      check(tbcnn_model_load(pr_model.c_str(), &m));
      Model model(m);
      const std::string ast = read_text(pr_ast);
      std::vector<double> probs(static_cast<std::size_t>(tbcnn_model_classes(model.get())));
      int n = 0;
      check(tbcnn_predict(model.get(), ast.c_str(), probs.data(), static_cast<int>(probs.size()), &n));
      int best = 0;
      for (int c = 0; c < n; ++c) {
        std::printf("%d\t%.17g\n", c, probs[static_cast<std::size_t>(c)]);
        if (probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(best)]) best = c;
      }
      std::printf("predicted\t%d\n", best);
    } else if (*cmd_cluster) {
      tbcnn_embeddings* e = nullptr;
      check(tbcnn_embeddings_load(cl_emb.c_str(), &e));
      Embeddings emb(e);
      char* text = nullptr;
      if (!cl_neighbors.empty()) {
        check(tbcnn_neighbors(emb.get(), cl_neighbors.c_str(), cl_k, &text));
      } else {
        check(tbcnn_cluster(emb.get(), cl_linkage.c_str(), cl_format.c_str(), &text));
      }
      OwnedString owned(text);
      if (cl_out.empty()) {
        std::fputs(text, stdout);
        if (cl_neighbors.empty()) std::fputc('\n', stdout);
      } else {
        write_text(cl_out, text);
      }
    } else if (*cmd_base) {
      auto ds = load_dataset(bl_data);
      bl.method = bl_method.c_str();
      tbcnn_baseline* b = nullptr;
      tbcnn_metrics test{};
      char* report = nullptr;
      check(tbcnn_baseline_train(ds.get(), &bl, &b, &test, &report));
      Baseline model(b);
      OwnedString report_text(report);
      if (!bl_out.empty()) check(tbcnn_baseline_save(b, bl_out.c_str()));
      if (!bl_report.empty()) write_text(bl_report, report);
      print_metrics((bl_method + " test").c_str(), test);
    } else if (*cmd_grad) {
      if (gc_eta) {
        char* table = nullptr;
        check(tbcnn_eta_table(3, &table));
        OwnedString owned(table);
        std::fputs(table, stdout);
      }
      int passed = 0;
      double worst = 0.0;
      char* report = nullptr;
      check(tbcnn_gradcheck(gc_seed, gc_dims, &passed, &worst, &report));
      OwnedString owned(report);
      std::fputs(report, stdout);
      return passed ? 0 : TBCNN_ERR_NUMERIC;
    }
  } catch (const Exit& e) {
    return e.code;
  }
  return 0;
}
