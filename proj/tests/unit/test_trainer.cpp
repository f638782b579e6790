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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "tbcnn/datagen.hpp"
#include "tbcnn/error.hpp"
#include "tbcnn/trainer.hpp"

using namespace tbcnn;

namespace {

LabeledDataset small_corpus(int per_class = 10, std::uint64_t seed = 3, int classes = 4) {
  GenConfig g;
  g.n_classes = classes;
  g.per_class = per_class;
  g.min_size = 12;
  g.max_size = 20;
  g.seed = seed;
  const auto corpus = generate_corpus(g);
  return make_dataset(corpus.samples, "test");
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.nf = c.nc = c.nh = 6;
  c.epochs = 4;
  c.lr = 0.05;
  c.init_scale = 0.1;
  return c;
}

double sum_squares(const TbcnnParams& p, bool l2_flag) {
  double s = 0.0;
  for (const auto& t : const_cast<TbcnnParams&>(p).tensors())
    if (t.l2 == l2_flag)
      for (double v : t.data) s += v * v;
  return s;
}

}  // namespace

TEST_CASE("dataset split") {
  const auto ds = small_corpus(10);
  SUBCASE("sizes, disjointness and coverage") {
    const auto split = split_dataset(ds, 5);
    CHECK(split.stratified);
    CHECK(split.train.size() == 24);
    CHECK(split.cv.size() == 8);
    CHECK(split.test.size() == 8);
    std::set<int> all;
    for (const auto* part : {&split.train, &split.cv, &split.test}) all.insert(part->begin(), part->end());
    CHECK(all.size() == 40);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 39);
  }
  SUBCASE("stratified by label") {
    const auto split = split_dataset(ds, 9);
    for (const auto* part : {&split.train, &split.cv, &split.test}) {
      std::map<int, int> per;
      for (int i : *part) ++per[ds.labels[static_cast<std::size_t>(i)]];
      CHECK(per.size() == 4);
      for (auto [label, n] : per) CHECK(n == static_cast<int>(part->size()) / 4);
    }
  }
  SUBCASE("deterministic in the seed") {
    const auto a = split_dataset(ds, 11), b = split_dataset(ds, 11), c = split_dataset(ds, 12);
    CHECK(a.train == b.train);
    CHECK(a.cv == b.cv);
    CHECK(a.test == b.test);
    CHECK(a.train != c.train);
  }
  SUBCASE("tiny datasets") {
    const auto few = small_corpus(1);
    CHECK_THROWS_AS(split_dataset(few, 1), DataError);
    const auto thin = small_corpus(2);  // 2 per class: unstratified fallback
    const auto split = split_dataset(thin, 1);
    CHECK_FALSE(split.stratified);
    CHECK(split.train.size() + split.cv.size() + split.test.size() == 8);
    CHECK_FALSE(split.train.empty());
    CHECK_FALSE(split.cv.empty());
    CHECK_FALSE(split.test.empty());
  }
}

TEST_CASE("config text") {
  const auto c = parse_train_config("# comment\nnf = 12\nlr=0.5\n\ninit = pretrained\nbow = true\nepochs = 3\n");
  CHECK(c.nf == 12);
  CHECK(c.lr == 0.5);
  CHECK(c.init == InitMode::Pretrained);
  CHECK(c.bow);
  CHECK(c.epochs == 3);
  CHECK(c.nc == TrainConfig{}.nc);
  CHECK(parse_train_config(format_train_config(c)).nf == 12);
  const auto again = parse_train_config(format_train_config(c));
  CHECK(format_train_config(again) == format_train_config(c));
  CHECK_THROWS_AS(parse_train_config("nonsense = 1"), UsageError);
  CHECK_THROWS_AS(parse_train_config("nf = abc"), UsageError);
  CHECK_THROWS_AS(parse_train_config("nf"), UsageError);
  CHECK_THROWS_AS(parse_train_config("init = sideways"), UsageError);
}

TEST_CASE("initialization") {
  const auto ds = small_corpus(5);
  TrainConfig c = tiny_config();
  const ModelShape shape = model_shape_for(ds, c);
  CHECK(shape.vocab_rows == ds.vocab.table_rows());
  CHECK(shape.n_classes == 4);

  SUBCASE("zero") {
    c.init = InitMode::Zero;
    const auto p = initialize_params(shape, c, ds.vocab, nullptr);
    CHECK(sum_squares(p, true) + sum_squares(p, false) == 0.0);
  }
  SUBCASE("random stays within scale") {
    const auto p = initialize_params(shape, c, ds.vocab, nullptr);
    for (const auto& t : const_cast<TbcnnParams&>(p).tensors()) {
      if (t.name == "comb_self" || t.name == "comb_coded") continue;
      for (double v : t.data) CHECK(std::abs(v) <= c.init_scale);
    }
    CHECK(p.comb_self == Matrix::identity(static_cast<std::size_t>(c.nf)));
  }
  SUBCASE("pretrained copies by symbol") {
    SymbolVocab other;
    for (int i = ds.vocab.size() - 1; i >= 0; --i) other.intern(ds.vocab.symbol(i));
    EmbeddingCheckpoint ckpt{other, PretrainModel::zeros(other.table_rows(), c.nf), {}};
    SeededRng rng(4);
    for (auto& t : ckpt.model.tensors()) fill_uniform(t.data, 1.0, rng);
    c.init = InitMode::Pretrained;
    const auto p = initialize_params(shape, c, ds.vocab, &ckpt);
    for (int id = 0; id < ds.vocab.size(); ++id) {
      const auto mine = p.emb[id];
      const auto theirs = ckpt.model.emb[*other.find(ds.vocab.symbol(id))];
      CHECK(std::equal(mine.begin(), mine.end(), theirs.begin(), theirs.end()));
    }
    CHECK(p.coding == ckpt.model.coding);
    c.init = InitMode::Random;
    const auto r = initialize_params(shape, c, ds.vocab, nullptr);
    CHECK(r.conv_top == p.conv_top);
    CHECK(r.output == p.output);
    c.init = InitMode::Pretrained;
    CHECK_THROWS_AS(initialize_params(shape, c, ds.vocab, nullptr), UsageError);
  }
}

TEST_CASE("training loop") {
  const auto ds = small_corpus(10);
  const auto split = split_dataset(ds, 1);
  TrainConfig c = tiny_config();

  SUBCASE("zero epochs returns the initial parameters") {
    c.epochs = 0;
    const auto r = train(ds, split, c);
    CHECK(r.best_epoch == 0);
    CHECK(r.curve.empty());
    CHECK(r.params == initialize_params(model_shape_for(ds, c), c, ds.vocab, nullptr));
  }
  SUBCASE("untrained zero model") {
    c.epochs = 0;
    c.init = InitMode::Zero;
    const auto r = train(ds, split, c);
    std::vector<int> all(static_cast<std::size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) all[static_cast<std::size_t>(i)] = i;
    const auto m = evaluate(r.params, ds, all);
    CHECK(m.mean_cost == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(m.error_rate == doctest::Approx(75.0));
    CHECK(m.confusion[1][0] == 10);
  }
  SUBCASE("best epoch bookkeeping") {
    const auto r = train(ds, split, c);
    REQUIRE(r.curve.size() == 4);
    for (int e = 0; e < 4; ++e) CHECK(r.curve[static_cast<std::size_t>(e)].epoch == e + 1);
    const auto best = std::min_element(r.curve.begin(), r.curve.end(),
                                       [](auto& a, auto& b) { return a.cv_cost < b.cv_cost; });
    CHECK(r.best_epoch == best->epoch);
    CHECK(evaluate(r.params, ds, split.cv).mean_cost == doctest::Approx(best->cv_cost).epsilon(1e-12));
    CHECK(evaluate(r.params, ds, split.train).mean_cost ==
          doctest::Approx(r.curve[static_cast<std::size_t>(r.best_epoch - 1)].train_cost).epsilon(1e-12));
  }
  SUBCASE("deterministic") {
    const auto a = train(ds, split, c), b = train(ds, split, c);
    CHECK(a.params == b.params);
    CHECK(format_curve(a.curve) == format_curve(b.curve));
    c.seed = 2;
    CHECK_FALSE(train(ds, split, c).params == a.params);
  }
  SUBCASE("l2 shrinks only flagged tensors") {
    c.epochs = 2;
    const auto free = train(ds, split, c);
    c.l2 = 0.05;
    const auto tight = train(ds, split, c);
    CHECK(sum_squares(tight.params, true) < sum_squares(free.params, true));
  }
  SUBCASE("bag-of-words mode widens the hidden layer") {
    c.bow = true;
    c.epochs = 1;
    const auto r = train(ds, split, c);
    CHECK(r.params.shape.bow_dim == ds.vocab.table_rows());
    CHECK(r.params.hidden.cols() == static_cast<std::size_t>(3 * c.nc + ds.vocab.table_rows()));
  }
  SUBCASE("early stopping") {
    c.epochs = 30;
    c.patience = 2;
    c.lr = 0.5;
    c.init_scale = 0.3;
    const auto r = train(ds, split, c);
    const int ran = static_cast<int>(r.curve.size());
    if (ran < 30) {
      CHECK(ran == r.best_epoch + 2);
      for (int e = r.best_epoch; e < ran; ++e)
        CHECK(r.curve[static_cast<std::size_t>(e)].cv_cost >= r.curve[static_cast<std::size_t>(r.best_epoch - 1)].cv_cost);
    }
    c.patience = 0;
    CHECK(train(ds, split, c).curve.size() == 30);
  }
  SUBCASE("divergence is reported") {
    c.lr = 1e300;
    c.epochs = 2;
    CHECK_THROWS_AS(train(ds, split, c), NumericError);
  }
  SUBCASE("learns the easy corpus") {
    c.epochs = 15;
    c.nf = c.nc = c.nh = 10;
    const auto r = train(ds, split, c);
    CHECK(r.curve.back().train_cost < r.curve.front().train_cost);
  }
}

TEST_CASE("metrics") {
  const auto ds = small_corpus(5);
  TrainConfig c = tiny_config();
  c.init = InitMode::Zero;
  const auto p = initialize_params(model_shape_for(ds, c), c, ds.vocab, nullptr);
  const std::vector<int> idx{0, 1, 2};
  const auto m = evaluate(p, ds, idx);
  CHECK(m.count == 3);
  CHECK_THROWS_AS(evaluate(p, ds, std::vector<int>{}), UsageError);
  CHECK_THROWS_AS(evaluate(p, ds, std::vector<int>{1000}), UsageError);
  const auto json = format_metrics_json(m, "cv");
  CHECK(json.find("\"split\"") != std::string::npos);
  CHECK(json.find("\"confusion\"") != std::string::npos);
  const std::vector<CurvePoint> curve{{1, 0.5, 0.75}};
  CHECK(format_curve(curve).find("epoch\ttrain_cost\tcv_cost") == 0);
}

TEST_CASE("model checkpoints") {
  const auto ds = small_corpus(5);
  const auto split = split_dataset(ds, 7);
  TrainConfig c = tiny_config();
  c.epochs = 2;
  const auto r = train(ds, split, c);
  const auto cv = evaluate(r.params, ds, split.cv);
  ModelCheckpoint ckpt{ds.vocab, r.params, 7, RecordedMetrics{r.best_epoch, cv.error_rate, cv.mean_cost}};

  const std::string text = format_model(ckpt);
  const ModelCheckpoint back = parse_model(text);
  CHECK(back.params == ckpt.params);
  CHECK(back.split_seed == 7);
  CHECK(back.vocab.symbols() == ds.vocab.symbols());
  REQUIRE(back.recorded.has_value());
  CHECK(back.recorded->cv_error == cv.error_rate);
  CHECK(back.recorded->cv_cost == cv.mean_cost);
  CHECK(format_model(back) == text);

  // reloaded model reproduces its recorded metrics
  CHECK(evaluate(back.params, ds, split_dataset(ds, back.split_seed).cv).mean_cost == back.recorded->cv_cost);

  const auto path = (std::filesystem::temp_directory_path() / "tbcnn_test_model.json").string();
  save_checkpoint(ckpt, path);
  CHECK(read_file(path) == text);
  CHECK(load_checkpoint(path).params == ckpt.params);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(parse_model("{}"), DataError);
  CHECK_THROWS_AS(parse_model("not json"), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.json"), DataError);
}

TEST_CASE("identical runs give identical checkpoint bytes") {
  const auto ds = small_corpus(5);
  const auto split = split_dataset(ds, 2);
  TrainConfig c = tiny_config();
  c.epochs = 2;
  const auto a = train(ds, split, c), b = train(ds, split, c);
  CHECK(format_model({ds.vocab, a.params, 2, {}}) == format_model({ds.vocab, b.params, 2, {}}));
}
