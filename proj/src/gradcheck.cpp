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

#include "tbcnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "tbcnn/error.hpp"
#include "tbcnn/network.hpp"
#include "tbcnn/pretrain.hpp"

namespace tbcnn {

namespace {

std::vector<std::size_t> coordinates(std::size_t size, int max_coords, SeededRng& rng) {
  std::vector<std::size_t> all(size);
  std::iota(all.begin(), all.end(), 0);
  if (size <= static_cast<std::size_t>(max_coords)) return all;
  rng.shuffle(all);
  all.resize(static_cast<std::size_t>(max_coords));
  return all;
}

// Compares `analytic` against central differences of `loss` over every tensor
// of `params`, folding the results into `worst` (keyed by tensor name).
template <typename Params>
void compare(Params& params, const Params& analytic, const std::function<double()>& loss,
             const GradcheckOptions& opts, SeededRng& rng, std::map<std::string, TensorCheck>& worst,
             const std::string& objective) {
  auto refs = params.tensors();
  const auto grads = analytic.tensors();
  for (std::size_t t = 0; t < refs.size(); ++t) {
    auto& entry = worst[objective + "/" + std::string(refs[t].name)];
    entry.objective = objective;
    entry.tensor = std::string(refs[t].name);
    for (std::size_t i : coordinates(refs[t].data.size(), opts.max_coords, rng)) {
      double& w = refs[t].data[i];
      const double saved = w;
      w = saved + opts.step;
      const double up = loss();
      w = saved - opts.step;
      const double down = loss();
      w = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(grads[t].data[i], numeric));
      ++entry.coords;
    }
  }
}

void fill_all(std::vector<TensorRef> refs, double scale, SeededRng& rng) {
  for (auto& r : refs) fill_uniform(r.data, scale, rng);
}

void check_network(const GradcheckOptions& opts, SeededRng& rng, bool with_bow,
                   std::map<std::string, TensorCheck>& worst) {
  const int nodes = opts.min_nodes + static_cast<int>(rng.below(static_cast<std::uint64_t>(opts.max_nodes - opts.min_nodes + 1)));
  const AnnotatedAst tree = annotate(random_tree(nodes, opts.vocab, rng));
  const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(opts.n_classes)));

  ModelShape shape;
  shape.vocab_rows = opts.vocab + 1;
  shape.nf = shape.nc = shape.nh = opts.dims;
  shape.n_classes = opts.n_classes;
  shape.bow_dim = with_bow ? opts.vocab + 1 : 0;
  TbcnnParams params = TbcnnParams::zeros(shape);
  fill_all(params.tensors(), 0.5, rng);

  std::optional<BowVector> bow;
  if (with_bow) bow = bow_features(tree.ast, shape.bow_dim);
  const BowVector* bow_ptr = bow ? &*bow : nullptr;

  const ForwardTrace trace = forward(tree, params, bow_ptr);
  const TbcnnParams analytic = backward(tree, trace, label, params);
  const auto loss = [&] { return cross_entropy(forward(tree, params, bow_ptr), label); };
  compare(params, analytic, loss, opts, rng, worst, with_bow ? "network+bow" : "network");
}

void check_pretrain(const GradcheckOptions& opts, std::uint64_t seed, std::map<std::string, TensorCheck>& worst) {
  SeededRng rng(seed ^ 0x70726574ULL);
  const int nodes = opts.min_nodes + static_cast<int>(rng.below(static_cast<std::uint64_t>(opts.max_nodes - opts.min_nodes + 1)));
  const AnnotatedAst tree = annotate(random_tree(nodes, opts.vocab, rng));
  const auto samples = extract_samples(std::span<const AnnotatedAst>(&tree, 1));

  PretrainModel model = PretrainModel::zeros(opts.vocab + 1, opts.dims);
  fill_all(model.tensors(), 0.5, rng);
  const double margin = 1.0;
  int checked = 0;
  for (const auto& positive : samples) {
    const PretrainSample negative = negative_sample(positive, opts.vocab, rng);
    PretrainModel analytic = PretrainModel::zeros(opts.vocab + 1, opts.dims);
    const double value = coding_hinge_gradient(positive, negative, model, margin, analytic);
    if (!(value > 0.0)) continue;  // the hinge is flat here
    const auto loss = [&] { return coding_hinge_loss(positive, negative, model, margin); };
    compare(model, std::as_const(analytic), loss, opts, rng, worst, "pretrain");
    if (++checked == 3) break;
  }
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

Ast random_tree(int nodes, int vocab, SeededRng& rng) {
  if (nodes < 1 || vocab < 1) throw UsageError("random_tree needs nodes >= 1 and vocab >= 1");
  std::vector<AstNode> out(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    out[static_cast<std::size_t>(i)].symbol = static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab)));
    if (i > 0) {
      const auto parent = rng.below(static_cast<std::uint64_t>(i));
      out[parent].children.push_back(i);
    }
  }
  return Ast::create(std::move(out), 0);
}

GradcheckReport run_gradcheck(const GradcheckOptions& opts) {
  if (opts.dims < 1 || opts.seeds < 1 || opts.min_nodes < 1 || opts.max_nodes < opts.min_nodes ||
      opts.n_classes < 2 || opts.instances < 1 || opts.vocab < 2 || !(opts.step > 0.0) || opts.max_coords < 20)
    throw UsageError("invalid gradcheck options");
  std::map<std::string, TensorCheck> worst;
  for (int s = 0; s < opts.seeds; ++s) {
    const std::uint64_t seed = opts.seed + static_cast<std::uint64_t>(s);
    SeededRng rng(seed);
    for (int i = 0; i < opts.instances; ++i) {
      check_network(opts, rng, false, worst);
      check_network(opts, rng, true, worst);
    }
    check_pretrain(opts, seed, worst);
  }
  GradcheckReport report;
  report.passed = true;
  for (auto& [key, check] : worst) {
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    if (check.coords == 0 || !(check.max_rel_error < opts.tolerance)) report.passed = false;
    report.checks.push_back(check);
  }
  if (report.checks.empty()) report.passed = false;
  return report;
}

std::string format_gradcheck(const GradcheckReport& report, const GradcheckOptions& opts) {
  std::ostringstream out;
  out << std::scientific;
  out.precision(3);
  for (const auto& c : report.checks) {
    out << (c.max_rel_error < opts.tolerance ? "ok   " : "FAIL ") << c.objective << " " << c.tensor
        << " coords=" << c.coords << " max_rel_err=" << c.max_rel_error << "\n";
  }
  out << (report.passed ? "PASS" : "FAIL") << ", max rel err " << report.max_rel_error
      << (report.passed ? " < " : " >= ") << opts.tolerance << " over " << opts.seeds << " seeds\n";
  return out.str();
}

}  // namespace tbcnn
