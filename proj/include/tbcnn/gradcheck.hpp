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

#ifndef TBCNN_GRADCHECK_HPP
#define TBCNN_GRADCHECK_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tbcnn/ast.hpp"
#include "tbcnn/numerics.hpp"

namespace tbcnn {

// Central-difference check of the analytic gradients of the supervised
// cross-entropy (with and without bag-of-words input) and of the pretraining
// hinge. Only loss values are used on the numeric side.
struct GradcheckOptions {
  std::uint64_t seed = 7;
  int dims = 4;          // nf = nc = nh
  int seeds = 5;         // consecutive seeds starting at `seed`
  int instances = 2;     // network trees (and parameter draws) per seed
  int min_nodes = 8;
  int max_nodes = 15;
  int n_classes = 3;
  int vocab = 5;
  double step = 1e-5;
  double tolerance = 1e-4;
  int max_coords = 64;   // tensors larger than this are sampled (>= 20 coords)
};

struct TensorCheck {
  std::string objective;  // "network", "network+bow", "pretrain"
  std::string tensor;
  int coords = 0;
  double max_rel_error = 0.0;
};

struct GradcheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::vector<TensorCheck> checks;
};

// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

// Random tree of `nodes` nodes: node i > 0 hangs under a uniformly chosen
// earlier node; symbols uniform over [0, vocab).
Ast random_tree(int nodes, int vocab, SeededRng& rng);

GradcheckReport run_gradcheck(const GradcheckOptions& options);

std::string format_gradcheck(const GradcheckReport& report, const GradcheckOptions& options);

}  // namespace tbcnn

#endif  // TBCNN_GRADCHECK_HPP
