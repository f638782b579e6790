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

#ifndef TBCNN_DATAGEN_HPP
#define TBCNN_DATAGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tbcnn/ast.hpp"

namespace tbcnn {

// Synthetic program-like trees. Every tree is a `Compound` root holding a
// sequence of statements; one or two of them are a class motif:
//
//   Outer( Inner(e, e), Third(e), e )   -- inner nest on the left
//   Outer( e, Third(e), Inner(e, e) )   -- inner nest on the right
//
// where Outer/Inner is an ordered pair of distinct kinds from {For, If, While},
// Third is the remaining kind and `e` are small expression subtrees. Class c uses motif_variant(c). All
// variants contain the same multiset of control kinds, so in count-matched
// mode the class is carried by shape alone.
struct GenConfig {
  int n_classes = 4;
  int per_class = 50;
  bool count_matched = false;
  int min_size = 20;
  int max_size = 40;
  // Probability that a sample carries the motif of a uniformly drawn class
  // (possibly its own) instead of its class motif.
  double ambiguity = 0.0;
  std::uint64_t seed = 1;
};

struct MotifVariant {
  std::string outer;
  std::string inner;
  bool inner_first = true;
};

inline constexpr int kMaxGenClasses = 12;

MotifVariant motif_variant(int label);

struct GeneratedCorpus {
  std::vector<LabeledTree> samples;
  // In count-matched mode, samples of one group share a symbol multiset and
  // hold one sample per class. Otherwise every sample is its own group.
  std::vector<int> group;
};

// Throws UsageError for infeasible configurations.
GeneratedCorpus generate_corpus(const GenConfig& config);

// Alphabet the generator draws from.
const std::vector<std::string>& generator_alphabet();

}  // namespace tbcnn

#endif  // TBCNN_DATAGEN_HPP
