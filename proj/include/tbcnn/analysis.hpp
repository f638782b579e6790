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

#ifndef TBCNN_ANALYSIS_HPP
#define TBCNN_ANALYSIS_HPP

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tbcnn/numerics.hpp"

namespace tbcnn {

// Euclidean distances between the rows of `points`. Needs >= 2 rows.
Matrix pairwise_distances(const Matrix& points);

enum class Linkage { Average, Single, Complete };

Linkage parse_linkage(std::string_view name);
const char* to_string(Linkage linkage);

// Clusters are numbered scipy-style: leaves 0..n-1, merge i creates n + i.
// `left` is the side holding the smaller leaf id.
struct Merge {
  int left = 0;
  int right = 0;
  double distance = 0.0;
  int size = 0;

  bool operator==(const Merge&) const = default;
};

struct Dendrogram {
  int leaves = 0;
  std::vector<Merge> merges;

  bool operator==(const Dendrogram&) const = default;
};

// Bottom-up agglomerative clustering. Linkage values are always computed from
// the original distance matrix: for average linkage, the sum over member
// pairs (a ascending, b ascending; the cluster with the smaller leaf first)
// divided by |A||B|. Ties go to the lexicographically smallest pair of
// smallest leaf ids.
Dendrogram agglomerative_cluster(const Matrix& distances, Linkage linkage = Linkage::Average);

// The k nearest other rows to `query`, ascending by distance, ties by id.
// Throws UsageError when k >= rows or query is out of range.
std::vector<std::pair<int, double>> nearest_neighbors(const Matrix& points, int query, int k);

enum class DendrogramFormat { Nested, Newick };

DendrogramFormat parse_dendrogram_format(std::string_view name);

// Nested: JSON {"leaves": n, "root": node} where a node is either
//   {"leaf": id, "symbol": name} or
//   {"merge": i, "distance": d, "size": s, "children": [node, node]}.
// Newick: leaves by (quoted) name, internal nodes labelled m<i> with an NHX
// comment carrying the exact merge distance; branch lengths are height gaps.
std::string export_dendrogram(const Dendrogram& d, std::span<const std::string> labels,
                              DendrogramFormat format);

// Inverse of export_dendrogram; restores the merge list in merge order.
Dendrogram parse_dendrogram(std::string_view text, std::span<const std::string> labels,
                            DendrogramFormat format);

// Header row of labels, then one row per label.
std::string distance_matrix_csv(const Matrix& distances, std::span<const std::string> labels);

}  // namespace tbcnn

#endif  // TBCNN_ANALYSIS_HPP
