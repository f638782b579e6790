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

#include "tbcnn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <tuple>

#include "json_util.hpp"
#include "tbcnn/error.hpp"

namespace tbcnn {

namespace {

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Cluster {
  int id = 0;
  std::vector<int> members;  // ascending leaf ids
};

double linkage_value(const Matrix& d, const Cluster& x, const Cluster& y, Linkage linkage) {
  const Cluster& a = x.members.front() < y.members.front() ? x : y;
  const Cluster& b = &a == &x ? y : x;
  switch (linkage) {
    case Linkage::Single: {
      double best = std::numeric_limits<double>::infinity();
      for (int i : a.members)
        for (int j : b.members) best = std::min(best, d(idx(i), idx(j)));
      return best;
    }
    case Linkage::Complete: {
      double worst = -std::numeric_limits<double>::infinity();
      for (int i : a.members)
        for (int j : b.members) worst = std::max(worst, d(idx(i), idx(j)));
      return worst;
    }
    case Linkage::Average:
      break;
  }
  double sum = 0.0;
  for (int i : a.members)
    for (int j : b.members) sum += d(idx(i), idx(j));
  return sum / (static_cast<double>(a.members.size()) * static_cast<double>(b.members.size()));
}

// --- Newick reader -------------------------------------------------------

class NewickReader {
 public:
  NewickReader(std::string_view text, std::span<const std::string> labels) : text_(text) {
    for (std::size_t i = 0; i < labels.size(); ++i) leaf_ids_[labels[i]] = static_cast<int>(i);
  }

  Dendrogram read() {
    skip_space();
    Dendrogram d;
    d.leaves = static_cast<int>(leaf_ids_.size());
    d.merges.assign(d.leaves > 0 ? idx(d.leaves - 1) : 0, Merge{-1, -1, 0.0, 0});
    filled_.assign(d.merges.size(), 0);
    node(d);
    skip_space();
    expect(';');
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters");
    if (std::find(filled_.begin(), filled_.end(), 0) != filled_.end()) fail("missing merges");
    return d;
  }

 private:
  struct Parsed {
    int cluster;
    int size;
    int smallest_leaf;
  };

  [[noreturn]] void fail(const std::string& why) const {
    throw DataError("newick: " + why + " at offset " + std::to_string(pos_));
  }
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip_space();
    return pos_ < text_.size() && text_[pos_] == c;
  }
  void expect(char c) {
    if (!peek(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string label() {
    skip_space();
    std::string out;
    if (peek('\'')) {
      ++pos_;
      while (true) {
        if (pos_ >= text_.size()) fail("unterminated quote");
        const char c = text_[pos_++];
        if (c == '\'') {
          if (pos_ < text_.size() && text_[pos_] == '\'') {
            out += '\'';
            ++pos_;
          } else {
            break;
          }
        } else {
          out += c;
        }
      }
      return out;
    }
    while (pos_ < text_.size() && std::string_view("(),:;[ \t\r\n").find(text_[pos_]) == std::string_view::npos)
      out += text_[pos_++];
    return out;
  }

  std::string comment() {
    if (!peek('[')) return {};
    const auto end = text_.find(']', pos_);
    if (end == std::string_view::npos) fail("unterminated comment");
    std::string body(text_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return body;
  }

  void branch_length() {
    if (!peek(':')) return;
    ++pos_;
    skip_space();
    const char* begin = text_.data() + pos_;
    char* end = nullptr;
    std::strtod(begin, &end);
    if (end == begin) fail("bad branch length");
    pos_ += static_cast<std::size_t>(end - begin);
  }

  Parsed node(Dendrogram& d) {
    if (peek('(')) {
      ++pos_;
      std::vector<Parsed> kids{node(d)};
      while (peek(',')) {
        ++pos_;
        kids.push_back(node(d));
      }
      expect(')');
      if (kids.size() != 2) fail("internal nodes must have two children");
      const std::string name = label();
      const std::string note = comment();
      branch_length();
      if (name.size() < 2 || name[0] != 'm') fail("internal node without a merge label");
      const int merge = std::atoi(name.c_str() + 1);
      if (merge < 0 || idx(merge) >= d.merges.size() || filled_[idx(merge)]) fail("bad merge label " + name);
      const auto key = note.find("dist=");
      if (key == std::string::npos) fail("merge without a distance");
      const double dist = std::strtod(note.c_str() + key + 5, nullptr);
      if (kids[0].smallest_leaf > kids[1].smallest_leaf) std::swap(kids[0], kids[1]);
      d.merges[idx(merge)] = {kids[0].cluster, kids[1].cluster, dist, kids[0].size + kids[1].size};
      filled_[idx(merge)] = 1;
      return {d.leaves + merge, kids[0].size + kids[1].size, kids[0].smallest_leaf};
    }
    const std::string name = label();
    comment();
    branch_length();
    auto it = leaf_ids_.find(name);
    if (it == leaf_ids_.end()) fail("unknown leaf '" + name + "'");
    return {it->second, 1, it->second};
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::map<std::string, int, std::less<>> leaf_ids_;
  std::vector<char> filled_;
};

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

double height_of(const Dendrogram& d, int cluster) {
  return cluster < d.leaves ? 0.0 : d.merges[idx(cluster - d.leaves)].distance;
}

void write_newick(const Dendrogram& d, std::span<const std::string> labels, int cluster, std::string& out) {
  if (cluster < d.leaves) {
    out += quote(labels[idx(cluster)]);
    return;
  }
  const int merge = cluster - d.leaves;
  const Merge& m = d.merges[idx(merge)];
  out += '(';
  write_newick(d, labels, m.left, out);
  out += ':' + exact(m.distance - height_of(d, m.left)) + ',';
  write_newick(d, labels, m.right, out);
  out += ':' + exact(m.distance - height_of(d, m.right)) + ')';
  out += 'm' + std::to_string(merge) + "[&&NHX:dist=" + exact(m.distance) + "]";
}

detail::ordered_json nested_node(const Dendrogram& d, std::span<const std::string> labels, int cluster) {
  detail::ordered_json node;
  if (cluster < d.leaves) {
    node["leaf"] = cluster;
    node["symbol"] = labels[idx(cluster)];
    return node;
  }
  const Merge& m = d.merges[idx(cluster - d.leaves)];
  node["merge"] = cluster - d.leaves;
  node["distance"] = m.distance;
  node["size"] = m.size;
  node["children"] = {nested_node(d, labels, m.left), nested_node(d, labels, m.right)};
  return node;
}

// Returns (cluster id, smallest leaf).
std::pair<int, int> read_nested(const detail::json& node, Dendrogram& d, std::vector<char>& filled) {
  if (node.contains("leaf")) {
    const int leaf = node["leaf"].get<int>();
    if (leaf < 0 || leaf >= d.leaves) throw DataError("dendrogram leaf out of range");
    return {leaf, leaf};
  }
  const int merge = detail::positive_int(node, "merge");
  if (idx(merge) >= d.merges.size() || filled[idx(merge)]) throw DataError("bad merge index in dendrogram");
  const auto& kids = detail::field(node, "children");
  if (!kids.is_array() || kids.size() != 2) throw DataError("merge nodes need two children");
  auto a = read_nested(kids[0], d, filled);
  auto b = read_nested(kids[1], d, filled);
  if (a.second > b.second) std::swap(a, b);
  const auto size_of = [&](int c) { return c < d.leaves ? 1 : d.merges[idx(c - d.leaves)].size; };
  d.merges[idx(merge)] = {a.first, b.first, detail::field(node, "distance").get<double>(),
                          size_of(a.first) + size_of(b.first)};
  filled[idx(merge)] = 1;
  return {d.leaves + merge, a.second};
}

}  // namespace

Matrix pairwise_distances(const Matrix& points) {
  const std::size_t n = points.rows();
  if (n < 2) throw UsageError("pairwise_distances needs at least two points");
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::sqrt(squared_distance(points.row(i), points.row(j)));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Linkage parse_linkage(std::string_view name) {
  if (name == "average") return Linkage::Average;
  if (name == "single") return Linkage::Single;
  if (name == "complete") return Linkage::Complete;
  throw UsageError("unknown linkage: " + std::string(name));
}

const char* to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::Average: return "average";
    case Linkage::Single: return "single";
    case Linkage::Complete: return "complete";
  }
  return "average";
}

Dendrogram agglomerative_cluster(const Matrix& distances, Linkage linkage) {
  const int n = static_cast<int>(distances.rows());
  if (n < 1 || distances.cols() != distances.rows()) throw UsageError("distance matrix must be square");

  std::vector<Cluster> active;
  for (int i = 0; i < n; ++i) active.push_back({i, {i}});
  // Cached linkage values between active clusters, keyed by cluster id.
  Matrix cache(idx(2 * n), idx(2 * n));
  for (std::size_t a = 0; a < active.size(); ++a)
    for (std::size_t b = a + 1; b < active.size(); ++b)
      cache(idx(active[a].id), idx(active[b].id)) = cache(idx(active[b].id), idx(active[a].id)) =
          linkage_value(distances, active[a], active[b], linkage);

  Dendrogram out;
  out.leaves = n;
  while (active.size() > 1) {
    std::size_t best_a = 0, best_b = 1;
    auto key = [&](std::size_t a, std::size_t b) {
      int la = active[a].members.front(), lb = active[b].members.front();
      if (la > lb) std::swap(la, lb);
      return std::make_tuple(cache(idx(active[a].id), idx(active[b].id)), la, lb);
    };
    auto best = key(0, 1);
    for (std::size_t a = 0; a < active.size(); ++a) {
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        const auto k = key(a, b);
        if (k < best) {
          best = k;
          best_a = a;
          best_b = b;
        }
      }
    }
    Cluster& x = active[best_a];
    Cluster& y = active[best_b];
    const bool x_first = x.members.front() < y.members.front();
    const Cluster& lo = x_first ? x : y;
    const Cluster& hi = x_first ? y : x;

    Cluster merged{n + static_cast<int>(out.merges.size()), {}};
    std::merge(lo.members.begin(), lo.members.end(), hi.members.begin(), hi.members.end(),
               std::back_inserter(merged.members));
    out.merges.push_back({lo.id, hi.id, std::get<0>(best), static_cast<int>(merged.members.size())});

    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_b));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_a));
    for (const auto& other : active)
      cache(idx(merged.id), idx(other.id)) = cache(idx(other.id), idx(merged.id)) =
          linkage_value(distances, merged, other, linkage);
    active.push_back(std::move(merged));
  }
  return out;
}

std::vector<std::pair<int, double>> nearest_neighbors(const Matrix& points, int query, int k) {
  const int n = static_cast<int>(points.rows());
  if (query < 0 || query >= n) throw UsageError("unknown query symbol");
  if (k < 0 || k >= n) throw UsageError("k must be smaller than the number of symbols");
  std::vector<std::pair<int, double>> all;
  for (int i = 0; i < n; ++i)
    if (i != query) all.emplace_back(i, std::sqrt(squared_distance(points.row(idx(i)), points.row(idx(query)))));
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  all.resize(idx(k));
  return all;
}

DendrogramFormat parse_dendrogram_format(std::string_view name) {
  if (name == "nested" || name == "json") return DendrogramFormat::Nested;
  if (name == "newick") return DendrogramFormat::Newick;
  throw UsageError("unsupported dendrogram format: " + std::string(name));
}

std::string export_dendrogram(const Dendrogram& d, std::span<const std::string> labels,
                              DendrogramFormat format) {
  if (labels.size() != idx(d.leaves)) throw UsageError("one label per leaf required");
  if (d.leaves < 1) throw UsageError("empty dendrogram");
  const int root = d.leaves + static_cast<int>(d.merges.size()) - 1;
  if (format == DendrogramFormat::Nested) {
    detail::ordered_json doc;
    doc["leaves"] = d.leaves;
    doc["root"] = nested_node(d, labels, root);
    return doc.dump() + "\n";
  }
  std::string out;
  write_newick(d, labels, root, out);
  return out + ";\n";
}

Dendrogram parse_dendrogram(std::string_view text, std::span<const std::string> labels,
                            DendrogramFormat format) {
  if (format == DendrogramFormat::Newick) return NewickReader(text, labels).read();

  detail::json doc;
  try {
    doc = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    throw DataError(std::string("malformed dendrogram: ") + e.what());
  }
  Dendrogram d;
  d.leaves = detail::positive_int(doc, "leaves");
  if (idx(d.leaves) != labels.size()) throw DataError("dendrogram leaf count does not match labels");
  d.merges.assign(d.leaves > 0 ? idx(d.leaves - 1) : 0, {});
  std::vector<char> filled(d.merges.size(), 0);
  read_nested(detail::field(doc, "root"), d, filled);
  if (std::find(filled.begin(), filled.end(), 0) != filled.end()) throw DataError("dendrogram is missing merges");
  return d;
}

std::string distance_matrix_csv(const Matrix& distances, std::span<const std::string> labels) {
  if (labels.size() != distances.rows()) throw UsageError("one label per row required");
  auto cell = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
  };
  std::string out = "symbol";
  for (const auto& l : labels) out += "," + cell(l);
  out += "\n";
  for (std::size_t i = 0; i < distances.rows(); ++i) {
    out += cell(labels[i]);
    for (std::size_t j = 0; j < distances.cols(); ++j) out += "," + exact(distances(i, j));
    out += "\n";
  }
  return out;
}

}  // namespace tbcnn
