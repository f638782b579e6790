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

#ifndef TBCNN_NUMERICS_HPP
#define TBCNN_NUMERICS_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace tbcnn {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n, double diagonal = 1.0);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// y = M x. Throws UsageError on dimension mismatch.
Vector matvec(const Matrix& m, std::span<const double> x);
// y += scale * M x
void matvec_acc(const Matrix& m, std::span<const double> x, double scale, std::span<double> y);
// y += scale * M^T g
void matvec_t_acc(const Matrix& m, std::span<const double> g, double scale, std::span<double> y);
// M += scale * u v^T
void outer_acc(Matrix& m, double scale, std::span<const double> u, std::span<const double> v);
// y += a x
void axpy(double a, std::span<const double> x, std::span<double> y);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> v);

Vector tanh_map(std::span<const double> x);
// Derivative of tanh expressed through its output y = tanh(x).
inline double tanh_prime(double y) { return 1.0 - y * y; }

// Max-subtracted softmax.
Vector softmax(std::span<const double> logits);

// xoshiro256** seeded through splitmix64. Output streams depend only on the
// seed, never on the platform or standard library; distributions are derived
// here rather than through <random> for the same reason.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  // Child generator for worker `index`: seeded with seed XOR index.
  static SeededRng for_worker(std::uint64_t seed, std::uint64_t index) {
    return SeededRng(seed ^ index);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) { shuffle(std::span<T>(items)); }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

void fill_uniform(std::span<double> out, double scale, SeededRng& rng);

// A named view of one parameter tensor, flattened. `l2` marks the tensors that
// weight decay applies to (weight matrices only).
struct TensorRef {
  std::string_view name;
  std::span<double> data;
  bool l2 = false;
};

struct ConstTensorRef {
  std::string_view name;
  std::span<const double> data;
  bool l2 = false;
};

// One velocity buffer per parameter tensor.
class MomentumState {
 public:
  MomentumState() = default;
  static MomentumState zeros_like(std::span<const TensorRef> params);
  static MomentumState zeros_like(std::span<const ConstTensorRef> params);

  std::vector<Vector>& buffers() { return velocity_; }
  const std::vector<Vector>& buffers() const { return velocity_; }

 private:
  std::vector<Vector> velocity_;
};

struct SgdOptions {
  double lr = 0.03;
  double momentum = 0.0;
  double l2 = 0.0;
};

// v <- momentum * v - lr * (g + l2 * w [weights only]);  w <- w + v.
// Returns false and leaves everything untouched when any gradient entry is
// non-finite. Throws UsageError on shape mismatch.
bool sgd_momentum_step(std::span<const TensorRef> params,
                       std::span<const ConstTensorRef> grads,
                       MomentumState& state, const SgdOptions& opts);

}  // namespace tbcnn

#endif  // TBCNN_NUMERICS_HPP
