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

#include "tbcnn/numerics.hpp"

#include <algorithm>
#include <string>

#include "tbcnn/error.hpp"

namespace tbcnn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw UsageError(what);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename View>
MomentumState zeros_for(std::span<const View> params) {
  MomentumState state;
  state.buffers().reserve(params.size());
  for (const auto& p : params) state.buffers().emplace_back(p.data.size(), 0.0);
  return state;
}

}  // namespace

Matrix Matrix::identity(std::size_t n, double diagonal) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = diagonal;
  return m;
}

Vector matvec(const Matrix& m, std::span<const double> x) {
  require(m.cols() == x.size(), "matvec: dimension mismatch");
  Vector y(m.rows(), 0.0);
  matvec_acc(m, x, 1.0, y);
  return y;
}

void matvec_acc(const Matrix& m, std::span<const double> x, double scale, std::span<double> y) {
  require(m.cols() == x.size() && m.rows() == y.size(), "matvec: dimension mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.row(r).data();
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += row[c] * x[c];
    y[r] += scale * acc;
  }
}

void matvec_t_acc(const Matrix& m, std::span<const double> g, double scale, std::span<double> y) {
  require(m.rows() == g.size() && m.cols() == y.size(), "matvec_t: dimension mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double gr = scale * g[r];
    if (gr == 0.0) continue;
    const double* row = m.row(r).data();
    for (std::size_t c = 0; c < m.cols(); ++c) y[c] += gr * row[c];
  }
}

void outer_acc(Matrix& m, double scale, std::span<const double> u, std::span<const double> v) {
  require(m.rows() == u.size() && m.cols() == v.size(), "outer: dimension mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ur = scale * u[r];
    if (ur == 0.0) continue;
    double* row = m.row(r).data();
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += ur * v[c];
  }
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "axpy: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "squared_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Vector tanh_map(std::span<const double> x) {
  Vector y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return std::tanh(v); });
  return y;
}

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double top = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t SeededRng::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double SeededRng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t SeededRng::below(std::uint64_t n) {
  require(n > 0, "SeededRng::below: empty range");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return x % n;
}

void fill_uniform(std::span<double> out, double scale, SeededRng& rng) {
  for (double& v : out) v = rng.uniform(-scale, scale);
}

MomentumState MomentumState::zeros_like(std::span<const TensorRef> params) {
  return zeros_for(params);
}

MomentumState MomentumState::zeros_like(std::span<const ConstTensorRef> params) {
  return zeros_for(params);
}

bool sgd_momentum_step(std::span<const TensorRef> params, std::span<const ConstTensorRef> grads,
                       MomentumState& state, const SgdOptions& opts) {
  require(params.size() == grads.size(), "sgd: tensor count mismatch");
  if (state.buffers().empty()) state = MomentumState::zeros_like(params);
  require(state.buffers().size() == params.size(), "sgd: momentum state mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    require(params[t].data.size() == grads[t].data.size() &&
                state.buffers()[t].size() == params[t].data.size(),
            "sgd: tensor shape mismatch");
  }
  for (const auto& g : grads) {
    if (!all_finite(g.data)) return false;
  }

  for (std::size_t t = 0; t < params.size(); ++t) {
    std::span<double> w = params[t].data;
    std::span<const double> g = grads[t].data;
    Vector& v = state.buffers()[t];
    const double decay = params[t].l2 ? opts.l2 : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = opts.momentum * v[i] - opts.lr * (g[i] + decay * w[i]);
      w[i] += v[i];
    }
  }
  return true;
}

}  // namespace tbcnn
