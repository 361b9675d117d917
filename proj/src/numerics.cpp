// Copyright 2026 The ViCA Engine Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vica/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vica/errors.hpp"

namespace vica {

// ---------------------------------------------------------------------------
// FlowMask

std::size_t FlowMask::count_allowed() const {
  return static_cast<std::size_t>(std::count(allowed_.begin(), allowed_.end(), 1));
}

std::size_t FlowMask::count_allowed_in_row(std::size_t i) const {
  const auto begin = allowed_.begin() + static_cast<std::ptrdiff_t>(i * kv_len_);
  return static_cast<std::size_t>(
      std::count(begin, begin + static_cast<std::ptrdiff_t>(kv_len_), 1));
}

FlowMask FlowMask::tail_rows(std::size_t begin) const {
  if (begin > q_len_) throw ShapeError("FlowMask::tail_rows: begin past q_len");
  FlowMask out(q_len_ - begin, kv_len_);
  std::copy(allowed_.begin() + static_cast<std::ptrdiff_t>(begin * kv_len_),
            allowed_.end(), out.allowed_.begin());
  return out;
}

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::shape_only(std::size_t rows, std::size_t cols) {
  Matrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.shape_only_ = true;
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::random_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                             double stddev) {
  Matrix m(rows, cols);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& x : m.data_) x = dist(rng);
  return m;
}

Matrix Matrix::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) {
    throw ShapeError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_string());
  }
  if (shape_only_) return shape_only(end - begin, cols_);
  Matrix out(end - begin, cols_);
  std::copy(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
            data_.begin() + static_cast<std::ptrdiff_t>(end * cols_), out.data_.begin());
  return out;
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
  for (std::size_t idx : indices) {
    if (idx >= rows_) throw ShapeError("gather_rows: index out of range for " + shape_string());
  }
  if (shape_only_) return shape_only(indices.size(), cols_);
  Matrix out(indices.size(), cols_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy_n(row(indices[r]).begin(), cols_, out.row(r).begin());
  }
  return out;
}

Matrix Matrix::vstack(const Matrix& top, const Matrix& bottom) {
  if (top.rows_ == 0) return bottom;
  if (bottom.rows_ == 0) return top;
  if (top.cols_ != bottom.cols_) {
    throw ShapeError("vstack: " + top.shape_string() + " over " + bottom.shape_string());
  }
  if (top.shape_only_ || bottom.shape_only_) {
    return shape_only(top.rows_ + bottom.rows_, top.cols_);
  }
  Matrix out(top.rows_ + bottom.rows_, top.cols_);
  std::copy(top.data_.begin(), top.data_.end(), out.data_.begin());
  std::copy(bottom.data_.begin(), bottom.data_.end(),
            out.data_.begin() + static_cast<std::ptrdiff_t>(top.data_.size()));
  return out;
}

std::string Matrix::shape_string() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

// ---------------------------------------------------------------------------
// MAC counting

namespace {
thread_local MacCounter* g_active_counter = nullptr;
}  // namespace

ScopedMacCount::ScopedMacCount(MacCounter& counter) : previous_(g_active_counter) {
  g_active_counter = &counter;
}

ScopedMacCount::~ScopedMacCount() { g_active_counter = previous_; }

void record_macs(std::uint64_t macs) {
  if (g_active_counter != nullptr) g_active_counter->add(macs);
}

// ---------------------------------------------------------------------------
// Kernels

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + a.shape_string() + " x " +
                     b.shape_string());
  }
  const std::size_t rows = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t cols = b.cols();
  record_macs(static_cast<std::uint64_t>(rows) * inner * cols);
  if (a.shape_only() || b.shape_only()) return Matrix::shape_only(rows, cols);

  // Every output element accumulates over k in ascending order, independent
  // of how many rows a has or how the loops are tiled. Engines that slice the
  // same rows differently therefore produce bit-identical results.
  constexpr std::size_t kRowTile = 4;
  constexpr std::size_t kColTile = 256;
  Matrix c(rows, cols);
  for (std::size_t j0 = 0; j0 < cols; j0 += kColTile) {
    const std::size_t jn = std::min(kColTile, cols - j0);
    for (std::size_t i0 = 0; i0 < rows; i0 += kRowTile) {
      const std::size_t in = std::min(kRowTile, rows - i0);
      for (std::size_t k = 0; k < inner; ++k) {
        const double* __restrict b_row = b.row(k).data() + j0;
        for (std::size_t r = 0; r < in; ++r) {
          const double scale = a(i0 + r, k);
          double* __restrict out = c.row(i0 + r).data() + j0;
          for (std::size_t j = 0; j < jn; ++j) out[j] += scale * b_row[j];
        }
      }
    }
  }
  return c;
}

SoftmaxResult row_softmax(const Matrix& scores, const FlowMask& mask, double scale) {
  if (mask.q_len() != scores.rows() || mask.kv_len() != scores.cols()) {
    throw ShapeError("row_softmax: scores " + scores.shape_string() + " vs mask [" +
                     std::to_string(mask.q_len()) + "x" + std::to_string(mask.kv_len()) + "]");
  }
  SoftmaxResult result;
  if (scores.shape_only()) {
    result.probs = Matrix::shape_only(scores.rows(), scores.cols());
    return result;
  }
  result.probs = Matrix(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      if (!mask(i, j)) continue;
      row_max = std::max(row_max, scale * scores(i, j));
      any = true;
    }
    if (!any) {
      result.all_masked_rows.push_back(i);
      continue;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      if (!mask(i, j)) continue;
      const double e = std::exp(scale * scores(i, j) - row_max);
      result.probs(i, j) = e;
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      if (mask(i, j)) result.probs(i, j) *= inv;
    }
  }
  return result;
}

Matrix rms_norm(const Matrix& h, std::span<const double> gain) {
  if (gain.size() != h.cols()) {
    throw ShapeError("rms_norm: gain length " + std::to_string(gain.size()) + " vs input " +
                     h.shape_string());
  }
  if (h.shape_only()) return Matrix::shape_only(h.rows(), h.cols());
  Matrix out(h.rows(), h.cols());
  for (std::size_t r = 0; r < h.rows(); ++r) {
    const auto x = h.row(r);
    double sum_sq = 0.0;
    for (double v : x) sum_sq += v * v;
    const double inv = 1.0 / std::sqrt(sum_sq / static_cast<double>(h.cols()) + kRmsNormEps);
    auto y = out.row(r);
    for (std::size_t c = 0; c < h.cols(); ++c) y[c] = gain[c] * x[c] * inv;
  }
  return out;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

Matrix gated_ffn(const Matrix& h, const Matrix& w_gate, const Matrix& w_up,
                 const Matrix& w_down) {
  if (w_gate.rows() != h.cols() || w_up.rows() != h.cols() ||
      w_gate.cols() != w_up.cols() || w_down.rows() != w_gate.cols() ||
      w_down.cols() != h.cols()) {
    throw ShapeError("gated_ffn: h " + h.shape_string() + ", gate " + w_gate.shape_string() +
                     ", up " + w_up.shape_string() + ", down " + w_down.shape_string());
  }
  Matrix gate = matmul(h, w_gate);
  const Matrix up = matmul(h, w_up);
  if (!gate.shape_only() && !up.shape_only()) {
    auto g = gate.values();
    const auto u = up.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = silu(g[i]) * u[i];
  }
  return matmul(gate, w_down);
}

void add_inplace(Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add: " + a.shape_string() + " + " + b.shape_string());
  }
  if (b.shape_only()) {
    a = Matrix::shape_only(a.rows(), a.cols());
    return;
  }
  if (a.shape_only()) return;
  auto x = a.values();
  const auto y = b.values();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("max_abs_diff: " + a.shape_string() + " vs " + b.shape_string());
  }
  double worst = 0.0;
  const auto x = a.values();
  const auto y = b.values();
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
  return worst;
}

}  // namespace vica
