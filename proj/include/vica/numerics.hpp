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

// Dense double-precision kernels used by every other module.
//
// Matrices can also be "shape-only": they carry dimensions but no storage.
// Every kernel accepts them, skips the arithmetic, returns a shape-only
// result and still reports its multiply-accumulate count. This lets the
// model run its real control flow at full backbone geometry (d = 4096 and
// up) purely to count work.

#ifndef VICA_NUMERICS_HPP_
#define VICA_NUMERICS_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vica/flow_mask.hpp"

namespace vica {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix shape_only(std::size_t rows, std::size_t cols);
  static Matrix identity(std::size_t n);
  // Entries drawn i.i.d. from N(0, stddev^2).
  static Matrix random_normal(std::size_t rows, std::size_t cols,
                              std::mt19937_64& rng, double stddev = 1.0);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool shape_only() const { return shape_only_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  // Rows [begin, end).
  Matrix slice_rows(std::size_t begin, std::size_t end) const;
  Matrix gather_rows(std::span<const std::size_t> indices) const;
  static Matrix vstack(const Matrix& top, const Matrix& bottom);

  std::string shape_string() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  bool shape_only_ = false;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Multiply-accumulate instrumentation.
//
// Kernels report their MAC count to the counter installed on the calling
// thread (if any). Counting is per thread, so concurrent forwards do not
// interfere.

class MacCounter {
 public:
  std::uint64_t total() const { return total_; }
  void add(std::uint64_t macs) { total_ += macs; }
  void reset() { total_ = 0; }

 private:
  std::uint64_t total_ = 0;
};

class ScopedMacCount {
 public:
  explicit ScopedMacCount(MacCounter& counter);
  ~ScopedMacCount();
  ScopedMacCount(const ScopedMacCount&) = delete;
  ScopedMacCount& operator=(const ScopedMacCount&) = delete;

 private:
  MacCounter* previous_;
};

void record_macs(std::uint64_t macs);

// ---------------------------------------------------------------------------
// Kernels.

Matrix matmul(const Matrix& a, const Matrix& b);

struct SoftmaxResult {
  Matrix probs;
  // Rows with no permitted entry; those rows come back as all zeros.
  std::vector<std::size_t> all_masked_rows;
};

// softmax(scale * scores) per row over the entries the mask permits.
// Masked entries are excluded from the reduction and come back as exactly 0.
SoftmaxResult row_softmax(const Matrix& scores, const FlowMask& mask, double scale);

inline constexpr double kRmsNormEps = 1e-6;

Matrix rms_norm(const Matrix& h, std::span<const double> gain);

double silu(double x);

// (silu(h * w_gate) .* (h * w_up)) * w_down
Matrix gated_ffn(const Matrix& h, const Matrix& w_gate, const Matrix& w_up,
                 const Matrix& w_down);

// a += b, elementwise; shape-only operands make a shape-only.
void add_inplace(Matrix& a, const Matrix& b);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace vica

#endif  // VICA_NUMERICS_HPP_
