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

#include "vica/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "vica/errors.hpp"

namespace vica {

FlowMask build_baseline_mask(const TokenLayout& layout) {
  const std::size_t len = layout.total();
  FlowMask mask(len, len);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = 0; j <= i; ++j) mask.set(i, j, true);
  }
  return mask;
}

FlowMask build_cross_mask(const TokenLayout& layout, bool include_vision,
                          CrossMaskVariant variant) {
  const std::size_t t = layout.n_text();
  const std::size_t n = include_vision ? layout.n_vision : 0;
  FlowMask mask(t, n + t);
  for (std::size_t i = 0; i < t; ++i) {
    const bool sees_vision = variant == CrossMaskVariant::kBottomRight || i >= layout.t_system;
    if (sees_vision) {
      for (std::size_t j = 0; j < n; ++j) mask.set(i, j, true);
    }
    for (std::size_t j = 0; j <= i; ++j) mask.set(i, n + j, true);
  }
  return mask;
}

bool bottom_right_causal_allowed(std::size_t i, std::size_t j, std::size_t q_len,
                                 std::size_t kv_len) {
  if (q_len > kv_len) {
    throw ContractViolation("bottom-right causal mask needs q_len <= kv_len, got q_len=" +
                            std::to_string(q_len) + " kv_len=" + std::to_string(kv_len));
  }
  if (i >= q_len || j >= kv_len) {
    throw ContractViolation("bottom-right causal mask index (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") outside " + std::to_string(q_len) + "x" +
                            std::to_string(kv_len));
  }
  return j <= i + (kv_len - q_len);
}

FlowMask build_bottom_right_mask(std::size_t q_len, std::size_t kv_len) {
  FlowMask mask(q_len, kv_len);
  for (std::size_t i = 0; i < q_len; ++i) {
    for (std::size_t j = 0; j < kv_len; ++j) {
      mask.set(i, j, bottom_right_causal_allowed(i, j, q_len, kv_len));
    }
  }
  return mask;
}

namespace {

std::size_t head_dim_or_throw(std::size_t d, std::size_t n_heads) {
  if (n_heads == 0 || d % n_heads != 0) {
    throw ShapeError("attention: model dim " + std::to_string(d) +
                     " not divisible by n_heads=" + std::to_string(n_heads));
  }
  return d / n_heads;
}

void check_qkv(const Matrix& q, const Matrix& k, const Matrix& v) {
  if (k.rows() != v.rows() || q.cols() != k.cols() || k.cols() != v.cols()) {
    throw ShapeError("attention: q " + q.shape_string() + ", k " + k.shape_string() + ", v " +
                     v.shape_string());
  }
}

void check_mask(const Matrix& q, const Matrix& k, const FlowMask& mask) {
  if (mask.q_len() != q.rows() || mask.kv_len() != k.rows()) {
    throw ShapeError("attention: mask [" + std::to_string(mask.q_len()) + "x" +
                     std::to_string(mask.kv_len()) + "] vs q " + q.shape_string() + ", k " +
                     k.shape_string());
  }
}

// Dense Q_h K_h^T for one head.
// Columns [col0, col0 + dh) of k, transposed to dh x kv.
Matrix head_keys_transposed(const Matrix& k, std::size_t col0, std::size_t dh) {
  Matrix kt(dh, k.rows());
  for (std::size_t j = 0; j < k.rows(); ++j) {
    const double* kj = k.row(j).data() + col0;
    for (std::size_t c = 0; c < dh; ++c) kt(c, j) = kj[c];
  }
  return kt;
}

// out[j] = sum_c qi[c] * kt(c, j) for j < len, accumulated over c in
// ascending order. Shared by every attention path so scores agree bitwise.
void score_row(const double* qi, const Matrix& kt, std::size_t len, double* out) {
  std::fill(out, out + len, 0.0);
  for (std::size_t c = 0; c < kt.rows(); ++c) {
    const double s = qi[c];
    const double* __restrict kc = kt.row(c).data();
    double* __restrict o = out;
    for (std::size_t j = 0; j < len; ++j) o[j] += s * kc[j];
  }
}

Matrix head_scores(const Matrix& q, const Matrix& k, std::size_t col0, std::size_t dh) {
  const Matrix kt = head_keys_transposed(k, col0, dh);
  Matrix scores(q.rows(), k.rows());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    score_row(q.row(i).data() + col0, kt, k.rows(), scores.row(i).data());
  }
  return scores;
}

}  // namespace

Matrix masked_attention_oracle(const Matrix& q, const Matrix& k, const Matrix& v,
                               const FlowMask& mask, std::size_t n_heads) {
  check_qkv(q, k, v);
  check_mask(q, k, mask);
  const std::size_t d = q.cols();
  const std::size_t dh = head_dim_or_throw(d, n_heads);
  // Dense QK^T plus dense PV, as eager attention does.
  record_macs(2ULL * q.rows() * k.rows() * d);
  if (q.shape_only() || k.shape_only() || v.shape_only()) {
    return Matrix::shape_only(q.rows(), d);
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out(q.rows(), d);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t col0 = h * dh;
    const SoftmaxResult sm = row_softmax(head_scores(q, k, col0, dh), mask, scale);
    for (std::size_t i = 0; i < q.rows(); ++i) {
      double* oi = out.row(i).data() + col0;
      for (std::size_t j = 0; j < k.rows(); ++j) {
        const double p = sm.probs(i, j);
        const double* vj = v.row(j).data() + col0;
        for (std::size_t c = 0; c < dh; ++c) oi[c] += p * vj[c];
      }
    }
  }
  return out;
}

Matrix attention_probs(const Matrix& q, const Matrix& k, const FlowMask& mask,
                       std::size_t n_heads) {
  if (q.cols() != k.cols()) {
    throw ShapeError("attention_probs: q " + q.shape_string() + ", k " + k.shape_string());
  }
  check_mask(q, k, mask);
  const std::size_t d = q.cols();
  const std::size_t dh = head_dim_or_throw(d, n_heads);
  record_macs(static_cast<std::uint64_t>(q.rows()) * k.rows() * d);
  if (q.shape_only() || k.shape_only()) return Matrix::shape_only(q.rows(), k.rows());

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix mean(q.rows(), k.rows());
  for (std::size_t h = 0; h < n_heads; ++h) {
    const SoftmaxResult sm = row_softmax(head_scores(q, k, h * dh, dh), mask, scale);
    add_inplace(mean, sm.probs);
  }
  for (double& x : mean.values()) x /= static_cast<double>(n_heads);
  return mean;
}

Matrix asymmetric_cross_attention(const Matrix& q_text, const Matrix& k_all,
                                  const Matrix& v_all, std::size_t n_heads) {
  check_qkv(q_text, k_all, v_all);
  const std::size_t q_len = q_text.rows();
  const std::size_t kv_len = k_all.rows();
  if (q_len > kv_len) {
    throw ContractViolation("asymmetric_cross_attention: q_len=" + std::to_string(q_len) +
                            " exceeds kv_len=" + std::to_string(kv_len));
  }
  const std::size_t d = q_text.cols();
  const std::size_t dh = head_dim_or_throw(d, n_heads);
  const std::size_t offset = kv_len - q_len;

  // Row i touches offset + i + 1 keys: sum over rows is q_len*offset + q_len(q_len+1)/2.
  const std::uint64_t visible =
      static_cast<std::uint64_t>(q_len) * offset + static_cast<std::uint64_t>(q_len) * (q_len + 1) / 2;
  record_macs(2ULL * visible * d);
  if (q_text.shape_only() || k_all.shape_only() || v_all.shape_only()) {
    return Matrix::shape_only(q_len, d);
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out(q_len, d);
  std::vector<double> p(kv_len);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t col0 = h * dh;
    const Matrix kt = head_keys_transposed(k_all, col0, dh);
    for (std::size_t i = 0; i < q_len; ++i) {
      const std::size_t last = i + offset;
      score_row(q_text.row(i).data() + col0, kt, last + 1, p.data());
      double row_max = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j <= last; ++j) row_max = std::max(row_max, scale * p[j]);
      double sum = 0.0;
      for (std::size_t j = 0; j <= last; ++j) {
        p[j] = std::exp(scale * p[j] - row_max);
        sum += p[j];
      }
      const double inv = 1.0 / sum;
      double* oi = out.row(i).data() + col0;
      for (std::size_t j = 0; j <= last; ++j) {
        const double pj = p[j] * inv;
        const double* vj = v_all.row(j).data() + col0;
        for (std::size_t c = 0; c < dh; ++c) oi[c] += pj * vj[c];
      }
    }
  }
  return out;
}

}  // namespace vica
