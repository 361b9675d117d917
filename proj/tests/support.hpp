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

// Seeded generators and plain-loop reference implementations shared by the
// test binaries. Nothing here calls the library kernels it is used to check.

#ifndef VICA_TESTS_SUPPORT_HPP_
#define VICA_TESTS_SUPPORT_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "vica/attention.hpp"
#include "vica/model.hpp"
#include "vica/numerics.hpp"

namespace vica::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline FlowMask random_mask(std::size_t q, std::size_t kv, std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution coin(p);
  FlowMask m(q, kv);
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < kv; ++j) m.set(i, j, coin(rng));
  }
  return m;
}

inline Matrix loop_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

// exp / sum without max subtraction; fine for the small scores used here.
inline Matrix loop_softmax(const Matrix& scores, const FlowMask& mask, double scale) {
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      if (mask(i, j)) sum += std::exp(scores(i, j) * scale);
    }
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      if (mask(i, j) && sum > 0.0) out(i, j) = std::exp(scores(i, j) * scale) / sum;
    }
  }
  return out;
}

inline Matrix loop_rms_norm(const Matrix& h, const std::vector<double>& gain) {
  Matrix out(h.rows(), h.cols());
  for (std::size_t r = 0; r < h.rows(); ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < h.cols(); ++c) ss += h(r, c) * h(r, c);
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(h.cols()) + 1e-6);
    for (std::size_t c = 0; c < h.cols(); ++c) out(r, c) = gain[c] * h(r, c) * inv;
  }
  return out;
}

inline Matrix loop_ffn(const Matrix& h, const Matrix& wg, const Matrix& wu, const Matrix& wd) {
  const std::size_t m = wg.cols();
  Matrix out(h.rows(), wd.cols());
  for (std::size_t r = 0; r < h.rows(); ++r) {
    std::vector<double> act(m);
    for (std::size_t j = 0; j < m; ++j) {
      double g = 0.0, u = 0.0;
      for (std::size_t c = 0; c < h.cols(); ++c) {
        g += h(r, c) * wg(c, j);
        u += h(r, c) * wu(c, j);
      }
      act[j] = g / (1.0 + std::exp(-g)) * u;
    }
    for (std::size_t c = 0; c < wd.cols(); ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += act[j] * wd(j, c);
      out(r, c) = s;
    }
  }
  return out;
}

// Per-element multi-head attention with an explicit mask.
inline Matrix loop_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                             const FlowMask& mask, std::size_t heads) {
  const std::size_t d = q.cols();
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out(q.rows(), d);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < q.rows(); ++i) {
      std::vector<double> w(k.rows(), 0.0);
      double max = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k.rows(); ++j) {
        if (!mask(i, j)) continue;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += q(i, h * dh + c) * k(j, h * dh + c);
        w[j] = s * scale;
        max = std::max(max, w[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < k.rows(); ++j) {
        if (mask(i, j)) {
          w[j] = std::exp(w[j] - max);
          sum += w[j];
        }
      }
      for (std::size_t j = 0; j < k.rows(); ++j) {
        if (!mask(i, j)) continue;
        for (std::size_t c = 0; c < dh; ++c) out(i, h * dh + c) += w[j] / sum * v(j, h * dh + c);
      }
    }
  }
  return out;
}

// Plain causal text decoder built from the loop kernels above, with text at
// positions [pos0, pos0 + t).
inline Matrix loop_text_decoder(const Weights& w, const Matrix& text_emb, std::size_t pos0 = 0) {
  const std::size_t t = text_emb.rows();
  const std::size_t d = w.config.d_model;
  Matrix h(t, d);
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t c = 0; c < d; ++c) h(r, c) = text_emb(r, c) + w.pos_emb(pos0 + r, c);
  }
  FlowMask causal(t, t);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j <= i; ++j) causal.set(i, j, true);
  }
  for (const LayerWeights& lw : w.layers) {
    const Matrix x = loop_rms_norm(h, lw.attn_norm);
    const Matrix a = loop_attention(loop_matmul(x, lw.wq), loop_matmul(x, lw.wk),
                                    loop_matmul(x, lw.wv), causal, w.config.n_heads);
    const Matrix o = loop_matmul(a, lw.wo);
    for (std::size_t r = 0; r < t; ++r) {
      for (std::size_t c = 0; c < d; ++c) h(r, c) += o(r, c);
    }
    const Matrix f = loop_ffn(loop_rms_norm(h, lw.ffn_norm), lw.w_gate, lw.w_up, lw.w_down);
    for (std::size_t r = 0; r < t; ++r) {
      for (std::size_t c = 0; c < d; ++c) h(r, c) += f(r, c);
    }
  }
  return loop_matmul(loop_rms_norm(h, w.final_norm), w.lm_head);
}

inline double max_abs(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) m = std::max(m, std::abs(a(r, c) - b(r, c)));
  }
  return m;
}

inline std::vector<double> random_distribution(std::size_t n, std::mt19937_64& rng,
                                               double zero_prob = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  double sum = 0.0;
  for (double& x : p) {
    x = u(rng) < zero_prob ? 0.0 : u(rng) + 1e-3;
    sum += x;
  }
  if (sum == 0.0) {
    p[0] = 1.0;
    return p;
  }
  for (double& x : p) x /= sum;
  return p;
}

}  // namespace vica::testing

#endif  // VICA_TESTS_SUPPORT_HPP_
