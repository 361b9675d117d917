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

// Information-flow masks over a [vision; text] token layout and the two
// attention evaluators built on them:
//
//   * masked_attention_oracle: dense scores, explicit boolean mask. This is
//     the reference path and the one whose cost matches eager attention.
//   * asymmetric_cross_attention: text queries against [vision; text] keys
//     with the causal mask aligned to the bottom-right corner. No mask is
//     materialized; row i reads kv rows j <= i + (kv_len - q_len).

#ifndef VICA_ATTENTION_HPP_
#define VICA_ATTENTION_HPP_

#include <cstddef>

#include "vica/flow_mask.hpp"
#include "vica/numerics.hpp"

namespace vica {

/// Token layout of one multimodal prompt. Vision tokens form a prefix at
/// positions [0, n_vision); text occupies [n_vision, n_vision + n_text).
/// The text is a system prompt followed by the question.
struct TokenLayout {
  std::size_t n_vision = 0;
  std::size_t t_system = 0;
  std::size_t t_question = 0;

  std::size_t n_text() const { return t_system + t_question; }
  std::size_t total() const { return n_vision + n_text(); }

  // Layout with all text counted as question tokens.
  static TokenLayout with_text(std::size_t n_vision, std::size_t n_text) {
    return {n_vision, 0, n_text};
  }
};

// Square (n + t) causal mask over the unified sequence. Because vision is a
// prefix, the vision-rows x text-cols block is all false.
FlowMask build_baseline_mask(const TokenLayout& layout);

enum class CrossMaskVariant {
  // Text query i sees every vision token and text j <= i.
  kBottomRight,
  // Same, except system-prompt rows do not see vision. Models eager masking
  // of a prompt where the system text precedes the image.
  kEager,
};

// Text-query mask. With include_vision the shape is t x (n + t), otherwise
// t x t plain causal.
FlowMask build_cross_mask(const TokenLayout& layout, bool include_vision,
                          CrossMaskVariant variant = CrossMaskVariant::kBottomRight);

// j <= i + (kv_len - q_len). Throws ContractViolation when q_len > kv_len or
// an index is out of range.
bool bottom_right_causal_allowed(std::size_t i, std::size_t j, std::size_t q_len,
                                 std::size_t kv_len);

FlowMask build_bottom_right_mask(std::size_t q_len, std::size_t kv_len);

// Per-head softmax((Q_h K_h^T) / sqrt(d_head), mask) V_h, heads concatenated.
Matrix masked_attention_oracle(const Matrix& q, const Matrix& k, const Matrix& v,
                               const FlowMask& mask, std::size_t n_heads);

// Attention probabilities averaged over heads, q_len x kv_len. Used by the
// token-importance scorers.
Matrix attention_probs(const Matrix& q, const Matrix& k, const FlowMask& mask,
                       std::size_t n_heads);

Matrix asymmetric_cross_attention(const Matrix& q_text, const Matrix& k_all,
                                  const Matrix& v_all, std::size_t n_heads);

}  // namespace vica

#endif  // VICA_ATTENTION_HPP_
