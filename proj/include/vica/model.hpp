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

// Decoder-only toy transformer with per-layer vision policies.
//
// Three engines compute the same text logits by different routes:
//
//   forward                          policy engine: executes a PolicySchedule
//                                    layer by layer (frozen layers run text
//                                    queries only).
//   forward_baseline_masked_oracle   ablation engine: always runs unified
//                                    self-attention over [V; T] and disables
//                                    selected write/read paths by zeroing
//                                    residuals or masking the text->vision
//                                    block.
//   forward_vica_fast                fast path: text-only hidden state, static
//                                    precomputed vision KV concatenated ahead
//                                    of text KV at exposing layers.
//
// Blocks are pre-norm: h += Attn(RMSNorm(h)); h += FFN(RMSNorm(h)).

#ifndef VICA_MODEL_HPP_
#define VICA_MODEL_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vica/attention.hpp"
#include "vica/numerics.hpp"
#include "vica/pruning.hpp"
#include "vica/schedule.hpp"

namespace vica {

struct ModelConfig {
  std::string name = "toy";
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_model = 16;
  std::size_t d_ffn = 32;
  std::size_t vocab = 32;
  std::size_t max_positions = 2048;

  void validate() const;  // throws ConfigError

  // llava3b, llava7b, llava13b (backbone geometries, toy vocab).
  static ModelConfig preset(const std::string& name);
  static std::vector<ModelConfig> presets();
  static ModelConfig toy(std::size_t n_layers, std::size_t n_heads, std::size_t d_model,
                         std::size_t d_ffn, std::size_t vocab = 32);
};

struct LayerWeights {
  std::vector<double> attn_norm;
  Matrix wq, wk, wv, wo;
  std::vector<double> ffn_norm;
  Matrix w_gate, w_up, w_down;
};

struct Weights {
  ModelConfig config;
  Matrix pos_emb;  // max_positions x d
  std::vector<LayerWeights> layers;
  std::vector<double> final_norm;
  Matrix lm_head;  // d x vocab
};

// Gaussian N(0, 1/d_model) matrices, unit norm gains; deterministic in seed.
Weights init_model(const ModelConfig& config, std::uint64_t seed);
// Same layout with shape-only matrices: runs the engines for MAC counting at
// full geometry without allocating weights.
Weights shape_only_weights(const ModelConfig& config);

struct TensorInfo {
  std::string name;
  std::vector<std::size_t> dims;
  bool operator==(const TensorInfo&) const = default;
};
std::vector<TensorInfo> weight_manifest(const Weights& w);

// Flat binary container: "VICA1", config words, then shape-prefixed
// little-endian float64 tensors in manifest order. See docs/formats.md.
void save_weights(const Weights& w, std::ostream& out);
Weights load_weights(std::istream& in);

// ---------------------------------------------------------------------------

struct ForwardOptions {
  bool record_hidden = false;
  // Leading text tokens that form the system prompt. Only the eager cross
  // mask treats them differently.
  std::size_t t_system = 0;
  CrossMaskVariant cross_mask = CrossMaskVariant::kBottomRight;
  DropTiming drop_timing = DropTiming::kAtEntry;
  ImportanceScorer scorer = ImportanceScorer::kLastQuery;
};

struct LayerTrace {
  std::size_t layer = 0;
  LayerMode mode = LayerMode::kBaseline;
  std::size_t n_vision = 0;     // vision rows present during this layer
  std::size_t attn_q_len = 0;   // attention tensor shape of this layer
  std::size_t attn_kv_len = 0;
  bool reads_vision = false;
  // Filled when ForwardOptions::record_hidden is set.
  Matrix vision_before_attn, vision_after_attn, vision_after_ffn;
  Matrix text_before_attn, text_after_attn, text_after_ffn;
};

struct ForwardResult {
  Matrix vision_hidden;  // empty for the fast path
  Matrix text_hidden;
  Matrix logits;                          // t x vocab
  std::vector<std::size_t> kept_vision;   // surviving original vision indices
  std::vector<LayerTrace> trace;
  std::vector<std::string> warnings;
};

ForwardResult forward(const Weights& weights, const Matrix& vision_emb, const Matrix& text_emb,
                      const PolicySchedule& schedule, const ForwardOptions& options = {});

// ---------------------------------------------------------------------------
// Ablation engine.

enum class PathKind { kVisAttnWrite, kVisFfnWrite, kT2vRead };

std::string path_kind_name(PathKind k);  // vis_attn_write, vis_ffn_write, t2v_read
PathKind parse_path_kind(const std::string& name);  // throws ConfigError

struct AblationPath {
  PathKind kind = PathKind::kVisAttnWrite;
  std::size_t layer = 0;

  // "vis_attn_write@3"
  static AblationPath parse(const std::string& text);
  std::string to_string() const;
  auto operator<=>(const AblationPath&) const = default;
};

using AblationSet = std::set<AblationPath>;

AblationSet all_layers(PathKind kind, std::size_t n_layers);
// Disabled paths that make the unified engine reproduce a drop-free schedule:
// non-Baseline layers lose both vision writes, TextOnly layers also t2v_read.
AblationSet ablation_for_schedule(const PolicySchedule& schedule);

ForwardResult forward_baseline_masked_oracle(const Weights& weights, const Matrix& vision_emb,
                                             const Matrix& text_emb,
                                             const AblationSet& disabled,
                                             const ForwardOptions& options = {});

// ---------------------------------------------------------------------------
// Parallel decoupling.

struct VisualKvSet {
  std::size_t n_layers = 0;
  std::size_t n_vision = 0;
  std::vector<std::size_t> layers;  // vision-exposing layers, ascending
  std::vector<Matrix> keys;         // n_vision x d, one per entry of layers
  std::vector<Matrix> values;

  std::size_t size() const { return layers.size(); }
  bool operator==(const VisualKvSet&) const = default;
};

// K = RMSNorm(vision_emb) W_K and V = RMSNorm(vision_emb) W_V with each
// exposing layer's own norm gain and projections. Never touches text.
// Throws ConfigError when the schedule writes vision (Baseline layers).
VisualKvSet precompute_visual_kv(const Weights& weights, const Matrix& vision_emb,
                                 const PolicySchedule& schedule);

ForwardResult forward_vica_fast(const Weights& weights, const VisualKvSet& kv,
                                const Matrix& text_emb, const PolicySchedule& schedule,
                                const ForwardOptions& options = {});

// Index of the largest final-position logit.
std::size_t greedy_next_token(const ForwardResult& result);

}  // namespace vica

#endif  // VICA_MODEL_HPP_
