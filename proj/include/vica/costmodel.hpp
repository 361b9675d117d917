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

// Closed-form prefill FLOPs and KV-cache accounting.
//
// Symbols: n vision tokens, t = t_s + t_q text tokens (system + question),
// L = n + t, d hidden size, m FFN size. Every count carries the explicit
// MAC->FLOP factor of 2, including the ViCA vision cost (its condensed form
// is often written without it, but the reported numbers include it).
//
//   vision, baseline   n_layers * 2 * (4nd^2 + 2d(n^2 + nt) + 3ndm)
//   total, baseline    n_layers * 2 * (4Ld^2 + 2dL^2 + 3Ldm)
//   vision update      n_layers * 2 * (2nd^2 + 2dn^2 + 3ndm)
//   vision, ViCA       n_retained * 2 * (2nd^2 + 2dn t_q)
//   text only          n_layers * 2 * (4td^2 + 2dt^2 + 3tdm)
//
// All arithmetic is exact integer arithmetic with 128-bit intermediates.

#ifndef VICA_COSTMODEL_HPP_
#define VICA_COSTMODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vica/model.hpp"
#include "vica/pruning.hpp"
#include "vica/schedule.hpp"

namespace vica {

using Flops = std::uint64_t;

inline constexpr std::size_t kDefaultVisionTokens = 576;
inline constexpr std::size_t kDefaultSystemTokens = 35;
inline constexpr std::size_t kDefaultQuestionTokens = 20;

struct CostInputs {
  std::size_t n_layers = 32;
  std::size_t d = 4096;
  std::size_t m = 11008;
  std::size_t n = kDefaultVisionTokens;
  std::size_t t_s = kDefaultSystemTokens;
  std::size_t t_q = kDefaultQuestionTokens;
  std::size_t n_retained = 0;
  // Per-layer vision-token counts. When absent, schedule-aware functions
  // resolve them from the schedule's drop events.
  std::optional<std::vector<std::size_t>> vision_counts;

  std::size_t t() const { return t_s + t_q; }
  std::size_t seq_len() const { return n + t(); }
  void validate() const;  // throws ConfigError

  static CostInputs from_model(const ModelConfig& config, std::size_t n = kDefaultVisionTokens,
                               std::size_t t_s = kDefaultSystemTokens,
                               std::size_t t_q = kDefaultQuestionTokens);
};

double to_tflops(Flops f);
std::string format_tflops(Flops f);  // two decimals

struct VisionBreakdown {
  Flops projector = 0;  // W_Q, W_K, W_V, W_O on vision rows
  Flops qkv = 0;        // vision-vision plus text-vision attention products
  Flops ffn = 0;
  Flops total = 0;
};

VisionBreakdown baseline_vision_flops(const CostInputs& ci);
Flops total_flops(const CostInputs& ci);
Flops text_only_flops(const CostInputs& ci);

struct VisualUpdate {
  Flops update = 0;
  // Baseline vision cost not spent writing vision: n_layers*2*(2nd^2 + 2dn t_q).
  Flops remainder = 0;
  // update / (update + remainder). The denominator is the baseline vision
  // cost with only the question tokens reading vision. Absent when n = 0.
  std::optional<double> ratio;
};

VisualUpdate visual_update_flops(const CostInputs& ci);

struct VicaVision {
  Flops kv_projection = 0;  // n_retained * 2 * 2nd^2
  Flops cross = 0;          // n_retained * 2 * 2dn t_q
  Flops total = 0;
  std::optional<double> projector_to_cross_ratio;  // = d / t_q
};

VicaVision vica_vision_flops(const CostInputs& ci);
Flops vica_total_flops(const CostInputs& ci);

struct EquivalentTokens {
  double exact = 0.0;
  std::uint64_t rounded = 0;
};

// Positive root of 4 n_layers d n^2 + 2 n_layers (4d^2 + 2dt + 3dm) n = vis_flops.
EquivalentTokens equivalent_token_count(double vis_flops, const CostInputs& ci);

// ---------------------------------------------------------------------------
// Schedule-aware accounting.

// Vision tokens present at each layer (drops applied at entry by default).
std::vector<std::size_t> layer_vision_counts(const PolicySchedule& schedule, const CostInputs& ci,
                                             DropTiming timing = DropTiming::kAtEntry);

// Baseline layers: full vision write + read terms at that layer's count.
// Frozen exposing layers: 2 * (2 n_l d^2 + 2 d n_l t_q). TextOnly: 0.
Flops schedule_vision_flops(const PolicySchedule& schedule, const CostInputs& ci,
                            DropTiming timing = DropTiming::kAtEntry);
// Vision cost plus text cost of every layer; Baseline layers use the unified
// (L = n_l + t) total.
Flops schedule_total_flops(const PolicySchedule& schedule, const CostInputs& ci,
                           DropTiming timing = DropTiming::kAtEntry);

// Stored vision KV entries relative to n at every layer. Absent when n = 0.
std::optional<double> kv_cache_fraction(const PolicySchedule& schedule, const CostInputs& ci,
                                        DropTiming timing = DropTiming::kAtEntry);

struct CostReport {
  std::string preset;
  std::string schedule;
  CostInputs inputs;

  VisionBreakdown baseline_vision;
  Flops baseline_total = 0;
  std::optional<double> baseline_vis_ratio;
  VisualUpdate visual_update;

  Flops vis_total = 0;  // under the schedule
  Flops total = 0;
  std::optional<double> vis_relative;  // vs baseline vision
  std::optional<double> vis_ratio;     // vs schedule total
  EquivalentTokens equivalent_tokens;
  std::optional<double> kv_cache_fraction;
  double mean_vision_tokens = 0.0;
  std::optional<double> projector_to_cross_ratio;
  std::size_t n_retained = 0;
};

CostReport cost_report(const std::string& preset, const std::string& schedule_name,
                       const PolicySchedule& schedule, const CostInputs& ci,
                       DropTiming timing = DropTiming::kAtEntry);

}  // namespace vica

#endif  // VICA_COSTMODEL_HPP_
