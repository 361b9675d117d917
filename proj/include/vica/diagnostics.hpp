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

// Layerwise impact metrics: representation change (1 - cos) and output
// impact (KL of next-token distributions with one path disabled).

#ifndef VICA_DIAGNOSTICS_HPP_
#define VICA_DIAGNOSTICS_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vica/model.hpp"

namespace vica {

struct CosineChange {
  std::vector<std::optional<double>> per_token;  // nullopt for zero-norm rows
  double mean_cos = 1.0;                         // over non-skipped rows
  double mean_change = 0.0;                      // 1 - mean_cos
  std::size_t skipped_rows = 0;
};

// Row-wise cosine similarity between two equally shaped matrices. With no
// usable rows the means stay at cos = 1, change = 0.
CosineChange cosine_change(const Matrix& before, const Matrix& after);

inline constexpr double kProbabilitySumTolerance = 1e-9;
inline constexpr double kSmoothingFloor = 1e-12;

// Sum p log(p / q) in natural log; terms with p = 0 contribute nothing.
// Throws ContractViolation on negative entries, sums off by more than 1e-9,
// size mismatch, or p > 0 where q = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Floors entries at `floor` and renormalizes. Returns the input unchanged
// when nothing falls below the floor, so identical inputs stay identical.
std::vector<double> smooth_floor(std::span<const double> p, double floor = kSmoothingFloor);

// Numerically stable softmax of one logit row.
std::vector<double> softmax(std::span<const double> logits);

struct LayerImpact {
  std::size_t layer = 0;
  double kl = 0.0;
  double one_minus_cos = 0.0;
  std::size_t skipped_rows = 0;
};

struct ImpactReport {
  PathKind path = PathKind::kT2vRead;
  std::vector<LayerImpact> per_layer;  // ordered by layer
  std::vector<std::size_t> ranking;    // layers by KL descending, ties to lower index

  std::string to_csv() const;   // header: layer,kl,one_minus_cos
  std::string to_json() const;
};

struct SweepInput {
  Matrix vision;
  Matrix text;
};

struct SweepOptions {
  // Every run starts from this schedule's ablation set. An empty schedule
  // means all-Baseline.
  PolicySchedule base_schedule;
};

// For each layer l: forward_baseline_masked_oracle with {path@l} added to
// the base ablation set, KL between base and ablated final-position
// next-token distributions (mean over the batch), and mean 1 - cos of the
// affected rows:
//   vis_attn_write  vision rows before/after the attention sublayer (base run)
//   vis_ffn_write   vision rows before/after the FFN sublayer (base run)
//   t2v_read        text rows after the attention sublayer, base vs ablated
ImpactReport layer_sweep(const Weights& weights, const std::vector<SweepInput>& batch,
                         PathKind path, const SweepOptions& options = {});

struct RegimePartition {
  std::vector<std::size_t> essential;      // ascending
  std::vector<std::size_t> non_essential;  // ascending
};

// Top-k layers by KL (ties to the lower index). Throws ContractViolation when
// k exceeds the number of layers.
RegimePartition partition_regimes(const ImpactReport& report, std::size_t k);

}  // namespace vica

#endif  // VICA_DIAGNOSTICS_HPP_
