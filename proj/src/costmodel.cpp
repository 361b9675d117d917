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

#include "vica/costmodel.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "vica/errors.hpp"

namespace vica {
namespace {

__extension__ typedef unsigned __int128 u128;

Flops narrow(u128 v) {
  if (v > std::numeric_limits<Flops>::max()) throw ContractViolation("FLOP count overflows 64 bits");
  return static_cast<Flops>(v);
}

u128 w(std::size_t v) { return static_cast<u128>(v); }

// One baseline layer's vision terms at n vision tokens.
struct VisionTerms {
  u128 projector, qkv, ffn;
};

VisionTerms vision_layer(std::size_t n, const CostInputs& ci) {
  const u128 d = w(ci.d);
  return {2 * 4 * w(n) * d * d, 2 * 2 * d * (w(n) * w(n) + w(n) * w(ci.t())),
          2 * 3 * w(n) * d * w(ci.m)};
}

// One frozen exposing layer: K/V projection of n vision rows plus t_q
// question queries reading them (scores and values).
u128 frozen_layer(std::size_t n, const CostInputs& ci) {
  const u128 d = w(ci.d);
  return 2 * (2 * w(n) * d * d + 2 * d * w(n) * w(ci.t_q));
}

u128 unified_layer_total(std::size_t n, const CostInputs& ci) {
  const u128 L = w(n + ci.t());
  const u128 d = w(ci.d);
  return 2 * (4 * L * d * d + 2 * d * L * L + 3 * L * d * w(ci.m));
}

u128 text_layer(const CostInputs& ci) {
  const u128 t = w(ci.t());
  const u128 d = w(ci.d);
  return 2 * (4 * t * d * d + 2 * d * t * t + 3 * t * d * w(ci.m));
}

std::optional<double> ratio(Flops num, Flops den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

void CostInputs::validate() const {
  if (n_layers == 0) throw ConfigError("cost model needs n_layers >= 1");
  if (d == 0 || m == 0) throw ConfigError("cost model needs positive d and m");
  if (n_retained > n_layers) {
    throw ConfigError("n_retained=" + std::to_string(n_retained) + " exceeds n_layers=" +
                      std::to_string(n_layers));
  }
  if (vision_counts && vision_counts->size() != n_layers) {
    throw ConfigError("vision_counts must list one count per layer");
  }
}

CostInputs CostInputs::from_model(const ModelConfig& config, std::size_t n, std::size_t t_s,
                                  std::size_t t_q) {
  CostInputs ci;
  ci.n_layers = config.n_layers;
  ci.d = config.d_model;
  ci.m = config.d_ffn;
  ci.n = n;
  ci.t_s = t_s;
  ci.t_q = t_q;
  return ci;
}

double to_tflops(Flops f) { return static_cast<double>(f) / 1e12; }

std::string format_tflops(Flops f) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", to_tflops(f));
  return buf;
}

VisionBreakdown baseline_vision_flops(const CostInputs& ci) {
  ci.validate();
  const VisionTerms v = vision_layer(ci.n, ci);
  const u128 layers = w(ci.n_layers);
  VisionBreakdown out;
  out.projector = narrow(layers * v.projector);
  out.qkv = narrow(layers * v.qkv);
  out.ffn = narrow(layers * v.ffn);
  out.total = narrow(layers * (v.projector + v.qkv + v.ffn));
  return out;
}

Flops total_flops(const CostInputs& ci) {
  ci.validate();
  return narrow(w(ci.n_layers) * unified_layer_total(ci.n, ci));
}

Flops text_only_flops(const CostInputs& ci) {
  ci.validate();
  return narrow(w(ci.n_layers) * text_layer(ci));
}

VisualUpdate visual_update_flops(const CostInputs& ci) {
  ci.validate();
  const u128 n = w(ci.n);
  const u128 d = w(ci.d);
  const u128 layers = w(ci.n_layers);
  VisualUpdate out;
  out.update = narrow(layers * 2 * (2 * n * d * d + 2 * d * n * n + 3 * n * d * w(ci.m)));
  out.remainder = narrow(layers * frozen_layer(ci.n, ci));
  if (ci.n > 0) out.ratio = ratio(out.update, out.update + out.remainder);
  return out;
}

VicaVision vica_vision_flops(const CostInputs& ci) {
  ci.validate();
  const u128 n = w(ci.n);
  const u128 d = w(ci.d);
  const u128 r = w(ci.n_retained);
  VicaVision out;
  out.kv_projection = narrow(r * 2 * 2 * n * d * d);
  out.cross = narrow(r * 2 * 2 * d * n * w(ci.t_q));
  out.total = out.kv_projection + out.cross;
  if (out.cross > 0) out.projector_to_cross_ratio = ratio(out.kv_projection, out.cross);
  return out;
}

Flops vica_total_flops(const CostInputs& ci) {
  return vica_vision_flops(ci).total + text_only_flops(ci);
}

EquivalentTokens equivalent_token_count(double vis_flops, const CostInputs& ci) {
  ci.validate();
  if (!(vis_flops >= 0.0)) throw ContractViolation("equivalent_token_count: negative FLOPs");
  const long double layers = static_cast<long double>(ci.n_layers);
  const long double d = static_cast<long double>(ci.d);
  const long double t = static_cast<long double>(ci.t());
  const long double m = static_cast<long double>(ci.m);
  const long double a = 4 * layers * d;
  const long double b = 2 * layers * (4 * d * d + 2 * d * t + 3 * d * m);
  const long double c = static_cast<long double>(vis_flops);
  // (-b + sqrt(b^2 + 4ac)) / 2a, rearranged to avoid cancellation at small n.
  const long double root = 2 * c / (b + std::sqrt(b * b + 4 * a * c));
  EquivalentTokens out;
  out.exact = static_cast<double>(root);
  out.rounded = static_cast<std::uint64_t>(std::llround(root));
  return out;
}

std::vector<std::size_t> layer_vision_counts(const PolicySchedule& schedule, const CostInputs& ci,
                                             DropTiming timing) {
  ci.validate();
  if (schedule.layers.size() != ci.n_layers) {
    throw ConfigError("schedule has " + std::to_string(schedule.layers.size()) +
                      " layers, cost inputs " + std::to_string(ci.n_layers));
  }
  if (ci.vision_counts) return *ci.vision_counts;
  std::vector<std::string> warnings;
  const auto events =
      align_to_exposing_layers(schedule.drop_events(), schedule.exposure_mask(), warnings);
  return resolve_schedule(events, ci.n, ci.n_layers, timing);
}

Flops schedule_vision_flops(const PolicySchedule& schedule, const CostInputs& ci,
                            DropTiming timing) {
  const auto counts = layer_vision_counts(schedule, ci, timing);
  u128 sum = 0;
  for (std::size_t l = 0; l < ci.n_layers; ++l) {
    const LayerMode mode = schedule.layers[l].mode;
    if (mode == LayerMode::kBaseline) {
      const VisionTerms v = vision_layer(counts[l], ci);
      sum += v.projector + v.qkv + v.ffn;
    } else if (exposes_vision(mode)) {
      sum += frozen_layer(counts[l], ci);
    }
  }
  return narrow(sum);
}

Flops schedule_total_flops(const PolicySchedule& schedule, const CostInputs& ci,
                           DropTiming timing) {
  const auto counts = layer_vision_counts(schedule, ci, timing);
  u128 sum = 0;
  for (std::size_t l = 0; l < ci.n_layers; ++l) {
    const LayerMode mode = schedule.layers[l].mode;
    if (mode == LayerMode::kBaseline) {
      sum += unified_layer_total(counts[l], ci);
    } else {
      sum += text_layer(ci);
      if (exposes_vision(mode)) sum += frozen_layer(counts[l], ci);
    }
  }
  return narrow(sum);
}

std::optional<double> kv_cache_fraction(const PolicySchedule& schedule, const CostInputs& ci,
                                        DropTiming timing) {
  const auto counts = layer_vision_counts(schedule, ci, timing);
  if (ci.n == 0) return std::nullopt;
  u128 stored = 0;
  for (std::size_t l = 0; l < ci.n_layers; ++l) {
    if (exposes_vision(schedule.layers[l].mode)) stored += counts[l];
  }
  return static_cast<double>(stored) / static_cast<double>(w(ci.n_layers) * w(ci.n));
}

CostReport cost_report(const std::string& preset, const std::string& schedule_name,
                       const PolicySchedule& schedule, const CostInputs& ci, DropTiming timing) {
  CostReport r;
  r.preset = preset;
  r.schedule = schedule_name;
  r.inputs = ci;
  r.n_retained = 0;
  for (const auto& p : schedule.layers) {
    if (exposes_vision(p.mode) && p.mode != LayerMode::kBaseline) ++r.n_retained;
  }
  r.inputs.n_retained = r.n_retained;

  CostInputs base = ci;
  base.vision_counts.reset();
  r.baseline_vision = baseline_vision_flops(base);
  r.baseline_total = total_flops(base);
  r.baseline_vis_ratio = ratio(r.baseline_vision.total, r.baseline_total);
  r.visual_update = visual_update_flops(base);

  r.vis_total = schedule_vision_flops(schedule, ci, timing);
  r.total = schedule_total_flops(schedule, ci, timing);
  r.vis_relative = ratio(r.vis_total, r.baseline_vision.total);
  r.vis_ratio = ratio(r.vis_total, r.total);
  r.equivalent_tokens = equivalent_token_count(static_cast<double>(r.vis_total), ci);
  r.kv_cache_fraction = kv_cache_fraction(schedule, ci, timing);

  const auto counts = layer_vision_counts(schedule, ci, timing);
  r.mean_vision_tokens =
      static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0})) /
      static_cast<double>(counts.size());
  if (r.n_retained > 0 && ci.t_q > 0 && !schedule.has_baseline_layers()) {
    r.projector_to_cross_ratio = static_cast<double>(ci.d) / static_cast<double>(ci.t_q);
  }
  return r;
}

}  // namespace vica
