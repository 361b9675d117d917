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

// Published reference numbers and the cost-model expressions that must
// reproduce them at the published precision.

#include <cmath>
#include <cstdio>
#include <functional>
#include <tuple>

#include "vica/errors.hpp"
#include "vica/harness.hpp"

namespace vica::harness {
namespace {

constexpr double kTflopsTol = 0.01;
constexpr double kPercentTol = 0.1;

struct Backbone {
  const char* preset;
  const char* vica;
};

constexpr Backbone kBackbones[] = {
    {"llava3b", "vica3b"}, {"llava7b", "vica7b"}, {"llava13b", "vica13b"}};

CostInputs inputs(const std::string& preset) {
  return CostInputs::from_model(ModelConfig::preset(preset));
}

CostInputs vica_inputs(const Backbone& b) {
  CostInputs ci = inputs(b.preset);
  ci.n_retained = retained_layers(b.vica).size();
  return ci;
}

PolicySchedule schedule_for(const std::string& preset, const std::string& name) {
  return PolicySchedule::preset(name, ModelConfig::preset(preset).n_layers);
}

// Baseline PyramidDrop is reported through its mean token count, i.e. the
// baseline formula evaluated at the equivalent count.
CostInputs pdrop_equivalent_inputs(const Backbone& b) {
  CostInputs ci = inputs(b.preset);
  const auto counts = layer_vision_counts(schedule_for(b.preset, "baseline+pdrop"), ci);
  std::size_t sum = 0;
  for (std::size_t c : counts) sum += c;
  ci.n = static_cast<std::size_t>(std::llround(static_cast<double>(sum) / counts.size()));
  return ci;
}

double pct(double ratio) { return 100.0 * ratio; }

struct Golden {
  GoldenEntry entry;
  std::function<double()> actual;
};

const std::vector<Golden>& goldens() {
  static const std::vector<Golden> kGoldens = [] {
    std::vector<Golden> g;
    const auto add = [&](std::string id, std::string source, double expected, GoldenUnit unit,
                         std::function<double()> f) {
      const double tol = unit == GoldenUnit::kTflops    ? kTflopsTol
                         : unit == GoldenUnit::kPercent ? kPercentTol
                         : unit == GoldenUnit::kRatio   ? 1.0
                                                        : 0.0;
      g.push_back({{std::move(id), std::move(source), expected, tol, unit}, std::move(f)});
    };

    const double base_vis[] = {3.04, 7.65, 14.91};
    const double base_total[] = {3.33, 8.38, 16.34};
    const double update_ratio[] = {84.0, 83.8, 83.7};
    const double update_rest[] = {0.49, 1.24, 2.43};
    const double vica_vis[] = {0.14, 0.31, 0.49};
    const double vica_total[] = {0.42, 1.02, 1.88};
    const double vica_rel[] = {4.5, 4.1, 3.3};
    const double vica_reduction[] = {95.5, 95.9, 96.7};
    const double eq_tokens[] = {27, 24, 19};
    const double kv[] = {28.1, 25.0, 20.0};
    const double pdrop_vis[] = {1.40, 3.54, 6.92};
    const double pdrop_total[] = {1.68, 4.26, 8.33};
    const double pdrop_rel[] = {46.0, 46.3, 46.4};

    const char* kCostTable = "cost summary table (vision/total TFLOPs, KV-cache)";
    const char* kUpdateTable = "visual-update share table";
    const char* kMainTable = "main comparison tables (vision TFLOPs, rel.)";

    for (std::size_t i = 0; i < 3; ++i) {
      const Backbone b = kBackbones[i];
      const std::string p = b.preset;
      add(p + ".baseline.vis_tflops", kCostTable, base_vis[i], GoldenUnit::kTflops,
          [b] { return to_tflops(baseline_vision_flops(inputs(b.preset)).total); });
      add(p + ".baseline.total_tflops", kCostTable, base_total[i], GoldenUnit::kTflops,
          [b] { return to_tflops(total_flops(inputs(b.preset))); });
      add(p + ".baseline.vis_update_pct", kUpdateTable, update_ratio[i], GoldenUnit::kPercent,
          [b] { return pct(*visual_update_flops(inputs(b.preset)).ratio); });
      add(p + ".baseline.vis_nonupdate_tflops", kUpdateTable, update_rest[i],
          GoldenUnit::kTflops,
          [b] { return to_tflops(visual_update_flops(inputs(b.preset)).remainder); });
      add(p + ".vica.vis_tflops", kCostTable, vica_vis[i], GoldenUnit::kTflops,
          [b] { return to_tflops(vica_vision_flops(vica_inputs(b)).total); });
      add(p + ".vica.total_tflops", kCostTable, vica_total[i], GoldenUnit::kTflops,
          [b] { return to_tflops(vica_total_flops(vica_inputs(b))); });
      add(p + ".vica.vis_rel_pct", kMainTable, vica_rel[i], GoldenUnit::kPercent, [b] {
        return pct(static_cast<double>(vica_vision_flops(vica_inputs(b)).total) /
                   static_cast<double>(baseline_vision_flops(inputs(b.preset)).total));
      });
      add(p + ".vica.vis_reduction_pct", kCostTable, vica_reduction[i], GoldenUnit::kPercent, [b] {
        return 100.0 - pct(static_cast<double>(vica_vision_flops(vica_inputs(b)).total) /
                           static_cast<double>(baseline_vision_flops(inputs(b.preset)).total));
      });
      add(p + ".vica.equivalent_tokens", kMainTable, eq_tokens[i], GoldenUnit::kCount, [b] {
        const CostInputs ci = vica_inputs(b);
        return static_cast<double>(
            equivalent_token_count(static_cast<double>(vica_vision_flops(ci).total), ci).rounded);
      });
      add(p + ".vica.kv_cache_pct", kCostTable, kv[i], GoldenUnit::kPercent, [b] {
        return pct(*kv_cache_fraction(schedule_for(b.preset, b.vica), inputs(b.preset)));
      });
      add(p + ".pdrop.mean_tokens", "token-pruning baseline description", 270,
          GoldenUnit::kCount, [b] { return static_cast<double>(pdrop_equivalent_inputs(b).n); });
      add(p + ".pdrop.vis_tflops", kCostTable, pdrop_vis[i], GoldenUnit::kTflops,
          [b] { return to_tflops(baseline_vision_flops(pdrop_equivalent_inputs(b)).total); });
      add(p + ".pdrop.total_tflops", kCostTable, pdrop_total[i], GoldenUnit::kTflops,
          [b] { return to_tflops(total_flops(pdrop_equivalent_inputs(b))); });
      add(p + ".pdrop.vis_rel_pct", kMainTable, pdrop_rel[i], GoldenUnit::kPercent, [b] {
        return pct(static_cast<double>(baseline_vision_flops(pdrop_equivalent_inputs(b)).total) /
                   static_cast<double>(baseline_vision_flops(inputs(b.preset)).total));
      });
      add(p + ".pdrop.kv_cache_pct", kCostTable, 46.9, GoldenUnit::kPercent, [b] {
        return pct(*kv_cache_fraction(schedule_for(b.preset, "baseline+pdrop"), inputs(b.preset)));
      });
    }

    add("llava7b.vica.projector_to_cross", "cost-model derivation (KV projection vs cross-attention)",
        204, GoldenUnit::kRatio,
        [] { return *vica_vision_flops(vica_inputs(kBackbones[1])).projector_to_cross_ratio; });

    // Share of total prefill FLOPs per vision component, one image and 32.
    const char* kShares = "vision compute decomposition figure";
    for (const auto& [images, projector, qkv, ffn] :
         {std::tuple{1, 29.52, 2.27, 59.49}, std::tuple{32, 18.91, 42.68, 38.12}}) {
      const auto share = [images](int which) {
        CostInputs ci = inputs("llava7b");
        ci.n = kDefaultVisionTokens * static_cast<std::size_t>(images);
        const VisionBreakdown v = baseline_vision_flops(ci);
        const Flops part = which == 0 ? v.projector : which == 1 ? v.qkv : v.ffn;
        return pct(static_cast<double>(part) / static_cast<double>(total_flops(ci)));
      };
      const std::string tag = "llava7b." + std::to_string(images) + "img.";
      add(tag + "projector_share_pct", kShares, projector, GoldenUnit::kPercent,
          [share] { return share(0); });
      add(tag + "qkv_share_pct", kShares, qkv, GoldenUnit::kPercent, [share] { return share(1); });
      add(tag + "ffn_share_pct", kShares, ffn, GoldenUnit::kPercent, [share] { return share(2); });
    }
    return g;
  }();
  return kGoldens;
}

const char* unit_suffix(GoldenUnit u) {
  switch (u) {
    case GoldenUnit::kTflops: return " TFLOPs";
    case GoldenUnit::kPercent: return "%";
    case GoldenUnit::kCount: return "";
    case GoldenUnit::kRatio: return ":1";
  }
  return "";
}

}  // namespace

const std::vector<GoldenEntry>& golden_manifest() {
  static const std::vector<GoldenEntry> kEntries = [] {
    std::vector<GoldenEntry> out;
    for (const Golden& g : goldens()) out.push_back(g.entry);
    return out;
  }();
  return kEntries;
}

std::vector<GoldenResult> check_golden() {
  std::vector<GoldenResult> out;
  for (const Golden& g : goldens()) {
    GoldenResult r;
    r.entry = g.entry;
    r.actual = g.actual();
    if (g.entry.unit == GoldenUnit::kCount) {
      r.pass = r.actual == g.entry.expected;
    } else {
      // 1e-12 absorbs floating-point noise exactly at the boundary.
      r.pass = std::abs(r.actual - g.entry.expected) <= g.entry.tolerance + 1e-12;
    }
    out.push_back(r);
  }
  return out;
}

std::string format_golden(const GoldenResult& r) {
  char buf[256];
  const char* suffix = unit_suffix(r.entry.unit);
  if (r.entry.unit == GoldenUnit::kCount) {
    std::snprintf(buf, sizeof buf, "%-4s %-38s expected %.0f%s, got %.0f%s", r.pass ? "ok" : "FAIL",
                  r.entry.id.c_str(), r.entry.expected, suffix, r.actual, suffix);
  } else {
    std::snprintf(buf, sizeof buf, "%-4s %-38s expected %.2f%s +/- %g, got %.4f%s",
                  r.pass ? "ok" : "FAIL", r.entry.id.c_str(), r.entry.expected, suffix,
                  r.entry.tolerance, r.actual, suffix);
  }
  return buf;
}

}  // namespace vica::harness
