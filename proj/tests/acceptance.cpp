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

// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
// Usage: vica_acceptance [--reps N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "support.hpp"
#include "vica/costmodel.hpp"
#include "vica/diagnostics.hpp"
#include "vica/harness.hpp"
#include "vica/model.hpp"

using namespace vica;
using vica::testing::random_matrix;
using vica::testing::uniform_index;

namespace {

// Tolerances and sizes pinned from the acceptance criteria.
constexpr double kGoldenSeconds = 1.0;
constexpr double kEquivalenceSeconds = 60.0;
constexpr double kEquivalenceTol = 1e-10;
constexpr int kMaskLayouts = 500;
constexpr int kFrozenRuns = 100;
constexpr double kDecoupleTol = 1e-12;
constexpr int kKlPairs = 1000;
constexpr double kClosedFormTol = 1e-9;
constexpr double kCosScaleTol = 1e-12;
constexpr double kMacTol = 0.01;
constexpr double kSpeedMacRatio = 0.10;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

PolicySchedule random_frozen_schedule(std::size_t layers, std::mt19937_64& rng) {
  std::string codes;
  for (std::size_t l = 0; l < layers; ++l) codes += "FVT"[uniform_index(rng, 0, 2)];
  return PolicySchedule::parse(codes);
}

Outcome golden_numbers() {
  const auto dir = std::filesystem::temp_directory_path() / "vica_acceptance_cost";
  harness::ExperimentConfig cfg = harness::ExperimentConfig::defaults(harness::Mode::kCost);
  cfg.schedule = "vica7b";
  cfg.golden = true;
  std::ostringstream sink;
  const auto start = std::chrono::steady_clock::now();
  const int code = harness::run_cost(cfg, dir, sink);
  const double secs = seconds_since(start);
  std::size_t passed = 0;
  const auto results = harness::check_golden();
  for (const auto& r : results) passed += r.pass;
  const bool headline = sink.str().find("0.31 TFLOPs (4.1%)") != std::string::npos;
  Outcome o;
  o.pass = code == harness::kExitPass && passed == results.size() && headline &&
           secs < kGoldenSeconds;
  o.detail = std::to_string(passed) + "/" + std::to_string(results.size()) +
             " reference values, headline " + (headline ? "0.31 TFLOPs (4.1%)" : "missing") +
             fmt(", %.3f s", secs);
  return o;
}

Outcome three_way_equivalence() {
  const harness::ExperimentConfig cfg =
      harness::ExperimentConfig::defaults(harness::Mode::kEquivalence);
  const auto start = std::chrono::steady_clock::now();
  const harness::EquivalenceSummary s = harness::run_equivalence_grid(cfg);
  const double secs = seconds_since(start);
  std::size_t three_way = 0;
  for (const auto& c : s.cases) three_way += c.fast_vs_oracle.has_value();
  Outcome o;
  o.pass = s.failures == 0 && s.max_deviation <= kEquivalenceTol && secs < kEquivalenceSeconds &&
           s.cases.size() == 5 * 4 * 3 * 3 * 3 * 4;
  o.detail = std::to_string(s.cases.size()) + " cases (" + std::to_string(three_way) +
             " three-way), max |dev| " + fmt("%.3e, %.1f s", s.max_deviation, secs);
  return o;
}

Outcome mask_semantics() {
  std::mt19937_64 rng(0xA11CE);
  int bad_slice = 0, bad_avt = 0;
  for (int i = 0; i < kMaskLayouts; ++i) {
    const TokenLayout layout{uniform_index(rng, 0, 64), uniform_index(rng, 0, 16),
                             uniform_index(rng, 1, 32)};
    const FlowMask square = build_baseline_mask(layout);
    const FlowMask slice = square.tail_rows(layout.n_vision);
    if (!(build_bottom_right_mask(layout.n_text(), layout.total()) == slice) ||
        !(build_cross_mask(layout, true) == slice)) {
      ++bad_slice;
    }
    for (std::size_t r = 0; r < layout.n_vision; ++r) {
      for (std::size_t c = layout.n_vision; c < layout.total(); ++c) {
        if (square(r, c)) {
          ++bad_avt;
          r = layout.n_vision;
          break;
        }
      }
    }
  }
  Outcome o;
  o.pass = bad_slice == 0 && bad_avt == 0;
  o.detail = std::to_string(kMaskLayouts) + " layouts, " + std::to_string(bad_slice) +
             " slice mismatches, " + std::to_string(bad_avt) + " masks with a vision-to-text entry";
  return o;
}

Outcome frozen_writes() {
  std::mt19937_64 rng(0xF0F0);
  ForwardOptions opts;
  opts.record_hidden = true;
  int violations = 0;
  for (int i = 0; i < kFrozenRuns; ++i) {
    const std::size_t layers = uniform_index(rng, 1, 6);
    const std::size_t heads = std::size_t{1} << uniform_index(rng, 0, 2);
    const std::size_t d = 8 * uniform_index(rng, 1, 3);
    const Weights w = init_model(ModelConfig::toy(layers, heads, d, 2 * d), rng());
    const Matrix vision = random_matrix(uniform_index(rng, 1, 12), d, rng);
    const Matrix text = random_matrix(uniform_index(rng, 1, 8), d, rng);
    const ForwardResult r = forward(w, vision, text, random_frozen_schedule(layers, rng), opts);
    bool ok = r.vision_hidden == vision;
    for (const LayerTrace& tr : r.trace) {
      ok = ok && tr.vision_before_attn == vision && tr.vision_after_attn == vision &&
           tr.vision_after_ffn == vision;
    }
    violations += !ok;
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = std::to_string(kFrozenRuns) + " seeded runs, " + std::to_string(violations) +
             " with a vision row differing from its input";
  return o;
}

Outcome parallel_decoupling() {
  std::mt19937_64 rng(0xDEC0);
  double worst = 0.0;
  int kv_changed = 0;
  const int runs = 50;
  for (int i = 0; i < runs; ++i) {
    const std::size_t layers = uniform_index(rng, 1, 6);
    const Weights w = init_model(ModelConfig::toy(layers, 2, 16, 32), rng());
    const Matrix vision = random_matrix(uniform_index(rng, 1, 16), 16, rng);
    const Matrix text = random_matrix(uniform_index(rng, 1, 9), 16, rng);
    const PolicySchedule s = random_frozen_schedule(layers, rng);
    const VisualKvSet kv = precompute_visual_kv(w, vision, s);
    worst = std::max(worst, max_abs_diff(forward_vica_fast(w, kv, text, s).logits,
                                          forward(w, vision, text, s).logits));
    // A different prompt: the interleaved run changes, the visual KV does not.
    const Matrix other = random_matrix(text.rows() + 1, 16, rng);
    const VisualKvSet again = precompute_visual_kv(w, vision, s);
    kv_changed += !(again == kv);
    worst = std::max(worst, max_abs_diff(forward_vica_fast(w, again, other, s).logits,
                                          forward(w, vision, other, s).logits));
  }
  Outcome o;
  o.pass = worst <= kDecoupleTol && kv_changed == 0;
  o.detail = std::to_string(runs) + " instances, max |precomputed - interleaved| " +
             fmt("%.3e", worst) + ", visual KV changed by text in " + std::to_string(kv_changed);
  return o;
}

Outcome diagnostics_correctness() {
  std::mt19937_64 rng(0xD1A6);
  int self_nonzero = 0, negative = 0;
  for (int i = 0; i < kKlPairs; ++i) {
    const std::size_t n = uniform_index(rng, 1, 64);
    const auto p = vica::testing::random_distribution(n, rng, 0.25);
    const auto q = smooth_floor(vica::testing::random_distribution(n, rng, 0.25));
    self_nonzero += kl_divergence(p, p) != 0.0;
    negative += !(kl_divergence(p, q) >= 0.0);
  }
  const std::vector<double> a{1.0, 0.0}, b{0.5, 0.5}, c{0.9, 0.1};
  const double e1 = std::abs(kl_divergence(a, b) - std::log(2.0));
  const double e2 = std::abs(kl_divergence(b, c) - (0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(5.0)));
  const double e2_printed = std::abs(kl_divergence(b, c) - 0.510826);

  double cos_dev = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Matrix x = random_matrix(uniform_index(rng, 1, 8), uniform_index(rng, 1, 16), rng);
    const Matrix y = random_matrix(x.rows(), x.cols(), rng);
    Matrix sx = x, sy = y;
    const double kx = std::exp(std::uniform_real_distribution<double>(-6, 6)(rng));
    const double ky = std::exp(std::uniform_real_distribution<double>(-6, 6)(rng));
    for (double& v : sx.values()) v *= kx;
    for (double& v : sy.values()) v *= ky;
    cos_dev = std::max(cos_dev, std::abs(cosine_change(x, y).mean_change -
                                         cosine_change(sx, sy).mean_change));
  }

  // Constructed reachability: reads only at layer 0, and writes that only
  // feed text-only layers.
  int reach_nonzero = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<SweepInput> batch;
    for (int i = 0; i < 3; ++i) batch.push_back({random_matrix(5, 8, rng), random_matrix(4, 8, rng)});
    SweepOptions reads;
    reads.base_schedule = PolicySchedule::parse("VTT");
    const ImpactReport r = layer_sweep(init_model(ModelConfig::toy(3, 2, 8, 16), seed), batch,
                                       PathKind::kT2vRead, reads);
    reach_nonzero += r.per_layer[1].kl != 0.0;
    reach_nonzero += r.per_layer[2].kl != 0.0;
    SweepOptions writes;
    writes.base_schedule = PolicySchedule::parse("BBTT");
    for (PathKind k : {PathKind::kVisAttnWrite, PathKind::kVisFfnWrite}) {
      const ImpactReport wr =
          layer_sweep(init_model(ModelConfig::toy(4, 2, 8, 16), seed), batch, k, writes);
      for (std::size_t l = 1; l < 4; ++l) reach_nonzero += wr.per_layer[l].kl != 0.0;
    }
  }

  Outcome o;
  o.pass = self_nonzero == 0 && negative == 0 && e1 <= kClosedFormTol &&
           e2 <= kClosedFormTol && e2_printed <= 1e-6 && cos_dev <= kCosScaleTol &&
           reach_nonzero == 0;
  o.detail = "KL(p,p)!=0: " + std::to_string(self_nonzero) + ", KL<0: " + std::to_string(negative) +
             "/" + std::to_string(kKlPairs) + fmt(", closed forms off by %.1e/%.1e", e1, e2) +
             fmt(", cos scale dev %.1e", cos_dev) + ", unreachable nonzero KL: " +
             std::to_string(reach_nonzero);
  return o;
}

Outcome mac_cross_check() {
  struct Case {
    const char* model;
    const char* schedule;
  };
  double worst = 0.0;
  std::string worst_at;
  for (const Case c : {Case{"llava3b", "vica3b"}, Case{"llava7b", "vica7b"},
                       Case{"llava13b", "vica13b"}}) {
    const ModelConfig m = ModelConfig::preset(c.model);
    const CostInputs ci = CostInputs::from_model(m);
    const PolicySchedule vica = PolicySchedule::preset(c.schedule, m.n_layers);
    const harness::MacCounts macs = harness::count_macs(m, vica, ci.n, ci.t());
    const double base_dev =
        std::abs(2.0 * static_cast<double>(macs.baseline) / static_cast<double>(total_flops(ci)) - 1.0);
    const double vica_dev = std::abs(2.0 * static_cast<double>(macs.vica_coupled()) /
                                         static_cast<double>(schedule_total_flops(vica, ci)) -
                                     1.0);
    if (base_dev > worst) {
      worst = base_dev;
      worst_at = std::string(c.model) + " baseline";
    }
    if (vica_dev > worst) {
      worst = vica_dev;
      worst_at = std::string(c.model) + " " + c.schedule;
    }
  }
  Outcome o;
  o.pass = worst <= kMacTol;
  o.detail = "3 presets x {baseline, ViCA}, worst deviation " + fmt("%.3f%%", 100 * worst) +
             " (" + worst_at + ")";
  return o;
}

Outcome desk_speed(std::size_t reps) {
  harness::ExperimentConfig cfg = harness::ExperimentConfig::defaults(harness::Mode::kBench);
  cfg.reps = reps;
  cfg.warmup = 0;
  const harness::BenchResult r = harness::run_bench_measure(cfg);
  Outcome o;
  o.pass = r.mac_ratio <= kSpeedMacRatio && r.median_vica_coupled_ms < r.median_baseline_ms;
  o.detail = fmt("multiply ratio %.2f%% (cost model %.2f%%)", 100 * r.mac_ratio,
                 100 * r.cost_model_ratio) +
             fmt(", median %.1f ms vs %.1f ms baseline", r.median_vica_coupled_ms,
                 r.median_baseline_ms) +
             ", " + std::to_string(reps) + " reps";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t reps = 3;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--reps") == 0 && i + 1 < argc) {
      reps = static_cast<std::size_t>(std::stoul(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: %s [--reps N]\n", argv[0]);
      return 2;
    }
  }

  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"golden cost numbers", golden_numbers},
      {"three-way equivalence", three_way_equivalence},
      {"mask semantics", mask_semantics},
      {"frozen-write invariant", frozen_writes},
      {"parallel decoupling", parallel_decoupling},
      {"diagnostics correctness", diagnostics_correctness},
      {"instrumented MACs vs cost model", mac_cross_check},
      {"desk-scale speed", [reps] { return desk_speed(reps); }},
  };

  int failed = 0;
  int index = 1;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", index++, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
