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

// Experiment configuration, runners and report emission behind the `vica`
// command-line tool.

#ifndef VICA_HARNESS_HPP_
#define VICA_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vica/costmodel.hpp"
#include "vica/diagnostics.hpp"
#include "vica/model.hpp"
#include "vica/pruning.hpp"
#include "vica/schedule.hpp"

namespace vica::harness {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kOutDirEnv = "VICA_OUT_DIR";

enum class Mode { kCost, kDiagnose, kEquivalence, kBench };

std::string mode_name(Mode m);

// ---------------------------------------------------------------------------
// Configuration. Grammar (see docs/formats.md):
//
//   line    := blank | comment | setting
//   comment := '#' anything
//   setting := key '=' value      (whitespace around both is trimmed)
//
// Unknown keys and malformed values raise ConfigError.

struct ExperimentConfig {
  Mode mode = Mode::kCost;

  // Geometry: a preset name ("llava3b", "llava7b", "llava13b", "toy") with
  // optional explicit overrides.
  std::string preset = "llava7b";
  std::optional<std::size_t> n_layers, n_heads, d_model, d_ffn, vocab;

  // Preset schedule name or one B/F/V/T code per layer. For diagnose this is
  // the base schedule every ablation run starts from (no drop events).
  std::string schedule = "baseline";
  // Explicit drop events replace the schedule's own ("1:0.75,7:0.75").
  std::optional<std::vector<DropEvent>> drops;
  DropTiming drop_timing = DropTiming::kAtEntry;
  ImportanceScorer scorer = ImportanceScorer::kLastQuery;

  std::size_t n = kDefaultVisionTokens;
  std::size_t t_s = kDefaultSystemTokens;
  std::size_t t_q = kDefaultQuestionTokens;

  std::uint64_t seed = 0;
  std::string out_dir = "vica_out";

  // cost
  bool golden = false;

  // diagnose
  std::size_t batch = 4;
  std::vector<PathKind> paths = {PathKind::kVisAttnWrite, PathKind::kVisFfnWrite,
                                 PathKind::kT2vRead};
  std::size_t essential_k = 2;

  // equivalence
  std::vector<std::size_t> grid_n = {0, 1, 4, 8, 16};
  std::vector<std::size_t> grid_t = {1, 2, 5, 9};
  std::vector<std::size_t> grid_d = {8, 16, 32};
  std::vector<std::size_t> grid_heads = {1, 2, 4};
  std::vector<std::size_t> grid_layers = {1, 2, 4};
  double tolerance = 1e-10;
  bool self_test = false;

  // bench
  std::size_t warmup = 1;
  std::size_t reps = 5;
  std::string vica_schedule = "vica7b";
  double mac_tolerance = 0.05;
  // Headline ViCA timing excludes the visual KV precompute (it can run in
  // parallel with the text backbone). Both numbers are always reported.
  bool decoupled = false;

  // Mode-specific defaults (toy geometry for diagnose, scaled geometry for
  // bench, ...).
  static ExperimentConfig defaults(Mode mode);

  ModelConfig model() const;
  PolicySchedule policy() const;  // resolved against model().n_layers
  CostInputs cost_inputs() const;

  // Sorted key=value lines; parsing it back yields an equal config.
  std::string canonical() const;
  std::uint64_t hash() const;  // FNV-1a 64 of canonical()
};

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
void parse_config(std::istream& in, ExperimentConfig& cfg);
void load_config_file(const std::filesystem::path& path, ExperimentConfig& cfg);
// Every key apply_setting accepts.
std::vector<std::string> config_keys();

std::uint64_t fnv1a64(const std::string& text);

// Explicit config value, then $VICA_OUT_DIR, then the default.
std::filesystem::path resolve_out_dir(const ExperimentConfig& cfg, bool explicit_out);

// ---------------------------------------------------------------------------
// Reports.

// Writes `content` to dir/name, creating dir. Returns the path.
std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name,
                                 const std::string& content);

// manifest.json: mode, version, seed, config hash, canonical config, outputs.
std::string manifest_json(const ExperimentConfig& cfg, const std::vector<std::string>& outputs);

std::string cost_report_json(const CostReport& r);
std::string cost_report_table(const CostReport& r);
// e.g. "0.31 TFLOPs (4.1%)"
std::string headline(const CostReport& r);

// ---------------------------------------------------------------------------
// Golden manifest.

enum class GoldenUnit { kTflops, kPercent, kCount, kRatio };

struct GoldenEntry {
  std::string id;
  std::string source;  // where the reference value is reported
  double expected = 0.0;
  double tolerance = 0.0;  // absolute, in the entry's unit
  GoldenUnit unit = GoldenUnit::kTflops;
};

struct GoldenResult {
  GoldenEntry entry;
  double actual = 0.0;
  bool pass = false;
};

const std::vector<GoldenEntry>& golden_manifest();
std::vector<GoldenResult> check_golden();
std::string format_golden(const GoldenResult& r);

// ---------------------------------------------------------------------------
// Runners. Each returns an exit code and prints a human summary to `out`.

int run_cost(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out);
int run_diagnose(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                 std::ostream& out);

struct EquivalenceCase {
  std::size_t n = 0, t = 0, d = 0, heads = 0, layers = 0;
  std::string schedule;  // baseline, freezevis, vica_sparse, textonly
  std::string codes;
  double policy_vs_oracle = 0.0;
  std::optional<double> fast_vs_oracle;  // absent for Baseline schedules
  bool pass = false;

  std::string tuple() const;
};

struct EquivalenceSummary {
  std::vector<EquivalenceCase> cases;
  double max_deviation = 0.0;
  std::size_t failures = 0;
};

// Schedule used by the grid for one of the four schedule families.
PolicySchedule equivalence_schedule(const std::string& family, std::size_t n_layers);
EquivalenceSummary run_equivalence_grid(const ExperimentConfig& cfg);
int run_equivalence(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                    std::ostream& out);

struct MacCounts {
  std::uint64_t baseline = 0;
  std::uint64_t vica_precompute = 0;
  std::uint64_t vica_prefill = 0;  // fast path without precompute
  std::uint64_t text_only = 0;

  std::uint64_t vica_coupled() const { return vica_precompute + vica_prefill; }
};

// Instrumented multiply-accumulate counts from shape-only forwards.
MacCounts count_macs(const ModelConfig& model, const PolicySchedule& vica_schedule, std::size_t n,
                     std::size_t t);

struct BenchResult {
  MacCounts macs;
  double mac_ratio = 0.0;        // vica coupled / baseline
  double cost_model_ratio = 0.0; // schedule total / baseline total
  double ratio_deviation = 0.0;  // |mac_ratio / cost_model_ratio - 1|
  double median_baseline_ms = 0.0;
  double median_vica_coupled_ms = 0.0;
  double median_vica_decoupled_ms = 0.0;
  double median_precompute_ms = 0.0;
  double median_text_only_ms = 0.0;
  bool ratio_ok = false;
};

BenchResult run_bench_measure(const ExperimentConfig& cfg);
int run_bench(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out);

// Human listing of model presets and schedule names.
std::string presets_listing();

}  // namespace vica::harness

#endif  // VICA_HARNESS_HPP_
