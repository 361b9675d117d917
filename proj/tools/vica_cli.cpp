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

// vica: cost | diagnose | equivalence | bench | presets
//
// Settings are applied in order: mode defaults, --config file, --set
// key=value overrides, then the dedicated flags. Exit codes: 0 pass,
// 1 verification failure, 2 configuration error.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vica/errors.hpp"
#include "vica/harness.hpp"

namespace {

using vica::harness::ExperimentConfig;
using vica::harness::Mode;

struct CommonFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::string> out_dir;
  std::optional<std::string> preset, schedule;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n, t_s, t_q;
  bool golden = false;
  bool self_test = false;
  bool decoupled = false;
  std::optional<std::size_t> reps, warmup;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_file, "Flat key = value config file");
  sub->add_option("--set", f.sets, "Override one setting (key=value); repeatable");
  sub->add_option("--out", f.out_dir, "Output directory (overrides $VICA_OUT_DIR)");
  sub->add_option("--preset", f.preset, "Model preset (llava3b, llava7b, llava13b, toy)");
  sub->add_option("--schedule", f.schedule, "Schedule name or per-layer B/F/V/T codes");
  sub->add_option("--seed", f.seed, "Random seed");
  sub->add_option("--n", f.n, "Vision tokens");
  sub->add_option("--t-s", f.t_s, "System-prompt tokens");
  sub->add_option("--t-q", f.t_q, "Question tokens");
}

ExperimentConfig build_config(Mode mode, const CommonFlags& f) {
  ExperimentConfig cfg = ExperimentConfig::defaults(mode);
  if (!f.config_file.empty()) vica::harness::load_config_file(f.config_file, cfg);
  cfg.mode = mode;
  for (const std::string& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw vica::ConfigError("--set expects key=value, got '" + s + "'");
    vica::harness::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (f.preset) cfg.preset = *f.preset;
  if (f.schedule) cfg.schedule = *f.schedule;
  if (f.seed) cfg.seed = *f.seed;
  if (f.n) cfg.n = *f.n;
  if (f.t_s) cfg.t_s = *f.t_s;
  if (f.t_q) cfg.t_q = *f.t_q;
  if (f.golden) cfg.golden = true;
  if (f.self_test) cfg.self_test = true;
  if (f.decoupled) cfg.decoupled = true;
  if (f.reps) cfg.reps = *f.reps;
  if (f.warmup) cfg.warmup = *f.warmup;
  if (f.out_dir) cfg.out_dir = *f.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ViCA engine: cost model, diagnostics, equivalence checks, benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", vica::harness::kVersion);

  std::map<std::string, CommonFlags> flags;
  const std::vector<std::pair<std::string, std::string>> modes = {
      {"cost", "FLOPs / KV-cache report for a preset and schedule"},
      {"diagnose", "Layerwise KL and 1-cos impact sweep on a seeded toy model"},
      {"equivalence", "Oracle vs policy engine vs fast path agreement grid"},
      {"bench", "Desk-scale prefill timing and instrumented multiply counts"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : modes) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, flags[name]);
    subs[name] = sub;
  }
  subs["cost"]->add_flag("--golden", flags["cost"].golden,
                         "Check every embedded reference value; exit 1 on mismatch");
  subs["equivalence"]->add_flag("--self-test", flags["equivalence"].self_test,
                                "Corrupt one fast-path KV entry; the run must FAIL");
  subs["bench"]->add_flag("--decoupled", flags["bench"].decoupled,
                          "Headline ViCA timing excludes the visual KV precompute");
  subs["bench"]->add_option("--reps", flags["bench"].reps, "Timed repetitions");
  subs["bench"]->add_option("--warmup", flags["bench"].warmup, "Untimed warmup runs");
  CLI::App* presets = app.add_subcommand("presets", "List model presets and schedules");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : vica::harness::kExitConfig;
  }

  try {
    if (presets->parsed()) {
      std::cout << vica::harness::presets_listing();
      return vica::harness::kExitPass;
    }
    const std::map<std::string, Mode> mode_of = {{"cost", Mode::kCost},
                                                 {"diagnose", Mode::kDiagnose},
                                                 {"equivalence", Mode::kEquivalence},
                                                 {"bench", Mode::kBench}};
    for (const auto& [name, mode] : mode_of) {
      if (!subs[name]->parsed()) continue;
      const CommonFlags& f = flags[name];
      const ExperimentConfig cfg = build_config(mode, f);
      const auto out_dir = vica::harness::resolve_out_dir(cfg, f.out_dir.has_value());
      switch (mode) {
        case Mode::kCost: return vica::harness::run_cost(cfg, out_dir, std::cout);
        case Mode::kDiagnose: return vica::harness::run_diagnose(cfg, out_dir, std::cout);
        case Mode::kEquivalence: return vica::harness::run_equivalence(cfg, out_dir, std::cout);
        case Mode::kBench: return vica::harness::run_bench(cfg, out_dir, std::cout);
      }
    }
  } catch (const vica::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return vica::harness::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return vica::harness::kExitFail;
  }
  return vica::harness::kExitConfig;
}
