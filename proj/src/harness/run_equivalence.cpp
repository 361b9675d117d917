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

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <ostream>
#include <random>
#include <thread>

#include "json.hpp"
#include "vica/errors.hpp"
#include "vica/harness.hpp"

namespace vica::harness {
namespace {

const char* const kFamilies[] = {"baseline", "freezevis", "vica_sparse", "textonly"};

struct CaseSpec {
  std::size_t n, t, d, heads, layers;
  std::string family;
  bool corrupt = false;
};

EquivalenceCase run_case(const CaseSpec& spec, std::uint64_t seed, double tolerance) {
  EquivalenceCase c;
  c.n = spec.n;
  c.t = spec.t;
  c.d = spec.d;
  c.heads = spec.heads;
  c.layers = spec.layers;
  c.schedule = spec.family;
  const PolicySchedule schedule = equivalence_schedule(spec.family, spec.layers);
  c.codes = schedule.codes();

  const std::uint64_t case_seed = seed ^ fnv1a64(c.tuple());
  const Weights w = init_model(ModelConfig::toy(spec.layers, spec.heads, spec.d, 2 * spec.d),
                               case_seed);
  std::mt19937_64 rng(case_seed + 1);
  const Matrix vision = Matrix::random_normal(spec.n, spec.d, rng);
  const Matrix text = Matrix::random_normal(spec.t, spec.d, rng);

  const ForwardResult oracle =
      forward_baseline_masked_oracle(w, vision, text, ablation_for_schedule(schedule));
  const ForwardResult policy = forward(w, vision, text, schedule);
  c.policy_vs_oracle = max_abs_diff(policy.logits, oracle.logits);
  c.pass = c.policy_vs_oracle <= tolerance;

  if (!schedule.has_baseline_layers()) {
    VisualKvSet kv = precompute_visual_kv(w, vision, schedule);
    if (spec.corrupt) kv.keys.front()(0, 0) += 1.0;
    const ForwardResult fast = forward_vica_fast(w, kv, text, schedule);
    c.fast_vs_oracle = max_abs_diff(fast.logits, oracle.logits);
    c.pass = c.pass && *c.fast_vs_oracle <= tolerance;
  }
  return c;
}

}  // namespace

std::string EquivalenceCase::tuple() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "(n=%zu, t=%zu, d=%zu, heads=%zu, layers=%zu, schedule=%s[%s])", n,
                t, d, heads, layers, schedule.c_str(), codes.c_str());
  return buf;
}

PolicySchedule equivalence_schedule(const std::string& family, std::size_t n_layers) {
  if (family == "baseline") return PolicySchedule::uniform(LayerMode::kBaseline, n_layers);
  if (family == "freezevis") return PolicySchedule::uniform(LayerMode::kFreezeVis, n_layers);
  if (family == "textonly") return PolicySchedule::uniform(LayerMode::kTextOnly, n_layers);
  if (family == "vica_sparse") {
    // Cross-attention at the last layer and, from three layers on, the first:
    // V, TV, VTV, VTTV, ...
    std::vector<std::size_t> retained = {n_layers - 1};
    if (n_layers >= 3) retained.push_back(0);
    return PolicySchedule::vica(n_layers, retained);
  }
  throw ConfigError("unknown equivalence schedule family '" + family + "'");
}

EquivalenceSummary run_equivalence_grid(const ExperimentConfig& cfg) {
  std::vector<CaseSpec> specs;
  bool corrupted = false;
  for (std::size_t n : cfg.grid_n) {
    for (std::size_t t : cfg.grid_t) {
      for (std::size_t d : cfg.grid_d) {
        for (std::size_t heads : cfg.grid_heads) {
          if (heads == 0 || d % heads != 0) continue;
          for (std::size_t layers : cfg.grid_layers) {
            for (const char* family : kFamilies) {
              CaseSpec s{n, t, d, heads, layers, family};
              // The self-test corrupts exactly one fast-path case.
              if (cfg.self_test && !corrupted && n > 0 && s.family == "vica_sparse") {
                s.corrupt = true;
                corrupted = true;
              }
              specs.push_back(std::move(s));
            }
          }
        }
      }
    }
  }
  if (cfg.self_test && !corrupted) {
    throw ConfigError("self_test needs a grid case with n > 0 to corrupt");
  }
  if (cfg.grid_t.end() != std::find(cfg.grid_t.begin(), cfg.grid_t.end(), 0u)) {
    throw ConfigError("grid_t must not contain 0");
  }

  EquivalenceSummary summary;
  summary.cases.resize(specs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      summary.cases[i] = run_case(specs[i], cfg.seed, cfg.tolerance);
    }
  };
  const std::size_t n_threads =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  std::vector<std::thread> threads;
  for (std::size_t i = 1; i < n_threads; ++i) threads.emplace_back(worker);
  worker();
  for (auto& th : threads) th.join();

  for (const EquivalenceCase& c : summary.cases) {
    summary.max_deviation = std::max(summary.max_deviation, c.policy_vs_oracle);
    if (c.fast_vs_oracle) summary.max_deviation = std::max(summary.max_deviation, *c.fast_vs_oracle);
    if (!c.pass) ++summary.failures;
  }
  return summary;
}

int run_equivalence(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                    std::ostream& out) {
  const EquivalenceSummary summary = run_equivalence_grid(cfg);

  nlohmann::ordered_json j;
  j["tolerance"] = cfg.tolerance;
  j["self_test"] = cfg.self_test;
  j["cases"] = summary.cases.size();
  j["failures"] = summary.failures;
  j["max_deviation"] = summary.max_deviation;
  j["per_case"] = nlohmann::ordered_json::array();
  for (const EquivalenceCase& c : summary.cases) {
    j["per_case"].push_back(
        {{"n", c.n},
         {"t", c.t},
         {"d", c.d},
         {"heads", c.heads},
         {"layers", c.layers},
         {"schedule", c.schedule},
         {"codes", c.codes},
         {"policy_vs_oracle", c.policy_vs_oracle},
         {"fast_vs_oracle", c.fast_vs_oracle ? nlohmann::ordered_json(*c.fast_vs_oracle)
                                             : nlohmann::ordered_json(nullptr)},
         {"pass", c.pass}});
  }
  write_file(out_dir, "equivalence.json", j.dump(2) + "\n");
  write_file(out_dir, "manifest.json", manifest_json(cfg, {"equivalence.json"}));

  char buf[96];
  std::snprintf(buf, sizeof buf, "%.3e", summary.max_deviation);
  if (summary.failures == 0) {
    out << "PASS: " << summary.cases.size() << " cases, max |logit deviation| " << buf << "\n";
    return kExitPass;
  }
  for (const EquivalenceCase& c : summary.cases) {
    if (c.pass) continue;
    std::snprintf(buf, sizeof buf, "policy %.3e, fast %.3e", c.policy_vs_oracle,
                  c.fast_vs_oracle.value_or(0.0));
    out << "FAIL " << c.tuple() << ": " << buf << "\n";
  }
  out << "FAIL: " << summary.failures << " of " << summary.cases.size() << " cases exceed "
      << cfg.tolerance << "\n";
  return kExitFail;
}

}  // namespace vica::harness
