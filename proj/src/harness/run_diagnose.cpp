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

#include <cstdio>
#include <ostream>
#include <random>

#include "json.hpp"
#include "vica/errors.hpp"
#include "vica/harness.hpp"

namespace vica::harness {

int run_diagnose(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                 std::ostream& out) {
  const ModelConfig model = cfg.model();
  if (cfg.essential_k > model.n_layers) {
    throw ConfigError("essential_k=" + std::to_string(cfg.essential_k) + " exceeds " +
                      std::to_string(model.n_layers) + " layers");
  }
  const Weights weights = init_model(model, cfg.seed);

  // Inputs come from a stream separate from the weights.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<SweepInput> batch;
  for (std::size_t b = 0; b < cfg.batch; ++b) {
    SweepInput in;
    in.vision = Matrix::random_normal(cfg.n, model.d_model, rng);
    in.text = Matrix::random_normal(cfg.t_s + cfg.t_q, model.d_model, rng);
    batch.push_back(std::move(in));
  }
  SweepOptions options;
  options.base_schedule = cfg.policy();

  std::vector<std::string> outputs;
  nlohmann::ordered_json regimes = nlohmann::ordered_json::object();
  for (PathKind path : cfg.paths) {
    const ImpactReport report = layer_sweep(weights, batch, path, options);
    const std::string stem = path_kind_name(path);
    write_file(out_dir, "impact_" + stem + ".csv", report.to_csv());
    write_file(out_dir, "impact_" + stem + ".json", report.to_json());

    std::string plot = "# layer\tkl\tone_minus_cos\n";
    char buf[128];
    for (const LayerImpact& li : report.per_layer) {
      std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\n", li.layer, li.kl, li.one_minus_cos);
      plot += buf;
    }
    write_file(out_dir, "plot_" + stem + ".tsv", plot);
    outputs.insert(outputs.end(),
                   {"impact_" + stem + ".csv", "impact_" + stem + ".json", "plot_" + stem + ".tsv"});

    const RegimePartition part = partition_regimes(report, cfg.essential_k);
    regimes[stem] = {{"k", cfg.essential_k},
                     {"essential", part.essential},
                     {"non_essential", part.non_essential}};

    out << stem << "\n  layer          kl   1-cos\n";
    for (const LayerImpact& li : report.per_layer) {
      std::snprintf(buf, sizeof buf, "  %5zu  %10.3e  %6.4f\n", li.layer, li.kl, li.one_minus_cos);
      out << buf;
    }
    out << "  essential (top " << cfg.essential_k << " by KL):";
    for (std::size_t l : part.essential) out << " " << l;
    out << "\n";
  }
  write_file(out_dir, "regimes.json", regimes.dump(2) + "\n");
  outputs.push_back("regimes.json");
  write_file(out_dir, "manifest.json", manifest_json(cfg, outputs));
  return kExitPass;
}

}  // namespace vica::harness
