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

#include "vica/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "vica/errors.hpp"

namespace vica {

CosineChange cosine_change(const Matrix& before, const Matrix& after) {
  if (before.rows() != after.rows() || before.cols() != after.cols()) {
    throw ShapeError("cosine_change: " + before.shape_string() + " vs " + after.shape_string());
  }
  CosineChange out;
  out.per_token.resize(before.rows());
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t r = 0; r < before.rows(); ++r) {
    const auto a = before.row(r);
    const auto b = after.row(r);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
      dot += a[c] * b[c];
      na += a[c] * a[c];
      nb += b[c] * b[c];
    }
    if (na == 0.0 || nb == 0.0) {
      ++out.skipped_rows;
      continue;
    }
    // Rounding can push |cos| a hair past 1.
    const double cos = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    out.per_token[r] = cos;
    sum += cos;
    ++used;
  }
  if (used > 0) {
    out.mean_cos = sum / static_cast<double>(used);
    out.mean_change = 1.0 - out.mean_cos;
  }
  return out;
}

namespace {

void check_distribution(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ContractViolation(std::string("kl_divergence: negative entry in ") + name);
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
    throw ContractViolation(std::string("kl_divergence: ") + name + " sums to " +
                            std::to_string(sum));
  }
}

}  // namespace

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("kl_divergence: length mismatch");
  check_distribution(p, "p");
  check_distribution(q, "p_prime");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      throw ContractViolation("kl_divergence: p_prime is zero where p is not; smooth it first");
    }
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

std::vector<double> smooth_floor(std::span<const double> p, double floor) {
  std::vector<double> out(p.begin(), p.end());
  if (std::none_of(out.begin(), out.end(), [&](double v) { return v < floor; })) return out;
  for (double& v : out) v = std::max(v, floor);
  const double sum = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::string ImpactReport::to_csv() const {
  std::string out = "layer,kl,one_minus_cos\n";
  char buf[128];
  for (const LayerImpact& li : per_layer) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", li.layer, li.kl, li.one_minus_cos);
    out += buf;
  }
  return out;
}

std::string ImpactReport::to_json() const {
  nlohmann::ordered_json j;
  j["path"] = path_kind_name(path);
  j["per_layer"] = nlohmann::ordered_json::array();
  for (const LayerImpact& li : per_layer) {
    j["per_layer"].push_back({{"layer", li.layer},
                              {"kl", li.kl},
                              {"one_minus_cos", li.one_minus_cos},
                              {"skipped_rows", li.skipped_rows}});
  }
  j["ranking"] = ranking;
  return j.dump(2) + "\n";
}

namespace {

std::vector<double> final_distribution(const ForwardResult& r) {
  const Matrix& logits = r.logits;
  return softmax(logits.row(logits.rows() - 1));
}

// Pools cosine values over rows and samples.
struct CosAccumulator {
  double sum = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;

  void add(const Matrix& before, const Matrix& after) {
    const CosineChange c = cosine_change(before, after);
    for (const auto& v : c.per_token) {
      if (v) {
        sum += *v;
        ++used;
      }
    }
    skipped += c.skipped_rows;
  }
  double change() const { return used == 0 ? 0.0 : 1.0 - sum / static_cast<double>(used); }
};

}  // namespace

ImpactReport layer_sweep(const Weights& weights, const std::vector<SweepInput>& batch,
                         PathKind path, const SweepOptions& options) {
  if (batch.empty()) throw ContractViolation("layer_sweep needs a nonempty batch");
  const std::size_t n_layers = weights.config.n_layers;
  const AblationSet base_set = options.base_schedule.layers.empty()
                                   ? AblationSet{}
                                   : ablation_for_schedule(options.base_schedule);
  if (!options.base_schedule.layers.empty() && options.base_schedule.size() != n_layers) {
    throw ConfigError("sweep base schedule does not match the model depth");
  }

  ForwardOptions fo;
  fo.record_hidden = true;
  std::vector<ForwardResult> base_runs;
  std::vector<std::vector<double>> base_dists;
  for (const SweepInput& in : batch) {
    base_runs.push_back(forward_baseline_masked_oracle(weights, in.vision, in.text, base_set, fo));
    base_dists.push_back(smooth_floor(final_distribution(base_runs.back())));
  }

  ImpactReport report;
  report.path = path;
  for (std::size_t l = 0; l < n_layers; ++l) {
    AblationSet disabled = base_set;
    disabled.insert({path, l});
    double kl_sum = 0.0;
    CosAccumulator cos;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const ForwardResult ablated =
          forward_baseline_masked_oracle(weights, batch[b].vision, batch[b].text, disabled, fo);
      // Both sides go through the same smoothing so identical runs give 0.
      const std::vector<double> q = smooth_floor(final_distribution(ablated));
      kl_sum += kl_divergence(base_dists[b], q);

      const LayerTrace& bt = base_runs[b].trace[l];
      switch (path) {
        case PathKind::kVisAttnWrite:
          cos.add(bt.vision_before_attn, bt.vision_after_attn);
          break;
        case PathKind::kVisFfnWrite:
          cos.add(bt.vision_after_attn, bt.vision_after_ffn);
          break;
        case PathKind::kT2vRead:
          cos.add(bt.text_after_attn, ablated.trace[l].text_after_attn);
          break;
      }
    }
    report.per_layer.push_back({l, kl_sum / static_cast<double>(batch.size()), cos.change(),
                                cos.skipped});
  }

  report.ranking.resize(n_layers);
  std::iota(report.ranking.begin(), report.ranking.end(), 0);
  std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](std::size_t a, std::size_t b) {
    return report.per_layer[a].kl > report.per_layer[b].kl;
  });
  return report;
}

RegimePartition partition_regimes(const ImpactReport& report, std::size_t k) {
  const std::size_t n = report.per_layer.size();
  if (k > n) {
    throw ContractViolation("partition_regimes: k=" + std::to_string(k) + " exceeds " +
                            std::to_string(n) + " layers");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.per_layer[a].kl > report.per_layer[b].kl;
  });
  RegimePartition out;
  std::vector<bool> chosen(n, false);
  for (std::size_t i = 0; i < k; ++i) chosen[order[i]] = true;
  for (std::size_t i = 0; i < n; ++i) {
    (chosen[i] ? out.essential : out.non_essential).push_back(report.per_layer[i].layer);
  }
  return out;
}

}  // namespace vica
