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
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vica/errors.hpp"
#include "vica/harness.hpp"

namespace vica::harness {

using nlohmann::ordered_json;

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name,
                                 const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto path = dir / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw ConfigError("cannot write " + path.string());
  return path;
}

std::string manifest_json(const ExperimentConfig& cfg, const std::vector<std::string>& outputs) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(cfg.hash()));
  ordered_json j;
  j["tool"] = "vica";
  j["version"] = kVersion;
  j["mode"] = mode_name(cfg.mode);
  j["seed"] = cfg.seed;
  j["config_hash"] = hash;
  j["config"] = cfg.canonical();
  j["outputs"] = outputs;
  return j.dump(2) + "\n";
}

namespace {

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json flops_entry(Flops f) {
  ordered_json j;
  j["flops"] = f;
  j["tflops"] = format_tflops(f);
  return j;
}

std::string pct_text(const std::optional<double>& v, int decimals = 1) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f%%", decimals, 100.0 * *v);
  return buf;
}

}  // namespace

std::string cost_report_json(const CostReport& r) {
  ordered_json j;
  j["preset"] = r.preset;
  j["schedule"] = r.schedule;
  const CostInputs& ci = r.inputs;
  j["inputs"] = {{"n_layers", ci.n_layers}, {"d", ci.d},         {"m", ci.m},
                 {"n", ci.n},               {"t_s", ci.t_s},     {"t_q", ci.t_q},
                 {"t", ci.t()},             {"n_retained", r.n_retained}};

  ordered_json base;
  base["vis_projector"] = flops_entry(r.baseline_vision.projector);
  base["vis_qkv"] = flops_entry(r.baseline_vision.qkv);
  base["vis_ffn"] = flops_entry(r.baseline_vision.ffn);
  base["vis_total"] = flops_entry(r.baseline_vision.total);
  base["total"] = flops_entry(r.baseline_total);
  base["vis_ratio"] = optional_number(r.baseline_vis_ratio);
  base["vis_update"] = flops_entry(r.visual_update.update);
  base["vis_update_remainder"] = flops_entry(r.visual_update.remainder);
  base["vis_update_ratio"] = optional_number(r.visual_update.ratio);
  j["baseline"] = base;

  ordered_json sched;
  sched["vis_total"] = flops_entry(r.vis_total);
  sched["total"] = flops_entry(r.total);
  sched["vis_relative"] = optional_number(r.vis_relative);
  sched["vis_ratio"] = optional_number(r.vis_ratio);
  sched["equivalent_tokens"] = r.equivalent_tokens.rounded;
  sched["equivalent_tokens_exact"] = r.equivalent_tokens.exact;
  sched["kv_cache_fraction"] = optional_number(r.kv_cache_fraction);
  sched["mean_vision_tokens"] = r.mean_vision_tokens;
  sched["projector_to_cross_ratio"] = optional_number(r.projector_to_cross_ratio);
  j["schedule_cost"] = sched;
  return j.dump(2) + "\n";
}

std::string headline(const CostReport& r) {
  return format_tflops(r.vis_total) + " TFLOPs (" + pct_text(r.vis_relative) + ")";
}

std::string cost_report_table(const CostReport& r) {
  std::ostringstream out;
  const CostInputs& ci = r.inputs;
  char buf[160];
  std::snprintf(buf, sizeof buf, "preset %s, schedule %s (n=%zu, t_s=%zu, t_q=%zu, L=%zu, d=%zu, m=%zu)\n",
                r.preset.c_str(), r.schedule.c_str(), ci.n, ci.t_s, ci.t_q, ci.n_layers, ci.d, ci.m);
  out << buf;
  const auto row = [&](const char* label, const std::string& value) {
    std::snprintf(buf, sizeof buf, "  %-34s %14s\n", label, value.c_str());
    out << buf;
  };
  const auto tf = [](Flops f) { return format_tflops(f) + " TF"; };
  out << "baseline\n";
  row("vision projector", tf(r.baseline_vision.projector));
  row("vision QK^T V", tf(r.baseline_vision.qkv));
  row("vision FFN", tf(r.baseline_vision.ffn));
  row("vision total", tf(r.baseline_vision.total));
  row("total", tf(r.baseline_total));
  row("vision share of total", pct_text(r.baseline_vis_ratio));
  row("visual update", tf(r.visual_update.update));
  row("visual update share", pct_text(r.visual_update.ratio));
  out << "schedule\n";
  row("vision", headline(r));
  row("total", tf(r.total));
  row("equivalent vision tokens", std::to_string(r.equivalent_tokens.rounded));
  row("vision KV-cache", pct_text(r.kv_cache_fraction));
  std::snprintf(buf, sizeof buf, "%.2f", r.mean_vision_tokens);
  row("mean vision tokens per layer", buf);
  if (r.projector_to_cross_ratio) {
    std::snprintf(buf, sizeof buf, "%.1f:1", *r.projector_to_cross_ratio);
    row("KV projection : cross-attention", buf);
  }
  return out.str();
}

std::string presets_listing() {
  std::ostringstream out;
  out << "model presets (layers, heads, d_model, d_ffn):\n";
  char buf[128];
  for (const ModelConfig& c : ModelConfig::presets()) {
    std::snprintf(buf, sizeof buf, "  %-10s %4zu %4zu %6zu %6zu\n", c.name.c_str(), c.n_layers,
                  c.n_heads, c.d_model, c.d_ffn);
    out << buf;
  }
  out << "  toy        (explicit geometry; defaults 4 2 16 32)\n";
  out << "schedules:\n";
  for (const std::string& name : PolicySchedule::preset_names()) out << "  " << name << "\n";
  out << "  or one mode code per layer: B (baseline), F (freeze vision), V (cross), T (text only)\n";
  return out.str();
}

}  // namespace vica::harness
