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

#include "vica/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vica/errors.hpp"

namespace vica {

// ---------------------------------------------------------------------------
// Configuration

void ModelConfig::validate() const {
  if (n_layers == 0) throw ConfigError("model needs at least one layer");
  if (d_model == 0 || d_ffn == 0 || vocab == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("d_model=" + std::to_string(d_model) + " not divisible by n_heads=" +
                      std::to_string(n_heads));
  }
}

ModelConfig ModelConfig::toy(std::size_t n_layers, std::size_t n_heads, std::size_t d_model,
                             std::size_t d_ffn, std::size_t vocab) {
  ModelConfig c;
  c.name = "toy";
  c.n_layers = n_layers;
  c.n_heads = n_heads;
  c.d_model = d_model;
  c.d_ffn = d_ffn;
  c.vocab = vocab;
  c.max_positions = 1024;
  c.validate();
  return c;
}

std::vector<ModelConfig> ModelConfig::presets() {
  // Blocks / heads / hidden / FFN of MobileLLaMA-2.7B, Vicuna-7B, Vicuna-13B.
  return {
      {"llava3b", 32, 32, 2560, 6912, 32, 2048},
      {"llava7b", 32, 32, 4096, 11008, 32, 2048},
      {"llava13b", 40, 40, 5120, 13824, 32, 2048},
  };
}

ModelConfig ModelConfig::preset(const std::string& name) {
  for (const auto& c : presets()) {
    if (c.name == name) return c;
  }
  throw ConfigError("unknown model preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Weights

namespace {

Matrix make_matrix(bool shapes_only, std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                   double stddev) {
  return shapes_only ? Matrix::shape_only(rows, cols)
                     : Matrix::random_normal(rows, cols, rng, stddev);
}

Weights build_weights(const ModelConfig& config, std::uint64_t seed, bool shapes_only) {
  config.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config.d_model;
  const std::size_t m = config.d_ffn;
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d));

  Weights w;
  w.config = config;
  w.pos_emb = make_matrix(shapes_only, config.max_positions, d, rng, stddev);
  w.layers.reserve(config.n_layers);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    LayerWeights lw;
    lw.attn_norm.assign(d, 1.0);
    lw.wq = make_matrix(shapes_only, d, d, rng, stddev);
    lw.wk = make_matrix(shapes_only, d, d, rng, stddev);
    lw.wv = make_matrix(shapes_only, d, d, rng, stddev);
    lw.wo = make_matrix(shapes_only, d, d, rng, stddev);
    lw.ffn_norm.assign(d, 1.0);
    lw.w_gate = make_matrix(shapes_only, d, m, rng, stddev);
    lw.w_up = make_matrix(shapes_only, d, m, rng, stddev);
    lw.w_down = make_matrix(shapes_only, m, d, rng, stddev);
    w.layers.push_back(std::move(lw));
  }
  w.final_norm.assign(d, 1.0);
  w.lm_head = make_matrix(shapes_only, d, config.vocab, rng, stddev);
  return w;
}

}  // namespace

Weights init_model(const ModelConfig& config, std::uint64_t seed) {
  return build_weights(config, seed, false);
}

Weights shape_only_weights(const ModelConfig& config) { return build_weights(config, 0, true); }

std::vector<TensorInfo> weight_manifest(const Weights& w) {
  std::vector<TensorInfo> out;
  const auto mat = [&](const std::string& name, const Matrix& m) {
    out.push_back({name, {m.rows(), m.cols()}});
  };
  const auto vec = [&](const std::string& name, const std::vector<double>& v) {
    out.push_back({name, {v.size()}});
  };
  mat("pos_emb", w.pos_emb);
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    const LayerWeights& lw = w.layers[l];
    vec(p + "attn_norm", lw.attn_norm);
    mat(p + "wq", lw.wq);
    mat(p + "wk", lw.wk);
    mat(p + "wv", lw.wv);
    mat(p + "wo", lw.wo);
    vec(p + "ffn_norm", lw.ffn_norm);
    mat(p + "w_gate", lw.w_gate);
    mat(p + "w_up", lw.w_up);
    mat(p + "w_down", lw.w_down);
  }
  vec("final_norm", w.final_norm);
  mat("lm_head", w.lm_head);
  return out;
}

// ---------------------------------------------------------------------------
// Ablation path names

std::string path_kind_name(PathKind k) {
  switch (k) {
    case PathKind::kVisAttnWrite: return "vis_attn_write";
    case PathKind::kVisFfnWrite: return "vis_ffn_write";
    case PathKind::kT2vRead: return "t2v_read";
  }
  return "?";
}

PathKind parse_path_kind(const std::string& name) {
  if (name == "vis_attn_write") return PathKind::kVisAttnWrite;
  if (name == "vis_ffn_write") return PathKind::kVisFfnWrite;
  if (name == "t2v_read") return PathKind::kT2vRead;
  throw ConfigError("unknown path '" + name + "' (want vis_attn_write, vis_ffn_write, t2v_read)");
}

AblationPath AblationPath::parse(const std::string& text) {
  const auto at = text.find('@');
  if (at == std::string::npos || at + 1 >= text.size()) {
    throw ConfigError("ablation path '" + text + "' must look like name@layer");
  }
  const std::string layer_text = text.substr(at + 1);
  if (!std::all_of(layer_text.begin(), layer_text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ConfigError("ablation path '" + text + "' has a non-numeric layer");
  }
  return {parse_path_kind(text.substr(0, at)), static_cast<std::size_t>(std::stoul(layer_text))};
}

std::string AblationPath::to_string() const {
  return path_kind_name(kind) + "@" + std::to_string(layer);
}

AblationSet all_layers(PathKind kind, std::size_t n_layers) {
  AblationSet out;
  for (std::size_t l = 0; l < n_layers; ++l) out.insert({kind, l});
  return out;
}

AblationSet ablation_for_schedule(const PolicySchedule& schedule) {
  if (!schedule.drop_events().empty()) {
    throw ConfigError("the ablation engine cannot express token-drop events");
  }
  AblationSet out;
  for (std::size_t l = 0; l < schedule.size(); ++l) {
    const LayerMode mode = schedule[l].mode;
    if (mode == LayerMode::kBaseline) continue;
    out.insert({PathKind::kVisAttnWrite, l});
    out.insert({PathKind::kVisFfnWrite, l});
    if (mode == LayerMode::kTextOnly) out.insert({PathKind::kT2vRead, l});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared forward machinery

namespace {

Matrix normalize_vision(const Matrix& vision_emb, std::size_t d) {
  if (vision_emb.rows() == 0) return Matrix(0, d);
  if (vision_emb.cols() != d) {
    throw ShapeError("vision embeddings " + vision_emb.shape_string() + " do not match d_model=" +
                     std::to_string(d));
  }
  return vision_emb;
}

Matrix embed_text(const Weights& w, const Matrix& text_emb, std::size_t n_vision) {
  const std::size_t d = w.config.d_model;
  if (text_emb.rows() == 0) throw ContractViolation("forward needs at least one text token");
  if (text_emb.cols() != d) {
    throw ShapeError("text embeddings " + text_emb.shape_string() + " do not match d_model=" +
                     std::to_string(d));
  }
  if (n_vision + text_emb.rows() > w.pos_emb.rows()) {
    throw ConfigError("sequence of " + std::to_string(n_vision + text_emb.rows()) +
                      " tokens exceeds max_positions=" + std::to_string(w.pos_emb.rows()));
  }
  // Text sits at global positions n_vision + i of the [V; T] index space.
  Matrix text = text_emb;
  add_inplace(text, w.pos_emb.slice_rows(n_vision, n_vision + text_emb.rows()));
  return text;
}

void check_schedule(const Weights& w, const PolicySchedule& schedule) {
  if (schedule.size() != w.config.n_layers) {
    throw ConfigError("schedule has " + std::to_string(schedule.size()) +
                      " layers but the model has " + std::to_string(w.config.n_layers));
  }
}

Matrix logits_for(const Weights& w, const Matrix& text) {
  return matmul(rms_norm(text, w.final_norm), w.lm_head);
}

// Columns [0, n) of a q x kv matrix.
Matrix leading_columns(const Matrix& m, std::size_t n) {
  if (m.shape_only()) return Matrix::shape_only(m.rows(), n);
  Matrix out(m.rows(), n);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::copy_n(m.row(r).begin(), n, out.row(r).begin());
  }
  return out;
}

// Ranks current vision tokens by the attention text queries pay them at this
// layer and returns the kept positions (ascending, relative to the current
// set).
std::vector<std::size_t> score_vision(const Matrix& q_text, const Matrix& k_vision,
                                      const Matrix& k_text, std::size_t t_system,
                                      std::size_t n_heads, std::size_t keep,
                                      const ForwardOptions& options) {
  const TokenLayout layout{k_vision.rows(), std::min(t_system, k_text.rows()),
                           k_text.rows() - std::min(t_system, k_text.rows())};
  const Matrix probs = attention_probs(q_text, Matrix::vstack(k_vision, k_text),
                                       build_cross_mask(layout, true, options.cross_mask), n_heads);
  return select_kept_tokens(leading_columns(probs, k_vision.rows()), keep, options.scorer);
}

struct DropPlan {
  std::vector<std::size_t> counts;  // per-layer target counts
  bool active = false;
};

DropPlan plan_drops(const PolicySchedule& schedule, std::size_t n_vision,
                    const ForwardOptions& options, std::vector<std::string>& warnings) {
  DropPlan plan;
  const auto raw = schedule.drop_events();
  if (raw.empty() || n_vision == 0) return plan;
  const auto events = align_to_exposing_layers(raw, schedule.exposure_mask(), warnings);
  plan.counts = resolve_schedule(events, n_vision, schedule.size(), options.drop_timing);
  plan.active = true;
  return plan;
}

// Target count to drop to before layer l runs, if any.
std::optional<std::size_t> drop_before(const DropPlan& plan, std::size_t l, std::size_t current,
                                       const ForwardOptions& options) {
  if (!plan.active || options.drop_timing != DropTiming::kAtEntry) return std::nullopt;
  if (plan.counts[l] < current) return plan.counts[l];
  return std::nullopt;
}

// Target count to drop to after layer l ran, if any.
std::optional<std::size_t> drop_after(const DropPlan& plan, std::size_t l, std::size_t current,
                                      const ForwardOptions& options) {
  if (!plan.active || options.drop_timing != DropTiming::kAfterLayer) return std::nullopt;
  if (l + 1 < plan.counts.size() && plan.counts[l + 1] < current) return plan.counts[l + 1];
  return std::nullopt;
}

void warn_if_unreachable(const PolicySchedule& schedule, std::size_t l, std::size_t keep,
                         std::vector<std::string>& warnings) {
  if (keep != 0) return;
  for (std::size_t later = l + 1; later < schedule.size(); ++later) {
    if (exposes_vision(schedule[later].mode)) {
      warnings.push_back("drop at layer " + std::to_string(l) +
                         " keeps no vision tokens; later exposing layers read nothing");
      return;
    }
  }
}

std::vector<std::size_t> compose(const std::vector<std::size_t>& kept,
                                 const std::vector<std::size_t>& selection) {
  std::vector<std::size_t> out(selection.size());
  for (std::size_t i = 0; i < selection.size(); ++i) out[i] = kept[selection[i]];
  return out;
}

// One pre-norm block of unified self-attention over [V; T] with the square
// causal mask. Flags remove vision residual writes or block text->vision
// reads. Shared by the policy engine (Baseline layers) and the ablation
// engine so both run identical arithmetic.
void unified_layer(const LayerWeights& lw, std::size_t n_heads, Matrix& vision, Matrix& text,
                   bool block_t2v, bool drop_attn_write, bool drop_ffn_write, LayerTrace& trace,
                   bool record) {
  const std::size_t n = vision.rows();
  const std::size_t t = text.rows();
  const TokenLayout layout = TokenLayout::with_text(n, t);

  if (record) {
    trace.vision_before_attn = vision;
    trace.text_before_attn = text;
  }
  Matrix x = Matrix::vstack(vision, text);
  const Matrix xn = rms_norm(x, lw.attn_norm);
  const Matrix q = matmul(xn, lw.wq);
  const Matrix k = matmul(xn, lw.wk);
  const Matrix v = matmul(xn, lw.wv);

  FlowMask mask = build_baseline_mask(layout);
  if (block_t2v) {
    for (std::size_t i = n; i < n + t; ++i) {
      for (std::size_t j = 0; j < n; ++j) mask.set(i, j, false);
    }
  }
  const Matrix attn = matmul(masked_attention_oracle(q, k, v, mask, n_heads), lw.wo);
  trace.attn_q_len = n + t;
  trace.attn_kv_len = n + t;
  trace.reads_vision = n > 0 && !block_t2v;

  const auto add_rows = [](Matrix& target, const Matrix& delta, std::size_t row0) {
    if (target.shape_only() || delta.shape_only()) {
      target = Matrix::shape_only(target.rows(), target.cols());
      return;
    }
    for (std::size_t r = 0; r < target.rows(); ++r) {
      auto dst = target.row(r);
      const auto src = delta.row(row0 + r);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  };

  if (!drop_attn_write) add_rows(vision, attn, 0);
  add_rows(text, attn, n);
  if (record) {
    trace.vision_after_attn = vision;
    trace.text_after_attn = text;
  }

  x = Matrix::vstack(vision, text);
  const Matrix ffn = gated_ffn(rms_norm(x, lw.ffn_norm), lw.w_gate, lw.w_up, lw.w_down);
  if (!drop_ffn_write) add_rows(vision, ffn, 0);
  add_rows(text, ffn, n);
  if (record) {
    trace.vision_after_ffn = vision;
    trace.text_after_ffn = text;
  }
}

void text_ffn(const LayerWeights& lw, Matrix& text) {
  add_inplace(text, gated_ffn(rms_norm(text, lw.ffn_norm), lw.w_gate, lw.w_up, lw.w_down));
}

}  // namespace

// ---------------------------------------------------------------------------
// Policy engine

ForwardResult forward(const Weights& weights, const Matrix& vision_emb, const Matrix& text_emb,
                      const PolicySchedule& schedule, const ForwardOptions& options) {
  check_schedule(weights, schedule);
  const std::size_t d = weights.config.d_model;
  const std::size_t heads = weights.config.n_heads;

  ForwardResult result;
  Matrix vision = normalize_vision(vision_emb, d);
  Matrix text = embed_text(weights, text_emb, vision.rows());
  const std::size_t t = text.rows();
  const std::size_t t_system = std::min(options.t_system, t);

  result.kept_vision.resize(vision.rows());
  std::iota(result.kept_vision.begin(), result.kept_vision.end(), 0);
  const DropPlan plan = plan_drops(schedule, vision.rows(), options, result.warnings);

  // Selection is scored from (vision_state, text_state); the surviving rows
  // are gathered from the current vision matrix.
  const auto drop_to = [&](const LayerWeights& lw, std::size_t l, const Matrix& vision_state,
                           const Matrix& text_state, std::size_t target) {
    const Matrix tn = rms_norm(text_state, lw.attn_norm);
    const Matrix vn = rms_norm(vision_state, lw.attn_norm);
    const auto selection = score_vision(matmul(tn, lw.wq), matmul(vn, lw.wk), matmul(tn, lw.wk),
                                        t_system, heads, target, options);
    vision = vision.gather_rows(selection);
    result.kept_vision = compose(result.kept_vision, selection);
    warn_if_unreachable(schedule, l, target, result.warnings);
  };

  for (std::size_t l = 0; l < schedule.size(); ++l) {
    const LayerWeights& lw = weights.layers[l];
    const LayerMode mode = schedule[l].mode;
    if (const auto target = drop_before(plan, l, vision.rows(), options)) {
      drop_to(lw, l, vision, text, *target);
    }
    const auto target_after = drop_after(plan, l, vision.rows(), options);
    const Matrix vision_in = target_after ? vision : Matrix();
    const Matrix text_in = target_after ? text : Matrix();

    LayerTrace trace;
    trace.layer = l;
    trace.mode = mode;
    trace.n_vision = vision.rows();
    const bool record = options.record_hidden;

    if (mode == LayerMode::kBaseline) {
      unified_layer(lw, heads, vision, text, false, false, false, trace, record);
    } else {
      const bool reads = exposes_vision(mode);
      if (record) {
        trace.vision_before_attn = vision;
        trace.text_before_attn = text;
      }
      const Matrix tn = rms_norm(text, lw.attn_norm);
      const Matrix kv_in = reads ? Matrix::vstack(rms_norm(vision, lw.attn_norm), tn) : tn;
      const Matrix q = matmul(tn, lw.wq);
      const Matrix k = matmul(kv_in, lw.wk);
      const Matrix v = matmul(kv_in, lw.wv);
      const TokenLayout layout{reads ? vision.rows() : 0, t_system, t - t_system};
      const FlowMask mask = build_cross_mask(layout, reads, options.cross_mask);
      add_inplace(text, matmul(masked_attention_oracle(q, k, v, mask, heads), lw.wo));
      trace.attn_q_len = t;
      trace.attn_kv_len = kv_in.rows();
      trace.reads_vision = reads && vision.rows() > 0;
      if (record) {
        trace.vision_after_attn = vision;
        trace.text_after_attn = text;
      }
      text_ffn(lw, text);
      if (record) {
        trace.vision_after_ffn = vision;
        trace.text_after_ffn = text;
      }
    }
    result.trace.push_back(std::move(trace));

    // Scored with this layer's entry state, the state its attention saw.
    if (target_after) drop_to(lw, l, vision_in, text_in, *target_after);
  }

  result.logits = logits_for(weights, text);
  result.vision_hidden = std::move(vision);
  result.text_hidden = std::move(text);
  return result;
}

// ---------------------------------------------------------------------------
// Ablation engine

ForwardResult forward_baseline_masked_oracle(const Weights& weights, const Matrix& vision_emb,
                                             const Matrix& text_emb,
                                             const AblationSet& disabled,
                                             const ForwardOptions& options) {
  const std::size_t n_layers = weights.config.n_layers;
  for (const AblationPath& path : disabled) {
    if (path.layer >= n_layers) {
      throw ConfigError("ablation path " + path.to_string() + " outside a " +
                        std::to_string(n_layers) + "-layer model");
    }
  }
  ForwardResult result;
  Matrix vision = normalize_vision(vision_emb, weights.config.d_model);
  Matrix text = embed_text(weights, text_emb, vision.rows());
  result.kept_vision.resize(vision.rows());
  std::iota(result.kept_vision.begin(), result.kept_vision.end(), 0);

  for (std::size_t l = 0; l < n_layers; ++l) {
    LayerTrace trace;
    trace.layer = l;
    trace.mode = LayerMode::kBaseline;
    trace.n_vision = vision.rows();
    unified_layer(weights.layers[l], weights.config.n_heads, vision, text,
                  disabled.contains({PathKind::kT2vRead, l}),
                  disabled.contains({PathKind::kVisAttnWrite, l}),
                  disabled.contains({PathKind::kVisFfnWrite, l}), trace, options.record_hidden);
    result.trace.push_back(std::move(trace));
  }
  result.logits = logits_for(weights, text);
  result.vision_hidden = std::move(vision);
  result.text_hidden = std::move(text);
  return result;
}

// ---------------------------------------------------------------------------
// Parallel decoupling

VisualKvSet precompute_visual_kv(const Weights& weights, const Matrix& vision_emb,
                                 const PolicySchedule& schedule) {
  check_schedule(weights, schedule);
  if (schedule.has_baseline_layers()) {
    throw ConfigError("visual KV can only be precomputed when no layer writes vision (schedule " +
                      schedule.codes() + ")");
  }
  const Matrix vision = normalize_vision(vision_emb, weights.config.d_model);
  VisualKvSet kv;
  kv.n_layers = schedule.size();
  kv.n_vision = vision.rows();
  if (kv.n_vision == 0) return kv;
  for (std::size_t l : schedule.exposing_layers()) {
    const LayerWeights& lw = weights.layers[l];
    const Matrix vn = rms_norm(vision, lw.attn_norm);
    kv.layers.push_back(l);
    kv.keys.push_back(matmul(vn, lw.wk));
    kv.values.push_back(matmul(vn, lw.wv));
  }
  return kv;
}

ForwardResult forward_vica_fast(const Weights& weights, const VisualKvSet& kv,
                                const Matrix& text_emb, const PolicySchedule& schedule,
                                const ForwardOptions& options) {
  check_schedule(weights, schedule);
  if (schedule.has_baseline_layers()) {
    throw ConfigError("fast path cannot run Baseline layers (schedule " + schedule.codes() + ")");
  }
  if (options.cross_mask != CrossMaskVariant::kBottomRight) {
    throw ConfigError("fast path implements bottom-right causal alignment only");
  }
  const auto exposing = schedule.exposing_layers();
  if (kv.n_layers != schedule.size() ||
      (kv.n_vision > 0 && kv.layers != exposing) || (kv.n_vision == 0 && !kv.layers.empty())) {
    throw ConfigError("visual KV set does not match schedule " + schedule.codes());
  }
  for (std::size_t i = 0; i < kv.size(); ++i) {
    if (kv.keys[i].rows() != kv.n_vision || kv.values[i].rows() != kv.n_vision ||
        kv.keys[i].cols() != weights.config.d_model ||
        kv.values[i].cols() != weights.config.d_model) {
      throw ConfigError("visual KV for layer " + std::to_string(kv.layers[i]) +
                        " has the wrong shape");
    }
  }

  const std::size_t heads = weights.config.n_heads;
  ForwardResult result;
  Matrix text = embed_text(weights, text_emb, kv.n_vision);
  const std::size_t t = text.rows();
  const std::size_t t_system = std::min(options.t_system, t);
  result.kept_vision.resize(kv.n_vision);
  std::iota(result.kept_vision.begin(), result.kept_vision.end(), 0);
  const DropPlan plan = plan_drops(schedule, kv.n_vision, options, result.warnings);
  const bool dropping = plan.active;

  std::size_t kv_slot = 0;
  for (std::size_t l = 0; l < schedule.size(); ++l) {
    const LayerWeights& lw = weights.layers[l];
    const LayerMode mode = schedule[l].mode;
    const bool reads = exposes_vision(mode) && kv.n_vision > 0;

    LayerTrace trace;
    trace.layer = l;
    trace.mode = mode;
    if (options.record_hidden) trace.text_before_attn = text;

    const Matrix tn = rms_norm(text, lw.attn_norm);
    const Matrix q = matmul(tn, lw.wq);
    const Matrix k_text = matmul(tn, lw.wk);
    const Matrix v_text = matmul(tn, lw.wv);

    Matrix k_all = k_text;
    Matrix v_all = v_text;
    std::optional<std::size_t> target_after;
    Matrix k_vis_in;
    if (reads) {
      const std::size_t slot = kv_slot++;
      Matrix k_vis = dropping ? kv.keys[slot].gather_rows(result.kept_vision) : kv.keys[slot];
      Matrix v_vis = dropping ? kv.values[slot].gather_rows(result.kept_vision) : kv.values[slot];
      if (const auto target = drop_before(plan, l, k_vis.rows(), options)) {
        const auto selection = score_vision(q, k_vis, k_text, t_system, heads, *target, options);
        k_vis = k_vis.gather_rows(selection);
        v_vis = v_vis.gather_rows(selection);
        result.kept_vision = compose(result.kept_vision, selection);
        warn_if_unreachable(schedule, l, *target, result.warnings);
      }
      target_after = drop_after(plan, l, k_vis.rows(), options);
      if (target_after) k_vis_in = k_vis;
      k_all = Matrix::vstack(k_vis, k_text);
      v_all = Matrix::vstack(v_vis, v_text);
      trace.n_vision = k_vis.rows();
    } else if (exposes_vision(mode)) {
      ++kv_slot;
    }

    add_inplace(text, matmul(asymmetric_cross_attention(q, k_all, v_all, heads), lw.wo));
    trace.attn_q_len = t;
    trace.attn_kv_len = k_all.rows();
    trace.reads_vision = reads && trace.n_vision > 0;
    if (options.record_hidden) trace.text_after_attn = text;
    text_ffn(lw, text);
    if (options.record_hidden) trace.text_after_ffn = text;
    result.trace.push_back(std::move(trace));

    if (target_after) {
      const auto selection = score_vision(q, k_vis_in, k_text, t_system, heads, *target_after, options);
      result.kept_vision = compose(result.kept_vision, selection);
      warn_if_unreachable(schedule, l, *target_after, result.warnings);
    }
  }

  result.logits = logits_for(weights, text);
  result.text_hidden = std::move(text);
  return result;
}

std::size_t greedy_next_token(const ForwardResult& result) {
  const Matrix& logits = result.logits;
  if (logits.rows() == 0 || logits.shape_only()) {
    throw ContractViolation("greedy_next_token needs materialized logits");
  }
  const auto last = logits.row(logits.rows() - 1);
  return static_cast<std::size_t>(std::max_element(last.begin(), last.end()) - last.begin());
}

}  // namespace vica
