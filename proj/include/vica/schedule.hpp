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

#ifndef VICA_SCHEDULE_HPP_
#define VICA_SCHEDULE_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vica/pruning.hpp"

namespace vica {

/// How vision tokens take part in one decoder layer.
///
///  Baseline   unified self-attention + FFN over [V; T]; vision rows are
///             written by both sublayers.
///  FreezeVis  vision rows are never written; text reads vision KV.
///  VicaCross  same as FreezeVis at this layer. The two differ only in which
///             layers a schedule marks: FreezeVis schedules expose vision
///             everywhere, ViCA schedules only at retained layers.
///  TextOnly   text attends to text only; vision is neither read nor written
///             and is never projected to KV.
enum class LayerMode { kBaseline, kFreezeVis, kVicaCross, kTextOnly };

inline bool exposes_vision(LayerMode m) { return m != LayerMode::kTextOnly; }
inline bool writes_vision(LayerMode m) { return m == LayerMode::kBaseline; }

char mode_code(LayerMode m);  // B, F, V, T
LayerMode mode_from_code(char c);
std::string mode_name(LayerMode m);

struct LayerPolicy {
  LayerMode mode = LayerMode::kBaseline;
  // Fraction of the current vision tokens kept from this layer on.
  std::optional<double> drop_keep;
};

struct PolicySchedule {
  std::vector<LayerPolicy> layers;

  std::size_t size() const { return layers.size(); }
  const LayerPolicy& operator[](std::size_t l) const { return layers[l]; }

  static PolicySchedule uniform(LayerMode mode, std::size_t n_layers);
  // VicaCross at `retained`, TextOnly elsewhere.
  static PolicySchedule vica(std::size_t n_layers, const std::vector<std::size_t>& retained);
  // One mode code per layer, e.g. "VTTV". Throws ConfigError on bad codes.
  static PolicySchedule parse(const std::string& codes);

  // Named presets: baseline, freezevis, textonly, vica3b, vica7b, vica13b.
  // A "+pdrop" suffix adds the matching PyramidDrop events ("baseline+pdrop"
  // halves tokens at 1/4, 2/4, 3/4 depth).
  static PolicySchedule preset(const std::string& name, std::size_t n_layers);
  static std::vector<std::string> preset_names();

  std::vector<std::size_t> exposing_layers() const;
  std::vector<bool> exposure_mask() const;
  bool has_baseline_layers() const;
  std::vector<DropEvent> drop_events() const;
  void set_drop_events(const std::vector<DropEvent>& events);

  std::string codes() const;
};

// Retained cross-attention layer sets of the released ViCA backbones.
const std::vector<std::size_t>& retained_layers(const std::string& schedule_name);

}  // namespace vica

#endif  // VICA_SCHEDULE_HPP_
