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

#include "vica/schedule.hpp"

#include <map>

#include "vica/errors.hpp"

namespace vica {

char mode_code(LayerMode m) {
  switch (m) {
    case LayerMode::kBaseline: return 'B';
    case LayerMode::kFreezeVis: return 'F';
    case LayerMode::kVicaCross: return 'V';
    case LayerMode::kTextOnly: return 'T';
  }
  return '?';
}

LayerMode mode_from_code(char c) {
  switch (c) {
    case 'B': return LayerMode::kBaseline;
    case 'F': return LayerMode::kFreezeVis;
    case 'V': return LayerMode::kVicaCross;
    case 'T': return LayerMode::kTextOnly;
    default: throw ConfigError(std::string("unknown layer mode code '") + c + "' (want B/F/V/T)");
  }
}

std::string mode_name(LayerMode m) {
  switch (m) {
    case LayerMode::kBaseline: return "Baseline";
    case LayerMode::kFreezeVis: return "FreezeVis";
    case LayerMode::kVicaCross: return "VicaCross";
    case LayerMode::kTextOnly: return "TextOnly";
  }
  return "?";
}

const std::vector<std::size_t>& retained_layers(const std::string& schedule_name) {
  static const std::map<std::string, std::vector<std::size_t>> kRetained = {
      {"vica3b", {0, 1, 14, 15, 18, 19, 21, 22, 23}},
      {"vica7b", {0, 1, 7, 8, 9, 10, 11, 14}},
      {"vica13b", {0, 6, 8, 9, 10, 13, 14, 16}},
  };
  const auto it = kRetained.find(schedule_name);
  if (it == kRetained.end()) throw ConfigError("unknown ViCA schedule '" + schedule_name + "'");
  return it->second;
}

PolicySchedule PolicySchedule::uniform(LayerMode mode, std::size_t n_layers) {
  PolicySchedule s;
  s.layers.assign(n_layers, LayerPolicy{mode, std::nullopt});
  return s;
}

PolicySchedule PolicySchedule::vica(std::size_t n_layers,
                                    const std::vector<std::size_t>& retained) {
  PolicySchedule s = uniform(LayerMode::kTextOnly, n_layers);
  for (std::size_t l : retained) {
    if (l >= n_layers) {
      throw ConfigError("retained layer " + std::to_string(l) + " outside a " +
                        std::to_string(n_layers) + "-layer model");
    }
    s.layers[l].mode = LayerMode::kVicaCross;
  }
  return s;
}

PolicySchedule PolicySchedule::parse(const std::string& codes) {
  PolicySchedule s;
  for (char c : codes) s.layers.push_back({mode_from_code(c), std::nullopt});
  return s;
}

std::vector<std::string> PolicySchedule::preset_names() {
  return {"baseline",     "freezevis",     "textonly",      "vica3b",         "vica7b",
          "vica13b",      "baseline+pdrop", "vica3b+pdrop", "vica7b+pdrop",   "vica13b+pdrop"};
}

PolicySchedule PolicySchedule::preset(const std::string& name, std::size_t n_layers) {
  std::string base = name;
  bool pdrop = false;
  if (const auto plus = name.find('+'); plus != std::string::npos) {
    if (name.substr(plus) != "+pdrop") throw ConfigError("unknown schedule suffix in '" + name + "'");
    base = name.substr(0, plus);
    pdrop = true;
  }
  PolicySchedule s;
  if (base == "baseline") {
    s = uniform(LayerMode::kBaseline, n_layers);
  } else if (base == "freezevis") {
    s = uniform(LayerMode::kFreezeVis, n_layers);
  } else if (base == "textonly") {
    s = uniform(LayerMode::kTextOnly, n_layers);
  } else if (base.rfind("vica", 0) == 0) {
    s = vica(n_layers, retained_layers(base));
  } else {
    throw ConfigError("unknown schedule '" + name + "'");
  }
  if (pdrop) {
    if (base == "baseline") {
      s.set_drop_events(pyramid_drop_baseline(n_layers));
    } else if (base.rfind("vica", 0) == 0) {
      s.set_drop_events(vica_pyramid_drop(base));
    } else {
      throw ConfigError("no pyramid-drop variant for schedule '" + base + "'");
    }
  }
  return s;
}

std::vector<std::size_t> PolicySchedule::exposing_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (exposes_vision(layers[l].mode)) out.push_back(l);
  }
  return out;
}

std::vector<bool> PolicySchedule::exposure_mask() const {
  std::vector<bool> out(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) out[l] = exposes_vision(layers[l].mode);
  return out;
}

bool PolicySchedule::has_baseline_layers() const {
  for (const auto& p : layers) {
    if (p.mode == LayerMode::kBaseline) return true;
  }
  return false;
}

std::vector<DropEvent> PolicySchedule::drop_events() const {
  std::vector<DropEvent> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].drop_keep) out.push_back({l, *layers[l].drop_keep});
  }
  return out;
}

void PolicySchedule::set_drop_events(const std::vector<DropEvent>& events) {
  validate_drop_events(events, layers.size());
  for (auto& p : layers) p.drop_keep.reset();
  for (const DropEvent& e : events) layers[e.layer].drop_keep = e.keep_fraction;
}

std::string PolicySchedule::codes() const {
  std::string out;
  for (const auto& p : layers) out.push_back(mode_code(p.mode));
  return out;
}

}  // namespace vica
