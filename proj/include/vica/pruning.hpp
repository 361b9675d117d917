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

// PyramidDrop-style progressive vision-token dropping.

#ifndef VICA_PRUNING_HPP_
#define VICA_PRUNING_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "vica/numerics.hpp"

namespace vica {

struct DropEvent {
  std::size_t layer = 0;
  double keep_fraction = 1.0;

  bool operator==(const DropEvent&) const = default;
};

enum class DropTiming {
  kAtEntry,     // the drop layer already sees the reduced set
  kAfterLayer,  // the drop layer sees the full set, later layers the reduced one
};

// Throws ConfigError unless keep fractions lie in (0, 1], layers strictly
// increase and every layer is < n_layers.
void validate_drop_events(const std::vector<DropEvent>& events, std::size_t n_layers);

// Vision-token count at every layer:
//   count(l) = floor(n_initial * prod{keep_e : e.layer <= l})   (at entry)
// With kAfterLayer the product runs over e.layer < l.
std::vector<std::size_t> resolve_schedule(const std::vector<DropEvent>& events,
                                          std::size_t n_initial, std::size_t n_layers,
                                          DropTiming timing = DropTiming::kAtEntry);

struct DropSchedule {
  std::vector<DropEvent> events;
  std::vector<std::size_t> resolved_counts;

  static DropSchedule resolve(std::vector<DropEvent> events, std::size_t n_initial,
                              std::size_t n_layers, DropTiming timing = DropTiming::kAtEntry);
  double mean_count() const;
};

// Halve the remaining tokens at depths 1/4, 2/4 and 3/4.
std::vector<DropEvent> pyramid_drop_baseline(std::size_t n_layers);

// 25% dropped at three retained layers, per backbone preset name
// ("vica3b", "vica7b", "vica13b"). Throws ConfigError for unknown names.
std::vector<DropEvent> vica_pyramid_drop(const std::string& schedule_name);

// Move events that land on layers not exposing vision to the next layer that
// does. Events that cannot be placed are dropped. Both cases append a
// human-readable warning.
std::vector<DropEvent> align_to_exposing_layers(const std::vector<DropEvent>& events,
                                                const std::vector<bool>& exposes_vision,
                                                std::vector<std::string>& warnings);

enum class ImportanceScorer {
  kLastQuery,      // attention row of the final text query
  kMeanAllQueries, // mean over all text query rows
};

// attn_to_vision: text-queries x current-vision-tokens attention weights.
// Returns the `keep` most-attended vision indices (ties to the lower index),
// sorted ascending. Throws ContractViolation when keep exceeds the number of
// columns.
std::vector<std::size_t> select_kept_tokens(const Matrix& attn_to_vision, std::size_t keep,
                                            ImportanceScorer scorer = ImportanceScorer::kLastQuery);

}  // namespace vica

#endif  // VICA_PRUNING_HPP_
