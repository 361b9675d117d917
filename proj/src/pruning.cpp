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

#include "vica/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vica/errors.hpp"

namespace vica {

void validate_drop_events(const std::vector<DropEvent>& events, std::size_t n_layers) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const DropEvent& e = events[i];
    if (!(e.keep_fraction > 0.0 && e.keep_fraction <= 1.0)) {
      throw ConfigError("drop event at layer " + std::to_string(e.layer) +
                        ": keep fraction must lie in (0, 1], got " +
                        std::to_string(e.keep_fraction));
    }
    if (e.layer >= n_layers) {
      throw ConfigError("drop event at layer " + std::to_string(e.layer) + " but model has " +
                        std::to_string(n_layers) + " layers");
    }
    if (i > 0 && e.layer <= events[i - 1].layer) {
      throw ConfigError("drop event layers must be strictly increasing");
    }
  }
}

std::vector<std::size_t> resolve_schedule(const std::vector<DropEvent>& events,
                                          std::size_t n_initial, std::size_t n_layers,
                                          DropTiming timing) {
  validate_drop_events(events, n_layers);
  std::vector<std::size_t> counts(n_layers, n_initial);
  long double keep = 1.0L;
  std::size_t next = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto applies = [&](const DropEvent& e) {
      return timing == DropTiming::kAtEntry ? e.layer <= l : e.layer < l;
    };
    while (next < events.size() && applies(events[next])) {
      keep *= static_cast<long double>(events[next].keep_fraction);
      ++next;
    }
    // The tolerance absorbs representation error of products such as 0.75^3.
    counts[l] = static_cast<std::size_t>(
        std::floor(static_cast<long double>(n_initial) * keep + 1e-9L));
  }
  return counts;
}

DropSchedule DropSchedule::resolve(std::vector<DropEvent> events, std::size_t n_initial,
                                   std::size_t n_layers, DropTiming timing) {
  DropSchedule s;
  s.resolved_counts = resolve_schedule(events, n_initial, n_layers, timing);
  s.events = std::move(events);
  return s;
}

double DropSchedule::mean_count() const {
  if (resolved_counts.empty()) return 0.0;
  const auto total = std::accumulate(resolved_counts.begin(), resolved_counts.end(),
                                     static_cast<std::size_t>(0));
  return static_cast<double>(total) / static_cast<double>(resolved_counts.size());
}

std::vector<DropEvent> pyramid_drop_baseline(std::size_t n_layers) {
  if (n_layers < 4) throw ConfigError("pyramid drop baseline needs at least 4 layers");
  return {{n_layers / 4, 0.5}, {n_layers / 2, 0.5}, {3 * n_layers / 4, 0.5}};
}

std::vector<DropEvent> vica_pyramid_drop(const std::string& schedule_name) {
  if (schedule_name == "vica3b") return {{1, 0.75}, {14, 0.75}, {18, 0.75}};
  if (schedule_name == "vica7b") return {{1, 0.75}, {7, 0.75}, {10, 0.75}};
  if (schedule_name == "vica13b") return {{6, 0.75}, {9, 0.75}, {13, 0.75}};
  throw ConfigError("no pyramid-drop integration defined for schedule '" + schedule_name + "'");
}

std::vector<DropEvent> align_to_exposing_layers(const std::vector<DropEvent>& events,
                                                const std::vector<bool>& exposes_vision,
                                                std::vector<std::string>& warnings) {
  std::vector<DropEvent> aligned;
  for (const DropEvent& e : events) {
    std::size_t target = e.layer;
    while (target < exposes_vision.size() && !exposes_vision[target]) ++target;
    if (target >= exposes_vision.size()) {
      warnings.push_back("drop event at layer " + std::to_string(e.layer) +
                         " discarded: no later layer exposes vision");
      continue;
    }
    if (target != e.layer) {
      warnings.push_back("drop event at layer " + std::to_string(e.layer) +
                         " moved to layer " + std::to_string(target) +
                         " (first vision-exposing layer)");
    }
    if (!aligned.empty() && aligned.back().layer == target) {
      aligned.back().keep_fraction *= e.keep_fraction;
    } else {
      aligned.push_back({target, e.keep_fraction});
    }
  }
  return aligned;
}

std::vector<std::size_t> select_kept_tokens(const Matrix& attn_to_vision, std::size_t keep,
                                            ImportanceScorer scorer) {
  const std::size_t n = attn_to_vision.cols();
  if (keep > n) {
    throw ContractViolation("select_kept_tokens: keep=" + std::to_string(keep) +
                            " exceeds the " + std::to_string(n) + " available tokens");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (attn_to_vision.shape_only() || attn_to_vision.rows() == 0) {
    order.resize(keep);
    return order;
  }

  std::vector<double> importance(n, 0.0);
  if (scorer == ImportanceScorer::kLastQuery) {
    const auto last = attn_to_vision.row(attn_to_vision.rows() - 1);
    std::copy(last.begin(), last.end(), importance.begin());
  } else {
    for (std::size_t r = 0; r < attn_to_vision.rows(); ++r) {
      const auto row = attn_to_vision.row(r);
      for (std::size_t j = 0; j < n; ++j) importance[j] += row[j];
    }
    for (double& x : importance) x /= static_cast<double>(attn_to_vision.rows());
  }

  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return importance[a] > importance[b];
  });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace vica
