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
#include <numeric>

#include "doctest.h"
#include "support.hpp"
#include "vica/errors.hpp"
#include "vica/pruning.hpp"
#include "vica/schedule.hpp"

using namespace vica;

namespace {

// Sort every index by (score desc, index asc), keep the first `keep`.
std::vector<std::size_t> brute_top_k(const std::vector<double>& score, std::size_t keep) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t j = 0; j < score.size(); ++j) all.emplace_back(-score[j], j);
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back(all[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_SUITE("pruning") {

TEST_CASE("baseline pyramid drop resolves to quarter halvings") {
  const auto events = pyramid_drop_baseline(32);
  REQUIRE(events.size() == 3);
  CHECK(events[0] == DropEvent{8, 0.5});
  CHECK(events[1] == DropEvent{16, 0.5});
  CHECK(events[2] == DropEvent{24, 0.5});
  const DropSchedule s = DropSchedule::resolve(events, 576, 32);
  for (std::size_t l = 0; l < 32; ++l) {
    const std::size_t expected = l < 8 ? 576 : l < 16 ? 288 : l < 24 ? 144 : 72;
    CHECK(s.resolved_counts[l] == expected);
  }
  CHECK(s.mean_count() == 270.0);
}

TEST_CASE("combined pyramid drop on the 7B schedule") {
  const auto counts = resolve_schedule(vica_pyramid_drop("vica7b"), 576, 32);
  CHECK(counts[0] == 576);
  for (std::size_t l = 1; l <= 6; ++l) CHECK(counts[l] == 432);
  for (std::size_t l = 7; l <= 9; ++l) CHECK(counts[l] == 324);
  for (std::size_t l = 10; l < 32; ++l) CHECK(counts[l] == 243);
}

TEST_CASE("after-layer timing shifts each drop by one layer") {
  const auto counts = resolve_schedule(vica_pyramid_drop("vica7b"), 576, 32, DropTiming::kAfterLayer);
  CHECK(counts[1] == 576);
  CHECK(counts[2] == 432);
  CHECK(counts[7] == 432);
  CHECK(counts[8] == 324);
  CHECK(counts[11] == 243);
}

TEST_CASE("resolve edge cases") {
  CHECK(resolve_schedule({}, 17, 5) == std::vector<std::size_t>(5, 17));
  CHECK(resolve_schedule({{0, 0.5}}, 7, 2) == std::vector<std::size_t>{3, 3});
  CHECK_THROWS_AS(resolve_schedule({{5, 0.5}}, 10, 5), ConfigError);
  CHECK_THROWS_AS(resolve_schedule({{1, 0.0}}, 10, 5), ConfigError);
  CHECK_THROWS_AS(resolve_schedule({{1, 1.5}}, 10, 5), ConfigError);
  CHECK_THROWS_AS(resolve_schedule({{2, 0.5}, {2, 0.5}}, 10, 5), ConfigError);
  CHECK_THROWS_AS(resolve_schedule({{3, 0.5}, {2, 0.5}}, 10, 5), ConfigError);
}

TEST_CASE("drop events move to the next exposing layer") {
  std::vector<std::string> warnings;
  const std::vector<bool> exposes{true, false, false, true, false, true};
  const auto aligned = align_to_exposing_layers({{1, 0.5}, {3, 0.5}, {4, 0.8}}, exposes, warnings);
  REQUIRE(aligned.size() == 2);
  CHECK(aligned[0].layer == 3);
  CHECK(aligned[0].keep_fraction == doctest::Approx(0.25));
  CHECK(aligned[1] == DropEvent{5, 0.8});
  CHECK(warnings.size() == 2);

  warnings.clear();
  CHECK(align_to_exposing_layers({{4, 0.5}}, {true, false, false, false, false}, warnings).empty());
  CHECK(warnings.size() == 1);
}

TEST_CASE("select_kept_tokens examples") {
  std::mt19937_64 rng(3);
  const Matrix attn = vica::testing::random_matrix(3, 6, rng);
  std::vector<std::size_t> all(6);
  std::iota(all.begin(), all.end(), 0);
  CHECK(select_kept_tokens(attn, 6) == all);

  Matrix delta(2, 5);
  delta(1, 3) = 1.0;
  CHECK(select_kept_tokens(delta, 1) == std::vector<std::size_t>{3});

  const std::vector<double> last(attn.row(2).begin(), attn.row(2).end());
  CHECK(select_kept_tokens(attn, 3) == brute_top_k(last, 3));

  std::vector<double> mean(6, 0.0);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t j = 0; j < 6; ++j) mean[j] += attn(r, j) / 3.0;
  }
  CHECK(select_kept_tokens(attn, 3, ImportanceScorer::kMeanAllQueries) == brute_top_k(mean, 3));
  CHECK_THROWS_AS(select_kept_tokens(attn, 7), ContractViolation);
}

TEST_CASE("ties keep the lower index") {
  const Matrix flat(1, 5, 0.2);
  CHECK(select_kept_tokens(flat, 2) == std::vector<std::size_t>{0, 1});
  const Matrix two{{0.1, 0.4, 0.1, 0.4, 0.0}};
  CHECK(select_kept_tokens(two, 3) == std::vector<std::size_t>{0, 1, 3});
}

}  // TEST_SUITE

TEST_SUITE("schedule") {

TEST_CASE("ViCA presets retain the published layer sets") {
  const PolicySchedule s7 = PolicySchedule::preset("vica7b", 32);
  CHECK(s7.exposing_layers() == std::vector<std::size_t>{0, 1, 7, 8, 9, 10, 11, 14});
  for (std::size_t l = 0; l < 32; ++l) {
    const bool kept = std::count(retained_layers("vica7b").begin(), retained_layers("vica7b").end(), l);
    CHECK(s7[l].mode == (kept ? LayerMode::kVicaCross : LayerMode::kTextOnly));
  }
  CHECK(PolicySchedule::preset("vica3b", 32).exposing_layers() ==
        std::vector<std::size_t>{0, 1, 14, 15, 18, 19, 21, 22, 23});
  CHECK(PolicySchedule::preset("vica13b", 40).exposing_layers() ==
        std::vector<std::size_t>{0, 6, 8, 9, 10, 13, 14, 16});
}

TEST_CASE("uniform presets and codes") {
  CHECK(PolicySchedule::preset("baseline", 3).codes() == "BBB");
  CHECK(PolicySchedule::preset("freezevis", 3).codes() == "FFF");
  CHECK(PolicySchedule::preset("textonly", 2).codes() == "TT");
  CHECK(PolicySchedule::parse("BFVT").codes() == "BFVT");
  CHECK(PolicySchedule::parse("VTTV").exposing_layers() == std::vector<std::size_t>{0, 3});
  CHECK(PolicySchedule::parse("BT").has_baseline_layers());
  CHECK_FALSE(PolicySchedule::parse("FVT").has_baseline_layers());
  CHECK_THROWS_AS(PolicySchedule::parse("BX"), ConfigError);
  CHECK_THROWS_AS(PolicySchedule::preset("nonsense", 4), ConfigError);
  CHECK_THROWS_AS(PolicySchedule::preset("freezevis+pdrop", 4), ConfigError);
}

TEST_CASE("mode semantics") {
  CHECK(writes_vision(LayerMode::kBaseline));
  CHECK_FALSE(writes_vision(LayerMode::kFreezeVis));
  CHECK_FALSE(writes_vision(LayerMode::kVicaCross));
  CHECK_FALSE(exposes_vision(LayerMode::kTextOnly));
  CHECK(exposes_vision(LayerMode::kFreezeVis));
  for (char c : std::string("BFVT")) CHECK(mode_code(mode_from_code(c)) == c);
}

TEST_CASE("pdrop presets attach drop events") {
  const PolicySchedule b = PolicySchedule::preset("baseline+pdrop", 32);
  CHECK(b.drop_events() == pyramid_drop_baseline(32));
  const PolicySchedule v = PolicySchedule::preset("vica7b+pdrop", 32);
  CHECK(v.drop_events() == vica_pyramid_drop("vica7b"));
  PolicySchedule s = PolicySchedule::preset("vica7b", 32);
  CHECK(s.drop_events().empty());
  s.set_drop_events({{2, 0.5}});
  CHECK(s.drop_events() == std::vector<DropEvent>{{2, 0.5}});
}

}  // TEST_SUITE
