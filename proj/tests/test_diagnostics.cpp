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

#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "vica/diagnostics.hpp"
#include "vica/errors.hpp"

using namespace vica;
using vica::testing::random_matrix;

namespace {

ImpactReport synthetic(std::vector<double> kls) {
  ImpactReport r;
  for (std::size_t l = 0; l < kls.size(); ++l) r.per_layer.push_back({l, kls[l], 0.0, 0});
  return r;
}

std::vector<SweepInput> batch(std::size_t count, std::size_t n, std::size_t t, std::size_t d,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SweepInput> out;
  for (std::size_t i = 0; i < count; ++i) {
    SweepInput in;
    in.vision = random_matrix(n, d, rng);
    in.text = random_matrix(t, d, rng);
    out.push_back(std::move(in));
  }
  return out;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("cosine change identity and antipodal") {
  std::mt19937_64 rng(1);
  const Matrix h = random_matrix(4, 6, rng);
  const CosineChange same = cosine_change(h, h);
  CHECK(same.mean_cos == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(same.mean_change == doctest::Approx(0.0).epsilon(1e-15));

  Matrix neg = h;
  for (double& x : neg.values()) x = -x;
  const CosineChange anti = cosine_change(h, neg);
  CHECK(anti.mean_cos == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(anti.mean_change == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("cosine change matches loop oracle") {
  std::mt19937_64 rng(2);
  const Matrix a = random_matrix(5, 7, rng), b = random_matrix(5, 7, rng);
  const CosineChange c = cosine_change(a, b);
  double mean = 0.0;
  for (std::size_t r = 0; r < 5; ++r) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < 7; ++k) {
      dot += a(r, k) * b(r, k);
      na += a(r, k) * a(r, k);
      nb += b(r, k) * b(r, k);
    }
    const double cos = dot / std::sqrt(na * nb);
    CHECK(std::abs(*c.per_token[r] - cos) <= 1e-12);
    mean += cos / 5.0;
  }
  CHECK(std::abs(c.mean_cos - mean) <= 1e-12);
  CHECK(std::abs(c.mean_change - (1.0 - mean)) <= 1e-12);
}

TEST_CASE("cosine change skips zero rows") {
  Matrix a{{1, 0}, {0, 0}, {0, 2}};
  Matrix b{{2, 0}, {1, 1}, {0, 0}};
  const CosineChange c = cosine_change(a, b);
  CHECK(c.skipped_rows == 2);
  CHECK_FALSE(c.per_token[1].has_value());
  CHECK(c.mean_cos == 1.0);
  CHECK_THROWS_AS(cosine_change(a, Matrix(2, 2)), ShapeError);
}

TEST_CASE("KL closed forms") {
  const std::vector<double> p{1.0, 0.0}, q{0.5, 0.5};
  CHECK(std::abs(kl_divergence(p, q) - std::log(2.0)) <= 1e-9);
  CHECK(std::abs(kl_divergence(p, q) - 0.693147) <= 1e-6);
  const std::vector<double> a{0.5, 0.5}, b{0.9, 0.1};
  const double expected = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
  CHECK(std::abs(kl_divergence(a, b) - expected) <= 1e-9);
  CHECK(std::abs(kl_divergence(a, b) - 0.510826) <= 1e-6);
  CHECK(kl_divergence(b, b) == 0.0);
}

TEST_CASE("KL contract checks") {
  const std::vector<double> neg{1.5, -0.5}, ok{0.5, 0.5}, off{0.5, 0.6};
  CHECK_THROWS_AS(kl_divergence(neg, ok), ContractViolation);
  CHECK_THROWS_AS(kl_divergence(ok, neg), ContractViolation);
  CHECK_THROWS_AS(kl_divergence(off, ok), ContractViolation);
  const std::vector<double> p{0.5, 0.5}, q{1.0, 0.0};
  CHECK_THROWS_AS(kl_divergence(p, q), ContractViolation);
  CHECK(std::isfinite(kl_divergence(p, smooth_floor(q))));
  const std::vector<double> three{0.2, 0.3, 0.5};
  CHECK_THROWS_AS(kl_divergence(p, three), ShapeError);
}

TEST_CASE("smoothing") {
  const std::vector<double> clean{0.25, 0.75};
  CHECK(smooth_floor(clean) == clean);
  const std::vector<double> s = smooth_floor(std::vector<double>{1.0, 0.0, 0.0});
  CHECK(s[1] > 0.0);
  CHECK(std::abs(s[0] + s[1] + s[2] - 1.0) <= 1e-15);
  const std::vector<double> sm = softmax(std::vector<double>{0.0, std::log(3.0)});
  CHECK(sm[0] == doctest::Approx(0.25));
  CHECK(sm[1] == doctest::Approx(0.75));
}

TEST_CASE("partition regimes") {
  const ImpactReport r = synthetic({0.3, 0.1, 0.3, 0.0});
  const RegimePartition two = partition_regimes(r, 2);
  CHECK(two.essential == std::vector<std::size_t>{0, 2});
  CHECK(two.non_essential == std::vector<std::size_t>{1, 3});
  CHECK(partition_regimes(r, 1).essential == std::vector<std::size_t>{0});
  CHECK(partition_regimes(r, 0).essential.empty());
  CHECK(partition_regimes(r, 0).non_essential.size() == 4);
  CHECK(partition_regimes(r, 4).essential == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK_THROWS_AS(partition_regimes(r, 5), ContractViolation);

  const RegimePartition ties = partition_regimes(synthetic({0.2, 0.5, 0.2, 0.2}), 2);
  CHECK(ties.essential == std::vector<std::size_t>{0, 1});
}

TEST_CASE("reads only at layer 0 make later read ablations vacuous") {
  const Weights w = init_model(ModelConfig::toy(2, 2, 8, 16), 3);
  SweepOptions o;
  o.base_schedule = PolicySchedule::parse("VT");
  const ImpactReport r = layer_sweep(w, batch(3, 4, 3, 8, 4), PathKind::kT2vRead, o);
  REQUIRE(r.per_layer.size() == 2);
  CHECK(r.per_layer[0].kl > 0.0);
  CHECK(r.per_layer[1].kl == 0.0);
  CHECK(r.per_layer[1].one_minus_cos == 0.0);
  CHECK(r.ranking == std::vector<std::size_t>{0, 1});
}

TEST_CASE("write ablations after the last read cannot reach the output") {
  const Weights w = init_model(ModelConfig::toy(4, 2, 8, 16), 5);
  SweepOptions o;
  o.base_schedule = PolicySchedule::parse("BBTT");
  const auto in = batch(2, 5, 3, 8, 6);
  for (PathKind k : {PathKind::kVisAttnWrite, PathKind::kVisFfnWrite}) {
    const ImpactReport r = layer_sweep(w, in, k, o);
    // Layer 1 writes feed only TextOnly layers; layer 0 writes reach the layer 1 reads.
    CHECK(r.per_layer[1].kl == 0.0);
    CHECK(r.per_layer[2].kl == 0.0);
    CHECK(r.per_layer[3].kl == 0.0);
    CHECK(r.per_layer[0].kl > 0.0);
  }
}

TEST_CASE("baseline sweep bounds and report formats") {
  const Weights w = init_model(ModelConfig::toy(3, 2, 8, 16), 7);
  const ImpactReport r = layer_sweep(w, batch(2, 4, 3, 8, 8), PathKind::kVisAttnWrite);
  for (const LayerImpact& li : r.per_layer) {
    CHECK(li.kl >= 0.0);
    CHECK(std::isfinite(li.kl));
    CHECK(li.one_minus_cos >= 0.0);
    CHECK(li.one_minus_cos <= 2.0);
  }
  const std::string csv = r.to_csv();
  CHECK(csv.rfind("layer,kl,one_minus_cos\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j["path"] == "vis_attn_write");
  CHECK(j["per_layer"].size() == 3);
  CHECK(j["ranking"].size() == 3);
  CHECK_THROWS_AS(layer_sweep(w, {}, PathKind::kT2vRead), ContractViolation);
}

}  // TEST_SUITE
