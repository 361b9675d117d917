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

// VICA1 weight container. Layout (all integers little-endian):
//
//   "VICA1"                                  5 bytes
//   n_layers n_heads d_model d_ffn vocab max_positions    u32 x 6
//   tensor_count                             u32
//   per tensor:
//     name_len u32, name bytes
//     ndim u32 (1 or 2), dims u64 x ndim
//     values float64 x prod(dims), row-major

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "vica/errors.hpp"
#include "vica/model.hpp"

namespace vica {
namespace {

constexpr std::array<char, 5> kMagic = {'V', 'I', 'C', 'A', '1'};

template <typename T>
void write_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw ConfigError("VICA1: unexpected end of stream");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

void write_tensor(std::ostream& out, const std::string& name, std::span<const double> values,
                  std::initializer_list<std::size_t> dims) {
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
  for (std::size_t dim : dims) write_le<std::uint64_t>(out, dim);
  for (double v : values) write_le<double>(out, v);
}

struct RawTensor {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<double> values;
};

RawTensor read_tensor(std::istream& in) {
  RawTensor t;
  const auto name_len = read_le<std::uint32_t>(in);
  if (name_len > 4096) throw ConfigError("VICA1: implausible tensor name length");
  t.name.resize(name_len);
  if (!in.read(t.name.data(), name_len)) throw ConfigError("VICA1: truncated tensor name");
  const auto ndim = read_le<std::uint32_t>(in);
  if (ndim != 1 && ndim != 2) throw ConfigError("VICA1: tensor " + t.name + " has ndim " + std::to_string(ndim));
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    t.dims.push_back(static_cast<std::size_t>(read_le<std::uint64_t>(in)));
    count *= t.dims.back();
  }
  t.values.resize(count);
  for (double& v : t.values) v = read_le<double>(in);
  return t;
}

}  // namespace

void save_weights(const Weights& w, std::ostream& out) {
  if (w.pos_emb.shape_only()) throw ContractViolation("cannot serialize shape-only weights");
  out.write(kMagic.data(), kMagic.size());
  const ModelConfig& c = w.config;
  for (std::size_t v : {c.n_layers, c.n_heads, c.d_model, c.d_ffn, c.vocab, c.max_positions}) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
  const auto manifest = weight_manifest(w);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(manifest.size()));

  const auto mat = [&](const std::string& name, const Matrix& m) {
    write_tensor(out, name, m.values(), {m.rows(), m.cols()});
  };
  const auto vec = [&](const std::string& name, const std::vector<double>& v) {
    write_tensor(out, name, v, {v.size()});
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
  if (!out) throw ConfigError("VICA1: write failed");
}

Weights load_weights(std::istream& in) {
  std::array<char, 5> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ConfigError("VICA1: bad magic bytes");
  }
  ModelConfig c;
  c.name = "loaded";
  c.n_layers = read_le<std::uint32_t>(in);
  c.n_heads = read_le<std::uint32_t>(in);
  c.d_model = read_le<std::uint32_t>(in);
  c.d_ffn = read_le<std::uint32_t>(in);
  c.vocab = read_le<std::uint32_t>(in);
  c.max_positions = read_le<std::uint32_t>(in);
  c.validate();

  // Build an empty skeleton and fill it in manifest order; the manifest of the
  // skeleton is what the stream must match.
  Weights w = shape_only_weights(c);
  const auto expected = weight_manifest(w);
  const auto count = read_le<std::uint32_t>(in);
  if (count != expected.size()) {
    throw ConfigError("VICA1: expected " + std::to_string(expected.size()) + " tensors, found " +
                      std::to_string(count));
  }

  std::vector<RawTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    RawTensor t = read_tensor(in);
    if (t.name != expected[i].name || t.dims != expected[i].dims) {
      throw ConfigError("VICA1: tensor " + std::to_string(i) + " is '" + t.name +
                        "', expected '" + expected[i].name + "' with matching shape");
    }
    tensors.push_back(std::move(t));
  }

  std::size_t next = 0;
  const auto mat = [&](Matrix& m) {
    const RawTensor& t = tensors[next++];
    m = Matrix(t.dims[0], t.dims[1]);
    std::copy(t.values.begin(), t.values.end(), m.values().begin());
  };
  const auto vec = [&](std::vector<double>& v) { v = tensors[next++].values; };
  mat(w.pos_emb);
  for (LayerWeights& lw : w.layers) {
    vec(lw.attn_norm);
    mat(lw.wq);
    mat(lw.wk);
    mat(lw.wv);
    mat(lw.wo);
    vec(lw.ffn_norm);
    mat(lw.w_gate);
    mat(lw.w_up);
    mat(lw.w_down);
  }
  vec(w.final_norm);
  mat(w.lm_head);
  return w;
}

}  // namespace vica
