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

#ifndef VICA_FLOW_MASK_HPP_
#define VICA_FLOW_MASK_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

namespace vica {

/// Boolean attention-permission matrix of shape q_len x kv_len.
/// allowed(i, j) == true means query row i may read key/value row j.
class FlowMask {
 public:
  FlowMask() = default;
  FlowMask(std::size_t q_len, std::size_t kv_len, bool fill = false)
      : q_len_(q_len), kv_len_(kv_len), allowed_(q_len * kv_len, fill ? 1 : 0) {}

  std::size_t q_len() const { return q_len_; }
  std::size_t kv_len() const { return kv_len_; }

  bool operator()(std::size_t i, std::size_t j) const {
    return allowed_[i * kv_len_ + j] != 0;
  }
  void set(std::size_t i, std::size_t j, bool value) {
    allowed_[i * kv_len_ + j] = value ? 1 : 0;
  }

  std::size_t count_allowed() const;
  std::size_t count_allowed_in_row(std::size_t i) const;

  // Rows [begin, q_len) as a new mask with the same kv_len.
  FlowMask tail_rows(std::size_t begin) const;

  bool operator==(const FlowMask& other) const = default;

 private:
  std::size_t q_len_ = 0;
  std::size_t kv_len_ = 0;
  std::vector<std::uint8_t> allowed_;
};

}  // namespace vica

#endif  // VICA_FLOW_MASK_HPP_
