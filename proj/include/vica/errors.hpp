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

#ifndef VICA_ERRORS_HPP_
#define VICA_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace vica {

// Operand shapes do not line up (matmul inner dims, gain length, ...).
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Caller broke a documented precondition (q_len > kv_len, negative
// probabilities, keep > available tokens, ...).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Invalid model/schedule/experiment configuration. The CLI maps this to
// exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vica

#endif  // VICA_ERRORS_HPP_
