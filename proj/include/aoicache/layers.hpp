/*
 * Copyright 2026 The aoicache Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "aoicache/autodiff.hpp"
#include "aoicache/parameters.hpp"

namespace aoicache {

/// x * w + b with b a 1 x cols row.
inline ad::Var linear(const ad::Var& x, const ad::Var& w, const ad::Var& b) {
  return ad::add(ad::matmul(x, w), b);
}

/// Registers a rows x cols weight initialized uniformly from fan-in rows.
inline ad::Var add_weight(ParameterSet& params, const std::string& name, std::size_t rows,
                          std::size_t cols, std::mt19937_64& rng) {
  return params.add(name, fan_in_uniform(rows, cols, rows, rng));
}

/// Registers a 1 x cols bias initialized from the fan-in of its layer.
inline ad::Var add_bias(ParameterSet& params, const std::string& name, std::size_t fan_in,
                        std::size_t cols, std::mt19937_64& rng) {
  return params.add(name, fan_in_uniform(1, cols, fan_in, rng));
}

/// Repeats a G x 1 column across n columns.
inline ad::Var broadcast_cols(const ad::Var& column, std::size_t n) {
  return ad::matmul(column, ad::Var::constant(Tensor::matrix(1, n, 1.0)));
}

/// Expands one flag per (group, slot) into one flag per (group, head, slot),
/// matching the row layout of ad::attention_scores.
inline std::vector<bool> expand_head_mask(const std::vector<bool>& masked, std::size_t slots,
                                          std::size_t heads) {
  const std::size_t groups = masked.size() / slots;
  std::vector<bool> out(groups * heads * slots);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t s = 0; s < slots; ++s) out[(g * heads + h) * slots + s] = masked[g * slots + s];
    }
  }
  return out;
}

}  // namespace aoicache
