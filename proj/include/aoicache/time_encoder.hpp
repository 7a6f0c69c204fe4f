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
#include <vector>

#include "aoicache/autodiff.hpp"

namespace aoicache {

/// Harmonic encoding phi(dt)_i = sqrt(1/d) * cos(omega_i * dt) with trainable
/// omegas stored as a 1 x d row.
class TimeEncoder {
 public:
  TimeEncoder() = default;
  explicit TimeEncoder(ad::Var omegas);

  /// Geometric sequence from 1 down to 1/max_timespan (spans <= 1 give all ones).
  static Tensor initial_omegas(std::size_t dim, double max_timespan);

  std::size_t dim() const { return omegas_.cols(); }
  const ad::Var& omegas() const { return omegas_; }

  /// deltas: n x 1, all >= 0. Returns n x d.
  ad::Var encode(const ad::Var& deltas) const;
  ad::Var encode(std::span<const double> deltas) const;
  std::vector<double> encode(double delta) const;

 private:
  ad::Var omegas_;
};

}  // namespace aoicache
