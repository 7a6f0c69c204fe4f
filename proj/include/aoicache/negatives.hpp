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

#include <cstdint>
#include <span>
#include <vector>

#include "aoicache/trace.hpp"

namespace aoicache {

struct NegativeSample {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double timestamp = 0.0;

  friend bool operator==(const NegativeSample&, const NegativeSample&) = default;
};

/// One uniformly drawn item in [0, num_items) per positive, keeping the
/// positive's user and timestamp. Throws InvalidArgument when num_items is 0
/// or the spans differ in length.
std::vector<NegativeSample> sample_negatives(std::span<const std::uint32_t> users,
                                             std::span<const double> timestamps,
                                             std::size_t num_items, std::uint64_t seed);

}  // namespace aoicache
