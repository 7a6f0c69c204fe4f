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

#include "aoicache/negatives.hpp"

#include <random>

#include "aoicache/errors.hpp"

namespace aoicache {

std::vector<NegativeSample> sample_negatives(std::span<const std::uint32_t> users,
                                             std::span<const double> timestamps,
                                             std::size_t num_items, std::uint64_t seed) {
  if (num_items == 0) throw InvalidArgument("sample_negatives: empty item universe");
  if (users.size() != timestamps.size()) {
    throw InvalidArgument("sample_negatives: users and timestamps differ in length");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(num_items - 1));
  std::vector<NegativeSample> out;
  out.reserve(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) out.push_back({users[i], pick(rng), timestamps[i]});
  return out;
}

}  // namespace aoicache
