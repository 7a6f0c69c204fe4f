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
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "aoicache/trace.hpp"

namespace aoicache {

/// Hour-structured request trace with Zipf item popularity.
///
/// Item popularity ranks map to items through a permutation that is redrawn
/// at every drift hour. Items and users belong to cluster id % clusters; each
/// request is issued by a uniformly drawn user of the item's cluster. Edge
/// features are the one-hot item cluster plus Gaussian noise.
struct SyntheticConfig {
  std::uint64_t seed = 1;
  std::size_t users = 200;
  std::size_t items = 100;
  std::size_t hours = 24;
  std::size_t events_per_hour = 500;
  double zipf_exponent = 1.0;
  std::size_t clusters = 20;
  double feature_noise = 0.05;
  /// Hours (0-based) at whose start the popularity permutation is redrawn.
  std::vector<std::size_t> drift_hours;

  /// drift_hours = {period, 2*period, ...} below `hours`; period 0 clears it.
  void set_drift_period(std::size_t period);
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

inline constexpr double kSecondsPerHour = 3600.0;

Trace generate_synthetic_trace(const SyntheticConfig& config);

/// Zipf probabilities p(r) proportional to 1 / (r + 1)^s for ranks 0..n-1.
std::vector<double> zipf_pmf(std::size_t n, double s);

}  // namespace aoicache
