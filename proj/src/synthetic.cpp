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

#include "aoicache/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "aoicache/errors.hpp"
#include "aoicache/rng.hpp"

namespace aoicache {

void SyntheticConfig::set_drift_period(std::size_t period) {
  drift_hours.clear();
  if (period == 0) return;
  for (std::size_t h = period; h < hours; h += period) drift_hours.push_back(h);
}

void SyntheticConfig::validate() const {
  if (users == 0 || items == 0 || hours == 0 || clusters == 0) {
    throw InvalidArgument("synthetic trace sizes must be positive");
  }
  if (users < clusters || items < clusters) {
    throw InvalidArgument("synthetic trace needs at least one user and item per cluster");
  }
  if (zipf_exponent < 0.0 || feature_noise < 0.0) {
    throw InvalidArgument("zipf exponent and feature noise must be non-negative");
  }
}

nlohmann::ordered_json SyntheticConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["users"] = users;
  j["items"] = items;
  j["hours"] = hours;
  j["events_per_hour"] = events_per_hour;
  j["zipf_exponent"] = zipf_exponent;
  j["clusters"] = clusters;
  j["feature_noise"] = feature_noise;
  j["drift_hours"] = drift_hours;
  return j;
}

std::vector<double> zipf_pmf(std::size_t n, double s) {
  std::vector<double> p(n);
  for (std::size_t r = 0; r < n; ++r) p[r] = 1.0 / std::pow(static_cast<double>(r + 1), s);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= total;
  return p;
}

Trace generate_synthetic_trace(const SyntheticConfig& config) {
  config.validate();
  std::mt19937_64 rng(derive_seed(config.seed, {11}));
  const std::vector<double> pmf = zipf_pmf(config.items, config.zipf_exponent);
  std::discrete_distribution<std::size_t> rank_dist(pmf.begin(), pmf.end());
  std::uniform_real_distribution<double> offset(0.0, kSecondsPerHour);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<std::uint32_t> perm(config.items);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::vector<std::uint32_t>> cluster_users(config.clusters);
  for (std::uint32_t u = 0; u < config.users; ++u) cluster_users[u % config.clusters].push_back(u);

  Trace trace(config.clusters);
  trace.reserve_universe(config.users, config.items);
  struct Pending {
    double time;
    std::uint32_t user, item;
  };
  std::vector<Pending> hour_events;
  std::vector<double> feats(config.clusters);
  for (std::size_t h = 0; h < config.hours; ++h) {
    if (std::find(config.drift_hours.begin(), config.drift_hours.end(), h) !=
        config.drift_hours.end()) {
      std::shuffle(perm.begin(), perm.end(), rng);
    }
    hour_events.clear();
    for (std::size_t k = 0; k < config.events_per_hour; ++k) {
      const std::uint32_t item = perm[rank_dist(rng)];
      const auto& members = cluster_users[item % config.clusters];
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      const std::uint32_t user = members[pick(rng)];
      hour_events.push_back({static_cast<double>(h) * kSecondsPerHour + offset(rng), user, item});
    }
    std::stable_sort(hour_events.begin(), hour_events.end(),
                     [](const Pending& a, const Pending& b) { return a.time < b.time; });
    for (const Pending& ev : hour_events) {
      for (std::size_t c = 0; c < config.clusters; ++c) {
        feats[c] = (c == ev.item % config.clusters ? 1.0 : 0.0) +
                   (config.feature_noise > 0.0 ? config.feature_noise * noise(rng) : 0.0);
      }
      trace.append(ev.user, ev.item, ev.time, feats);
    }
  }
  return trace;
}

}  // namespace aoicache
