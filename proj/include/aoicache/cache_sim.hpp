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
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aoicache/cache_policy.hpp"
#include "aoicache/graph_state.hpp"
#include "aoicache/model.hpp"
#include "aoicache/trace.hpp"

namespace aoicache {

/// Which entities are scored when predicting the next hour.
///   all-items: every item, every user seen so far
///   recent-1h / recent-2h: users and items requested in the last one or two hours
enum class CandidateScope { kAllItems, kRecent1h, kRecent2h };

std::string_view to_string(CandidateScope s);
CandidateScope parse_candidate_scope(std::string_view s);

struct PredictionWindowConfig {
  double step_seconds = 6.0;        // delta_p
  double request_threshold = 0.5;   // P_I
  std::size_t memory_update_hours = 1;  // T_u
  CandidateScope scope = CandidateScope::kRecent1h;
  /// Feed fake requests into a scratch copy of the state within the hour.
  bool fake_updates = false;
  std::size_t replay_batch_size = 200;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

using UserItem = std::pair<std::uint32_t, std::uint32_t>;

/// Request probabilities for users x items.
class PairScorer {
 public:
  virtual ~PairScorer() = default;
  /// Called before the first step of each prediction window.
  virtual void begin_window(double start) { (void)start; }
  /// Row-major users.size() x items.size() probabilities at time t.
  virtual std::vector<double> score(std::span<const std::uint32_t> users,
                                    std::span<const std::uint32_t> items, double t) = 0;
  /// Pairs counted as fake requests at time t.
  virtual void record_fake_requests(std::span<const UserItem> pairs, double t) {
    (void)pairs;
    (void)t;
  }
  /// True when record_fake_requests changes later scores.
  virtual bool uses_fake_requests() const { return false; }
};

/// Predicted request counts per candidate item over [start, start + window):
/// at each step T_p = start + k * step, every pair scoring above the
/// threshold adds one to its item. Throws InvalidArgument on empty candidates.
std::vector<std::size_t> predict_requests(PairScorer& scorer, std::span<const std::uint32_t> users,
                                          std::span<const std::uint32_t> items, double start,
                                          double step_seconds, double threshold,
                                          double window_seconds = 3600.0);

/// predict_requests for several thresholds from one pass of scores; counts[t]
/// belongs to thresholds[t]. Fake requests follow thresholds[0], so a scorer
/// that uses them accepts only a single threshold.
std::vector<std::vector<std::size_t>> predict_request_counts(
    PairScorer& scorer, std::span<const std::uint32_t> users, std::span<const std::uint32_t> items,
    double start, double step_seconds, std::span<const double> thresholds,
    double window_seconds = 3600.0);

/// The `capacity` items with the largest counts, ties to the smaller item id,
/// returned in ascending id order.
std::vector<std::uint32_t> select_top_c(std::span<const std::size_t> counts,
                                        std::span<const std::uint32_t> items, std::size_t capacity);

struct HourStats {
  std::int64_t hour = 0;
  std::size_t requests = 0;
  std::size_t hits = 0;

  double hit_rate() const {
    return requests ? static_cast<double>(hits) / static_cast<double>(requests) : 0.0;
  }
};

/// Hit rate of a request sequence against a fixed cached set.
double hit_rate(std::span<const std::uint32_t> requests, std::span<const std::uint32_t> cached);

struct PolicyRun {
  std::string policy;
  std::size_t cache_size = 0;
  std::vector<HourStats> hours;  // hours with at least one request
  std::vector<bool> hit_sequence;

  /// Mean of per-hour hit rates.
  double average_hit_rate() const;
};

/// Hour index of a timestamp (floor(t / 3600)).
std::int64_t hour_of(double timestamp);

/// Replays events [warm_begin, begin) into the policy without counting, then
/// serves [begin, end) and records hits per hour.
PolicyRun run_baseline(CachePolicy& policy, const Trace& trace, std::size_t warm_begin,
                       std::size_t begin, std::size_t end);

/// Called at memory refresh hours with the index of the first event of that
/// hour; should bring the scorer's state up to that point with real events.
using RefreshFn = std::function<void(std::size_t first_event_of_hour)>;

/// Hourly predictive caching over events [begin, end): each hour, candidates
/// are predicted with predict_requests once and the top-C set is installed
/// for every requested cache size. Memory refresh runs every
/// memory_update_hours hours after the first. An hour without candidates
/// keeps the previous sets.
std::vector<PolicyRun> run_predictive_policy(PairScorer& scorer, const Trace& trace,
                                             std::size_t begin, std::size_t end,
                                             std::span<const std::size_t> cache_sizes,
                                             const PredictionWindowConfig& config,
                                             const RefreshFn& refresh, const std::string& name);

struct ThresholdCalibration {
  double best_threshold = 0.5;
  double best_hit_rate = 0.0;
  std::vector<std::pair<double, double>> grid;  // (P_I, average hit rate)
};

/// Picks the P_I from `grid` with the best average hit rate at one cache size
/// over events [begin, end); ties go to the earlier grid entry. Meant for a
/// validation segment. Fake updates are rejected.
ThresholdCalibration calibrate_request_threshold(PairScorer& scorer, const Trace& trace,
                                                 std::size_t begin, std::size_t end,
                                                 std::size_t cache_size,
                                                 const PredictionWindowConfig& config,
                                                 std::span<const double> grid,
                                                 const RefreshFn& refresh);

/// 0.30, 0.31, ..., 0.80.
std::vector<double> default_threshold_grid();

/// Candidate users and items for the hour starting at hour_start (sorted).
std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> candidates_for(
    const Trace& trace, double hour_start, CandidateScope scope);
/// Same, over events [0, stop) with the recency span ending at reference_time.
std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> candidates_for(
    const Trace& trace, std::size_t stop, double reference_time, CandidateScope scope);

/// Scores pairs with a trained model against a read-only state. With fake
/// updates, predicted requests go into a per-window scratch copy.
class ModelScorer final : public PairScorer {
 public:
  ModelScorer(const Model& model, const GraphState& state, bool fake_updates);

  void begin_window(double start) override;
  std::vector<double> score(std::span<const std::uint32_t> users,
                            std::span<const std::uint32_t> items, double t) override;
  void record_fake_requests(std::span<const UserItem> pairs, double t) override;
  bool uses_fake_requests() const override;

 private:
  const GraphState& current() const { return scratch_ ? *scratch_ : state_; }

  const Model& model_;
  const GraphState& state_;
  bool fake_updates_;
  std::optional<GraphState> scratch_;
  double window_start_ = 0.0;
  double reference_time_ = 0.0;
  std::vector<NodeId> cached_nodes_;
  std::optional<MemoryUpdate> cached_memory_;
};

/// Model-driven caching. `state` must already hold every event before
/// `begin`; it is advanced with real events at refresh hours.
std::vector<PolicyRun> run_model_policy(const Model& model, GraphState& state, const Trace& trace,
                                        std::size_t begin, std::size_t end,
                                        std::span<const std::size_t> cache_sizes,
                                        const PredictionWindowConfig& config);

/// calibrate_request_threshold with a ModelScorer; `state` must hold every
/// event before `begin` and is advanced like run_model_policy does.
ThresholdCalibration calibrate_model_threshold(const Model& model, GraphState& state,
                                               const Trace& trace, std::size_t begin,
                                               std::size_t end, std::size_t cache_size,
                                               const PredictionWindowConfig& config,
                                               std::span<const double> grid);

/// hour,policy,cache_size,hit_rate rows with a header line.
void write_hit_rate_csv(std::ostream& out, std::span<const PolicyRun> runs);
nlohmann::ordered_json hit_rate_summary(std::span<const PolicyRun> runs);

}  // namespace aoicache
