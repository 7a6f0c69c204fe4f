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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aoicache/graph_state.hpp"
#include "aoicache/model.hpp"
#include "aoicache/trace.hpp"

namespace aoicache {

struct TrainConfig {
  std::size_t batch_size = 200;
  double learning_rate = 1e-4;
  std::size_t epochs = 10;
  /// Stop after this many epochs without a better validation old-node AP.
  std::size_t patience = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-event scores from one pass over a split segment.
struct ScoredEvents {
  std::vector<double> positive;
  std::vector<double> negative;
  /// True when the event touches a node never seen in training.
  std::vector<bool> inductive;
  double mean_loss = 0.0;
};

struct TaskMetrics {
  std::optional<double> auc;
  std::optional<double> ap;
  std::size_t events = 0;
};

struct SplitMetrics {
  TaskMetrics transductive;
  TaskMetrics inductive;
  double loss = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  SplitMetrics validation;
};

struct LossPoint {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
};

struct EvalReport {
  std::string variant;
  std::string aggregator;
  std::vector<EpochRecord> epochs;
  std::vector<LossPoint> loss_curve;
  std::size_t best_epoch = 0;
  SplitMetrics validation;
  std::optional<SplitMetrics> test;
  std::size_t clamped_predictions = 0;
  std::vector<std::string> warnings;

  nlohmann::ordered_json to_json() const;
  /// epoch,batch,loss rows with a header line.
  void write_loss_csv(std::ostream& out) const;
};

nlohmann::ordered_json to_json(const SplitMetrics& m);

/// Scores events [begin, end) of trace batch by batch against seeded uniform
/// negatives, updating `state` with the ground-truth events after each batch.
/// No gradients are recorded.
ScoredEvents score_segment(const Model& model, GraphState& state, const Trace& trace,
                           std::size_t begin, std::size_t end, std::size_t batch_size,
                           std::uint64_t seed, const TraceSplit& split);

/// AUC/AP over each task subset; empty subsets yield absent metrics and a
/// warning appended to *warnings (tagged with `label`).
SplitMetrics summarize(const ScoredEvents& scored, const std::string& label,
                       std::vector<std::string>* warnings);

struct TrainResult {
  Model model;                    // best-epoch parameters
  GraphState train_state;         // state at the train/validation boundary
  GraphState validation_state;    // state after replaying train + validation
  EvalReport report;
};

/// Trains on the split's training segment with early stopping on validation
/// old-node AP, then evaluates the test segment from the validation-boundary
/// snapshot. Throws DivergenceError on a non-finite loss.
TrainResult train(const ModelConfig& model_config, const TrainConfig& config, const Trace& trace,
                  const TraceSplit& split, std::ostream* log = nullptr);

/// Evaluates the test segment, starting from a validation-boundary state.
SplitMetrics evaluate_test(const Model& model, GraphState state, const Trace& trace,
                           const TraceSplit& split, std::size_t batch_size, std::uint64_t seed,
                           std::vector<std::string>* warnings);

}  // namespace aoicache
