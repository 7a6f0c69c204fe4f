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
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace aoicache {

/// Users occupy node ids [0, num_users); items follow at [num_users, num_users + num_items).
using NodeId = std::uint32_t;

/// One timestamped user -> item request. Views into the owning Trace.
struct InteractionEvent {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double timestamp = 0.0;
  std::span<const double> edge_features;
};

/// Chronologically ordered interaction sequence (the dynamic bipartite graph).
class Trace {
 public:
  explicit Trace(std::size_t edge_dim = 0) : edge_dim_(edge_dim) {}

  /// Appends an event; the timestamp must be >= 0 and >= the previous one.
  void append(std::uint32_t user, std::uint32_t item, double timestamp,
              std::span<const double> edge_features);

  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  std::size_t edge_dim() const { return edge_dim_; }

  /// Universe sizes; at least max id + 1, but may be larger (split segments
  /// keep the parent's universe).
  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t num_nodes() const { return num_users_ + num_items_; }
  void reserve_universe(std::size_t users, std::size_t items);

  InteractionEvent event(std::size_t i) const;
  std::span<const std::uint32_t> users() const { return users_; }
  std::span<const std::uint32_t> items() const { return items_; }
  std::span<const double> timestamps() const { return times_; }

  NodeId user_node(std::uint32_t user) const { return user; }
  NodeId item_node(std::uint32_t item) const { return static_cast<NodeId>(num_users_ + item); }

  /// Events [begin, end) as a new trace with the same universe.
  Trace slice(std::size_t begin, std::size_t end) const;
  /// Appends all of other's events (universe grows to cover both).
  void extend(const Trace& other);

  // Original identifiers from the source file, indexed by dense id. Empty for
  // generated traces.
  std::vector<std::string> user_labels;
  std::vector<std::string> item_labels;

  friend bool operator==(const Trace&, const Trace&) = default;

 private:
  std::size_t edge_dim_ = 0;
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<std::uint32_t> users_;
  std::vector<std::uint32_t> items_;
  std::vector<double> times_;
  std::vector<double> features_;
};

struct DatasetSummary {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  std::size_t edge_feature_dim = 0;
  double time_start = 0.0;
  double time_end = 0.0;
  /// Rows that arrived out of timestamp order and were moved by the stable sort.
  std::size_t reordered_rows = 0;

  double time_span() const { return time_end - time_start; }
  std::string to_json() const;
};

DatasetSummary summarize(const Trace& trace, std::size_t reordered_rows = 0);

enum class HeaderMode { kAuto, kPresent, kAbsent };

/// Column layout: user_id, item_id, timestamp, state_label, edge features...
/// The state label is parsed and discarded.
struct CsvSchema {
  HeaderMode header = HeaderMode::kAuto;
  /// Minimum number of edge-feature columns; rows with fewer are malformed.
  std::size_t min_edge_features = 0;
};

struct IngestResult {
  Trace trace;
  DatasetSummary summary;
};

/// Parses a trace. Ids are densely re-indexed in order of first appearance
/// after a stable sort by timestamp. Throws FormatError("line N: ...") on
/// malformed rows.
IngestResult ingest_csv(std::istream& in, const CsvSchema& schema = {});
IngestResult ingest_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

/// Writes the trace in the same CSV layout (header included, state label 0).
void write_csv(std::ostream& out, const Trace& trace);

struct SplitFractions {
  double train = 0.7;
  double validation = 0.15;
  double test = 0.15;
};

struct TraceSplit {
  Trace train;
  Trace validation;
  Trace test;
  std::size_t train_end = 0;       // index of first validation event
  std::size_t validation_end = 0;  // index of first test event
  /// Node ids present in validation or test but never in train, ascending.
  std::vector<NodeId> new_nodes;

  bool is_new(NodeId node) const;
};

/// Contiguous time-ordered split at round(train*n) and round((train+val)*n).
TraceSplit chronological_split(const Trace& trace, const SplitFractions& fractions);

}  // namespace aoicache
