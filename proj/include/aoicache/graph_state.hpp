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
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "aoicache/tensor.hpp"
#include "aoicache/trace.hpp"

namespace aoicache {

/// One buffered raw message: Inf = v_self || v_other || e, plus its birth time.
struct MessageEntry {
  std::vector<double> raw;
  double birth = 0.0;

  friend bool operator==(const MessageEntry&, const MessageEntry&) = default;
};

/// Bounded per-node history, newest first.
class MessageBuffer {
 public:
  explicit MessageBuffer(std::size_t capacity = 10) : capacity_(capacity) {}

  void push(MessageEntry entry);
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const MessageEntry& operator[](std::size_t i) const { return entries_[i]; }

  friend bool operator==(const MessageBuffer&, const MessageBuffer&) = default;

 private:
  std::size_t capacity_;
  std::deque<MessageEntry> entries_;
};

/// Up to n messages strictly older than the query time, padded to n rows.
struct RecentMessages {
  Tensor rows;                // n x message_dim, zeros in padded slots
  std::vector<double> births;  // 0 in padded slots
  std::vector<bool> padded;
  std::size_t real_count = 0;
};

struct NeighborEntry {
  NodeId neighbor = 0;
  double timestamp = 0.0;
  std::size_t edge_offset = 0;  // into TemporalNeighborIndex edge storage

  friend bool operator==(const NeighborEntry&, const NeighborEntry&) = default;
};

/// Per-node interaction partners, appended in time order.
class TemporalNeighborIndex {
 public:
  TemporalNeighborIndex() = default;
  TemporalNeighborIndex(std::size_t num_nodes, std::size_t edge_dim);

  void insert(NodeId a, NodeId b, double timestamp, std::span<const double> edge_features);
  /// Newest-first entries with timestamp strictly before t, at most n.
  std::vector<NeighborEntry> query(NodeId node, double t, std::size_t n) const;
  std::span<const double> edge_features(const NeighborEntry& e) const;
  std::size_t degree(NodeId node) const;
  std::size_t edge_dim() const { return edge_dim_; }

  friend bool operator==(const TemporalNeighborIndex&, const TemporalNeighborIndex&) = default;

 private:
  friend class GraphState;
  std::size_t edge_dim_ = 0;
  std::vector<std::vector<NeighborEntry>> lists_;
  std::vector<double> edge_storage_;
};

/// Per-node memory vectors, zero-initialized.
class MemoryStore {
 public:
  MemoryStore() = default;
  MemoryStore(std::size_t num_nodes, std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t num_nodes() const { return last_update_.size(); }
  std::span<const double> get(NodeId node) const;
  void set(NodeId node, std::span<const double> value, double timestamp);
  double last_update(NodeId node) const { return last_update_[node]; }
  /// Messages received since the last memory write.
  std::uint32_t pending(NodeId node) const { return pending_[node]; }
  void add_pending(NodeId node) { ++pending_[node]; }

  friend bool operator==(const MemoryStore&, const MemoryStore&) = default;

 private:
  friend class GraphState;
  std::size_t dim_ = 0;
  std::vector<double> values_;
  std::vector<double> last_update_;
  std::vector<std::uint32_t> pending_;
};

/// Everything that evolves while replaying a trace: memory, message buffers
/// and the temporal neighbor index. Copies are independent snapshots.
class GraphState {
 public:
  struct Dims {
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    std::size_t node_feature_dim = 0;
    std::size_t edge_dim = 0;
    std::size_t memory_dim = 0;
    std::size_t buffer_capacity = 10;

    friend bool operator==(const Dims&, const Dims&) = default;
  };

  GraphState() = default;
  explicit GraphState(const Dims& dims);

  const Dims& dims() const { return dims_; }
  std::size_t num_nodes() const { return dims_.num_users + dims_.num_items; }
  /// Inf dimension: two node-feature blocks plus edge features.
  std::size_t message_dim() const { return 2 * dims_.node_feature_dim + dims_.edge_dim; }
  NodeId user_node(std::uint32_t user) const { return user; }
  NodeId item_node(std::uint32_t item) const {
    return static_cast<NodeId>(dims_.num_users + item);
  }
  bool is_user(NodeId node) const { return node < dims_.num_users; }
  bool contains(NodeId node) const { return node < num_nodes(); }

  /// Records an interaction: messages Inf_jk / Inf_kj into both buffers,
  /// neighbor entries both ways, and a pending mark on both memories.
  void insert_event(std::uint32_t user, std::uint32_t item, double timestamp,
                    std::span<const double> edge_features);

  /// Unknown nodes yield an all-padded result.
  RecentMessages recent_messages(NodeId node, double t, std::size_t n) const;

  /// Time of the newest inserted event touching node, or -inf if none.
  double last_event_time(NodeId node) const;

  MemoryStore& memory() { return memory_; }
  const MemoryStore& memory() const { return memory_; }
  const MessageBuffer& buffer(NodeId node) const { return buffers_[node]; }
  const TemporalNeighborIndex& neighbors() const { return neighbors_; }

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static GraphState load(std::istream& in);
  static GraphState load(const std::filesystem::path& path);

  friend bool operator==(const GraphState&, const GraphState&) = default;

 private:
  Dims dims_;
  MemoryStore memory_;
  std::vector<MessageBuffer> buffers_;
  TemporalNeighborIndex neighbors_;
  std::vector<double> last_event_;
};

}  // namespace aoicache
