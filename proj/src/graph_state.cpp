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

#include "aoicache/graph_state.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "aoicache/errors.hpp"

namespace aoicache {

void MessageBuffer::push(MessageEntry entry) {
  if (capacity_ == 0) return;
  entries_.push_front(std::move(entry));
  if (entries_.size() > capacity_) entries_.pop_back();
}

TemporalNeighborIndex::TemporalNeighborIndex(std::size_t num_nodes, std::size_t edge_dim)
    : edge_dim_(edge_dim), lists_(num_nodes) {}

void TemporalNeighborIndex::insert(NodeId a, NodeId b, double timestamp,
                                   std::span<const double> edge_features) {
  const std::size_t offset = edge_storage_.size();
  edge_storage_.insert(edge_storage_.end(), edge_features.begin(), edge_features.end());
  lists_[a].push_back({b, timestamp, offset});
  lists_[b].push_back({a, timestamp, offset});
}

std::vector<NeighborEntry> TemporalNeighborIndex::query(NodeId node, double t,
                                                        std::size_t n) const {
  std::vector<NeighborEntry> out;
  if (node >= lists_.size()) return out;
  const auto& list = lists_[node];
  auto end = std::lower_bound(list.begin(), list.end(), t,
                              [](const NeighborEntry& e, double v) { return e.timestamp < v; });
  while (end != list.begin() && out.size() < n) {
    --end;
    out.push_back(*end);
  }
  return out;
}

std::span<const double> TemporalNeighborIndex::edge_features(const NeighborEntry& e) const {
  return std::span<const double>(edge_storage_).subspan(e.edge_offset, edge_dim_);
}

std::size_t TemporalNeighborIndex::degree(NodeId node) const {
  return node < lists_.size() ? lists_[node].size() : 0;
}

MemoryStore::MemoryStore(std::size_t num_nodes, std::size_t dim)
    : dim_(dim),
      values_(num_nodes * dim, 0.0),
      last_update_(num_nodes, 0.0),
      pending_(num_nodes, 0) {}

std::span<const double> MemoryStore::get(NodeId node) const {
  return std::span<const double>(values_).subspan(static_cast<std::size_t>(node) * dim_, dim_);
}

void MemoryStore::set(NodeId node, std::span<const double> value, double timestamp) {
  if (value.size() != dim_) {
    throw ShapeError("memory write of dimension " + std::to_string(value.size()) +
                     ", store dimension is " + std::to_string(dim_));
  }
  std::copy(value.begin(), value.end(), values_.begin() + static_cast<std::ptrdiff_t>(node * dim_));
  last_update_[node] = timestamp;
  pending_[node] = 0;
}

GraphState::GraphState(const Dims& dims)
    : dims_(dims),
      memory_(dims.num_users + dims.num_items, dims.memory_dim),
      buffers_(dims.num_users + dims.num_items, MessageBuffer(dims.buffer_capacity)),
      neighbors_(dims.num_users + dims.num_items, dims.edge_dim),
      last_event_(dims.num_users + dims.num_items, -std::numeric_limits<double>::infinity()) {}

void GraphState::insert_event(std::uint32_t user, std::uint32_t item, double timestamp,
                              std::span<const double> edge_features) {
  if (user >= dims_.num_users || item >= dims_.num_items) {
    throw InvalidArgument("event (" + std::to_string(user) + ", " + std::to_string(item) +
                          ") outside the graph universe");
  }
  if (edge_features.size() != dims_.edge_dim) {
    throw ShapeError("edge features of dimension " + std::to_string(edge_features.size()) +
                     ", graph expects " + std::to_string(dims_.edge_dim));
  }
  const NodeId u = user_node(user);
  const NodeId i = item_node(item);
  // Node features are zero vectors, so both messages share the same layout.
  std::vector<double> raw(message_dim(), 0.0);
  std::copy(edge_features.begin(), edge_features.end(),
            raw.begin() + static_cast<std::ptrdiff_t>(2 * dims_.node_feature_dim));
  buffers_[u].push({raw, timestamp});
  buffers_[i].push({std::move(raw), timestamp});
  neighbors_.insert(u, i, timestamp, edge_features);
  memory_.add_pending(u);
  memory_.add_pending(i);
  last_event_[u] = std::max(last_event_[u], timestamp);
  last_event_[i] = std::max(last_event_[i], timestamp);
}

RecentMessages GraphState::recent_messages(NodeId node, double t, std::size_t n) const {
  if (n == 0) throw InvalidArgument("recent_messages: n must be at least 1");
  RecentMessages out;
  // Zero-width messages are stored as a single zero column.
  out.rows = Tensor::matrix(n, std::max<std::size_t>(message_dim(), 1));
  out.births.assign(n, 0.0);
  out.padded.assign(n, true);
  if (!contains(node)) return out;
  const MessageBuffer& buf = buffers_[node];
  for (std::size_t k = 0; k < buf.size() && out.real_count < n; ++k) {
    const MessageEntry& m = buf[k];
    if (!(m.birth < t)) continue;
    const std::size_t slot = out.real_count++;
    std::copy(m.raw.begin(), m.raw.end(), out.rows.row(slot).begin());
    out.births[slot] = m.birth;
    out.padded[slot] = false;
  }
  return out;
}

double GraphState::last_event_time(NodeId node) const {
  return contains(node) ? last_event_[node] : -std::numeric_limits<double>::infinity();
}

// --- binary snapshot --------------------------------------------------------
//
// Little-endian host layout:
//   magic "AOICGS" + u16 version
//   dims: 6 x u64
//   memory: values (f64 x nodes*dim), last_update (f64 x nodes), pending (u32 x nodes)
//   last_event (f64 x nodes)
//   buffers: per node u64 count, then per entry f64 birth + f64 x message_dim
//   neighbors: u64 edge storage length + f64 data; per node u64 count then
//              entries (u32 neighbor, f64 timestamp, u64 offset)

namespace {

constexpr char kMagic[6] = {'A', 'O', 'I', 'C', 'G', 'S'};
constexpr std::uint16_t kSnapshotVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void put_array(std::ostream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("graph snapshot truncated");
  return v;
}

template <typename T>
void get_array(std::istream& in, std::vector<T>& v, std::size_t n) {
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw FormatError("graph snapshot truncated");
}

}  // namespace

void GraphState::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put(out, kSnapshotVersion);
  for (std::uint64_t d : {dims_.num_users, dims_.num_items, dims_.node_feature_dim, dims_.edge_dim,
                          dims_.memory_dim, dims_.buffer_capacity}) {
    put(out, d);
  }
  put_array(out, memory_.values_);
  put_array(out, memory_.last_update_);
  put_array(out, memory_.pending_);
  put_array(out, last_event_);
  for (const auto& buf : buffers_) {
    put(out, static_cast<std::uint64_t>(buf.size()));
    for (std::size_t k = 0; k < buf.size(); ++k) {
      put(out, buf[k].birth);
      put_array(out, buf[k].raw);
    }
  }
  put(out, static_cast<std::uint64_t>(neighbors_.edge_storage_.size()));
  put_array(out, neighbors_.edge_storage_);
  for (const auto& list : neighbors_.lists_) {
    put(out, static_cast<std::uint64_t>(list.size()));
    for (const auto& e : list) {
      put(out, static_cast<std::uint32_t>(e.neighbor));
      put(out, e.timestamp);
      put(out, static_cast<std::uint64_t>(e.edge_offset));
    }
  }
  if (!out) throw Error("failed writing graph snapshot");
}

void GraphState::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write graph snapshot '" + path.string() + "'");
  save(out);
}

GraphState GraphState::load(std::istream& in) {
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not an aoicache graph snapshot");
  }
  const auto version = get<std::uint16_t>(in);
  if (version != kSnapshotVersion) {
    throw FormatError("unsupported graph snapshot version " + std::to_string(version));
  }
  Dims dims;
  dims.num_users = get<std::uint64_t>(in);
  dims.num_items = get<std::uint64_t>(in);
  dims.node_feature_dim = get<std::uint64_t>(in);
  dims.edge_dim = get<std::uint64_t>(in);
  dims.memory_dim = get<std::uint64_t>(in);
  dims.buffer_capacity = get<std::uint64_t>(in);
  GraphState s(dims);
  const std::size_t nodes = s.num_nodes();
  get_array(in, s.memory_.values_, nodes * dims.memory_dim);
  get_array(in, s.memory_.last_update_, nodes);
  get_array(in, s.memory_.pending_, nodes);
  get_array(in, s.last_event_, nodes);
  std::vector<MessageEntry> entries;
  for (std::size_t v = 0; v < nodes; ++v) {
    const auto count = get<std::uint64_t>(in);
    if (count > dims.buffer_capacity) throw FormatError("graph snapshot buffer overflow");
    entries.clear();
    for (std::uint64_t k = 0; k < count; ++k) {
      MessageEntry e;
      e.birth = get<double>(in);
      get_array(in, e.raw, s.message_dim());
      entries.push_back(std::move(e));
    }
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) s.buffers_[v].push(std::move(*it));
  }
  const auto storage = get<std::uint64_t>(in);
  get_array(in, s.neighbors_.edge_storage_, storage);
  for (std::size_t v = 0; v < nodes; ++v) {
    const auto count = get<std::uint64_t>(in);
    auto& list = s.neighbors_.lists_[v];
    list.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) {
      NeighborEntry e;
      e.neighbor = get<std::uint32_t>(in);
      e.timestamp = get<double>(in);
      e.edge_offset = get<std::uint64_t>(in);
      if (e.edge_offset + dims.edge_dim > storage) throw FormatError("graph snapshot edge offset out of range");
      list.push_back(e);
    }
  }
  return s;
}

GraphState GraphState::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read graph snapshot '" + path.string() + "'");
  return load(in);
}

}  // namespace aoicache
