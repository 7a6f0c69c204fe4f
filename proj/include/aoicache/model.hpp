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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aoicache/aoi_attention.hpp"
#include "aoicache/autodiff.hpp"
#include "aoicache/embedding.hpp"
#include "aoicache/graph_state.hpp"
#include "aoicache/parameters.hpp"
#include "aoicache/time_encoder.hpp"
#include "aoicache/trace.hpp"

namespace aoicache {

/// How a node's recent messages are reduced before the GRU.
///   latest: raw part of the newest message (TGN-L)
///   mean: mean raw part over the available messages (TGN-M)
///   attention: multi-head attention + FFN over all N messages (TGN-A)
///   aoi-attention: attention after the age threshold filter (ATAGNN)
enum class Aggregator { kLatest, kMean, kAttention, kAoiAttention };

std::string_view to_string(Aggregator a);
/// Report label, e.g. "TGN-L" or "ATAGNN".
std::string_view variant_label(Aggregator a);
Aggregator parse_aggregator(std::string_view s);

struct ModelConfig {
  std::size_t node_feature_dim = 0;
  std::size_t edge_dim = 0;
  std::size_t time_dim = 16;
  std::size_t memory_dim = 32;
  std::size_t neighbors = 10;  // message window N and GAT fan-in
  std::size_t attention_heads = 3;
  std::size_t attention_head_dim = 16;
  std::size_t ffn_hidden = 32;
  std::size_t threshold_hidden = 8;
  std::size_t gat_heads = 3;
  std::size_t gat_head_dim = 16;
  std::size_t gat_hidden = 32;
  std::size_t embedding_dim = 32;
  std::size_t predictor_hidden = 32;
  Aggregator aggregator = Aggregator::kAoiAttention;
  MaskOrientation orientation = MaskOrientation::kStaleDrops;
  HeadActivation head_activation = HeadActivation::kIdentity;
  /// Route latest aggregation through the generic message tensors instead of
  /// reading the buffers directly. Results are identical; used for testing.
  bool force_generic_path = false;
  double max_timespan = 1.0;  // seeds the omega initialization
  std::uint64_t seed = 0;

  std::size_t message_dim() const { return 2 * node_feature_dim + edge_dim; }
  /// Throws InvalidArgument on zero sizes or a zero message dimension.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Memory rows for a sorted set of nodes. Nodes with pending messages carry
/// a freshly computed (differentiable) Mem'; the rest carry their stored value.
struct MemoryUpdate {
  std::vector<NodeId> nodes;
  std::vector<bool> updated;
  ad::Var memory;  // nodes.size() x memory_dim

  std::size_t row_of(NodeId node) const;
};

struct BatchOutput {
  ad::Var loss;
  std::vector<double> positive_scores;
  std::vector<double> negative_scores;
  MemoryUpdate memory;
  double reference_time = 0.0;
  std::size_t clamp_count = 0;
};

class Model {
 public:
  explicit Model(const ModelConfig& config);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  const TimeEncoder& time_encoder() const { return time_; }
  const Gru& gru() const { return gru_; }
  const GatLayer& gat() const { return gat_; }
  const Predictor& predictor() const { return predictor_; }
  const MultiHeadAggregator& aggregator() const { return attention_; }
  const AoiThresholdNet& threshold_net() const { return threshold_; }

  GraphState::Dims graph_dims(std::size_t num_users, std::size_t num_items) const;

  /// Aggregates the messages of every pending node in `nodes` (sorted,
  /// unique) and applies the GRU. Ages are measured against t_ref and only
  /// messages born at or before t_ref are used.
  MemoryUpdate updated_memory(const GraphState& state, std::span<const NodeId> nodes,
                              double t_ref) const;

  /// Embeddings for (node, T_p) queries; every query node must appear in
  /// memory.nodes. Throws InvalidArgument when T_p precedes the node's
  /// latest event.
  ad::Var embed(const GraphState& state, const MemoryUpdate& memory,
                std::span<const NodeId> query_nodes, std::span<const double> query_times) const;

  /// Forward pass for events [begin, end) of trace against the given
  /// negative items: memory update, embeddings, scores and BCE loss.
  BatchOutput forward_batch(const GraphState& state, const Trace& trace, std::size_t begin,
                            std::size_t end, std::span<const std::uint32_t> negative_items) const;

  /// Stores the values of updated memories (stamped t_ref), then inserts
  /// events [begin, end) into the state.
  static void commit(GraphState& state, const MemoryUpdate& memory, double t_ref,
                     const Trace& trace, std::size_t begin, std::size_t end);

  /// Advances the state over events [begin, end) without scoring: per batch,
  /// memory updates for the batch's users and items, then commit.
  void replay(GraphState& state, const Trace& trace, std::size_t begin, std::size_t end,
              std::size_t batch_size) const;

  /// Snapshot of all parameter values, in registration order.
  std::vector<Tensor> parameter_values() const;
  void set_parameter_values(const std::vector<Tensor>& values);

 private:
  ad::Var aggregate_pending(const GraphState& state, std::span<const NodeId> nodes,
                            double t_ref) const;

  ModelConfig config_;
  ParameterSet params_;
  TimeEncoder time_;
  AoiThresholdNet threshold_;
  MultiHeadAggregator attention_;
  Gru gru_;
  GatLayer gat_;
  Predictor predictor_;
};

}  // namespace aoicache
