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

#include "aoicache/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "aoicache/errors.hpp"
#include "aoicache/rng.hpp"

namespace aoicache {

std::string_view to_string(Aggregator a) {
  switch (a) {
    case Aggregator::kLatest: return "latest";
    case Aggregator::kMean: return "mean";
    case Aggregator::kAttention: return "attention";
    case Aggregator::kAoiAttention: return "aoi-attention";
  }
  return "?";
}

std::string_view variant_label(Aggregator a) {
  switch (a) {
    case Aggregator::kLatest: return "TGN-L";
    case Aggregator::kMean: return "TGN-M";
    case Aggregator::kAttention: return "TGN-A";
    case Aggregator::kAoiAttention: return "ATAGNN";
  }
  return "?";
}

Aggregator parse_aggregator(std::string_view s) {
  for (Aggregator a : {Aggregator::kLatest, Aggregator::kMean, Aggregator::kAttention,
                       Aggregator::kAoiAttention}) {
    if (s == to_string(a)) return a;
  }
  throw InvalidArgument("unknown aggregator '" + std::string(s) +
                        "' (allowed: latest, mean, attention, aoi-attention)");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw InvalidArgument(std::string("model ") + name + " must be positive");
  };
  positive(time_dim, "time_dim");
  positive(memory_dim, "memory_dim");
  positive(neighbors, "neighbors");
  positive(attention_heads, "attention_heads");
  positive(attention_head_dim, "attention_head_dim");
  positive(ffn_hidden, "ffn_hidden");
  positive(threshold_hidden, "threshold_hidden");
  positive(gat_heads, "gat_heads");
  positive(gat_head_dim, "gat_head_dim");
  positive(gat_hidden, "gat_hidden");
  positive(embedding_dim, "embedding_dim");
  positive(predictor_hidden, "predictor_hidden");
  if (message_dim() == 0) {
    throw InvalidArgument("model needs edge or node features (message dimension is 0)");
  }
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["node_feature_dim"] = node_feature_dim;
  j["edge_dim"] = edge_dim;
  j["time_dim"] = time_dim;
  j["memory_dim"] = memory_dim;
  j["neighbors"] = neighbors;
  j["attention_heads"] = attention_heads;
  j["attention_head_dim"] = attention_head_dim;
  j["ffn_hidden"] = ffn_hidden;
  j["threshold_hidden"] = threshold_hidden;
  j["gat_heads"] = gat_heads;
  j["gat_head_dim"] = gat_head_dim;
  j["gat_hidden"] = gat_hidden;
  j["embedding_dim"] = embedding_dim;
  j["predictor_hidden"] = predictor_hidden;
  j["aggregator"] = std::string(to_string(aggregator));
  j["mask_orientation"] = std::string(to_string(orientation));
  j["head_activation"] = std::string(to_string(head_activation));
  j["force_generic_path"] = force_generic_path;
  j["max_timespan"] = max_timespan;
  j["seed"] = seed;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.node_feature_dim = j.at("node_feature_dim").get<std::size_t>();
    c.edge_dim = j.at("edge_dim").get<std::size_t>();
    c.time_dim = j.at("time_dim").get<std::size_t>();
    c.memory_dim = j.at("memory_dim").get<std::size_t>();
    c.neighbors = j.at("neighbors").get<std::size_t>();
    c.attention_heads = j.at("attention_heads").get<std::size_t>();
    c.attention_head_dim = j.at("attention_head_dim").get<std::size_t>();
    c.ffn_hidden = j.at("ffn_hidden").get<std::size_t>();
    c.threshold_hidden = j.at("threshold_hidden").get<std::size_t>();
    c.gat_heads = j.at("gat_heads").get<std::size_t>();
    c.gat_head_dim = j.at("gat_head_dim").get<std::size_t>();
    c.gat_hidden = j.at("gat_hidden").get<std::size_t>();
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.predictor_hidden = j.at("predictor_hidden").get<std::size_t>();
    c.aggregator = parse_aggregator(j.at("aggregator").get<std::string>());
    c.orientation = parse_mask_orientation(j.at("mask_orientation").get<std::string>());
    c.head_activation = parse_head_activation(j.at("head_activation").get<std::string>());
    c.force_generic_path = j.at("force_generic_path").get<bool>();
    c.max_timespan = j.at("max_timespan").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
}

std::size_t MemoryUpdate::row_of(NodeId node) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), node);
  if (it == nodes.end() || *it != node) {
    throw InvalidArgument("node " + std::to_string(node) + " missing from memory update");
  }
  return static_cast<std::size_t>(it - nodes.begin());
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(derive_seed(config_.seed, {1}));
  const std::size_t d = config_.message_dim();
  const std::size_t dt = config_.time_dim;
  const std::size_t m = config_.memory_dim;
  time_ = TimeEncoder(
      params_.add("time.omega", TimeEncoder::initial_omegas(dt, config_.max_timespan)));
  if (config_.aggregator == Aggregator::kAoiAttention) {
    threshold_ = AoiThresholdNet::create(params_, "aoi.threshold", config_.neighbors,
                                         config_.threshold_hidden, rng);
  }
  if (config_.aggregator == Aggregator::kAttention ||
      config_.aggregator == Aggregator::kAoiAttention) {
    attention_ = MultiHeadAggregator::create(params_, "aggregator", d + dt, d,
                                             config_.attention_heads, config_.attention_head_dim,
                                             config_.ffn_hidden, config_.head_activation, rng);
  }
  gru_ = Gru::create(params_, "gru", d, m, rng);
  gat_ = GatLayer::create(params_, "gat", m + dt, m + config_.edge_dim + dt, config_.gat_heads,
                          config_.gat_head_dim, config_.gat_hidden, config_.embedding_dim, rng);
  predictor_ = Predictor::create(params_, "predictor", config_.embedding_dim,
                                 config_.predictor_hidden, rng);
}

GraphState::Dims Model::graph_dims(std::size_t num_users, std::size_t num_items) const {
  GraphState::Dims dims;
  dims.num_users = num_users;
  dims.num_items = num_items;
  dims.node_feature_dim = config_.node_feature_dim;
  dims.edge_dim = config_.edge_dim;
  dims.memory_dim = config_.memory_dim;
  dims.buffer_capacity = config_.neighbors;
  return dims;
}

ad::Var Model::aggregate_pending(const GraphState& state, std::span<const NodeId> nodes,
                                 double t_ref) const {
  const std::size_t g_count = nodes.size();
  const std::size_t d = config_.message_dim();
  const std::size_t slots = config_.neighbors;
  const Aggregator agg = config_.aggregator;

  if (agg == Aggregator::kLatest && !config_.force_generic_path) {
    Tensor latest = Tensor::matrix(g_count, d);
    for (std::size_t g = 0; g < g_count; ++g) {
      const MessageBuffer& buf = state.buffer(nodes[g]);
      std::size_t k = 0;
      while (k < buf.size() && buf[k].birth > t_ref) ++k;
      if (k == buf.size()) throw InvalidArgument("pending node without a usable message");
      std::copy(buf[k].raw.begin(), buf[k].raw.end(), latest.row(g).begin());
    }
    return ad::Var::constant(std::move(latest));
  }

  const double cutoff = std::nextafter(t_ref, std::numeric_limits<double>::infinity());
  Tensor inf = Tensor::matrix(g_count * slots, d);
  std::vector<double> births(g_count * slots, 0.0);
  std::vector<bool> padded(g_count * slots, true);
  for (std::size_t g = 0; g < g_count; ++g) {
    RecentMessages rm = state.recent_messages(nodes[g], cutoff, slots);
    if (rm.real_count == 0) throw InvalidArgument("pending node without a usable message");
    for (std::size_t s = 0; s < slots; ++s) {
      const std::size_t r = g * slots + s;
      std::copy_n(rm.rows.row(s).begin(), d, inf.row(r).begin());
      births[r] = rm.births[s];
      padded[r] = rm.padded[s];
    }
  }

  if (agg == Aggregator::kLatest || agg == Aggregator::kMean) {
    Tensor out = Tensor::matrix(g_count, d);
    for (std::size_t g = 0; g < g_count; ++g) {
      std::size_t used = 0;
      for (std::size_t s = 0; s < slots; ++s) {
        if (padded[g * slots + s]) continue;
        const auto row = inf.row(g * slots + s);
        for (std::size_t c = 0; c < d; ++c) out(g, c) += row[c];
        ++used;
        if (agg == Aggregator::kLatest) break;
      }
      if (used > 1) {
        for (std::size_t c = 0; c < d; ++c) out(g, c) /= static_cast<double>(used);
      }
    }
    return ad::Var::constant(std::move(out));
  }

  // Attention variants: messages are [Inf || phi(t_0 - t'_n)].
  Tensor inf0 = Tensor::matrix(g_count, d);
  for (std::size_t g = 0; g < g_count; ++g) {
    std::copy_n(inf.row(g * slots).begin(), d, inf0.row(g).begin());
  }
  std::vector<bool> masked = padded;
  std::vector<bool> fixed_delta(g_count * slots, false);  // slot 0 and padding use delta 0
  Tensor newest = Tensor::matrix(g_count, slots);
  Tensor birth_t = Tensor::matrix(g_count, slots);
  for (std::size_t g = 0; g < g_count; ++g) {
    for (std::size_t s = 0; s < slots; ++s) {
      const std::size_t r = g * slots + s;
      newest(g, s) = births[g * slots];
      birth_t(g, s) = births[r];
      fixed_delta[r] = s == 0 || padded[r];
    }
  }

  ad::Var adjusted = ad::Var::constant(birth_t);
  if (agg == Aggregator::kAoiAttention) {
    Tensor ages = Tensor::matrix(g_count, slots);
    for (std::size_t g = 0; g < g_count; ++g) {
      std::vector<bool> pad(padded.begin() + static_cast<std::ptrdiff_t>(g * slots),
                            padded.begin() + static_cast<std::ptrdiff_t>((g + 1) * slots));
      std::vector<double> a =
          compute_ages(std::span<const double>(births).subspan(g * slots, slots), pad, t_ref);
      for (std::size_t s = 0; s < slots; ++s) ages(g, s) = pad[s] ? 0.0 : a[s];
    }
    ad::Var age_var = ad::Var::constant(std::move(ages));
    ad::Var thre = threshold_.threshold(age_var);
    ad::Var mult = soft_mask_multiplier(age_var, thre, config_.orientation);
    for (std::size_t g = 0; g < g_count; ++g) {
      for (std::size_t s = 1; s < slots; ++s) {
        const std::size_t r = g * slots + s;
        if (!padded[r] && mult.value()(g, s) < 0.5) masked[r] = true;
      }
    }
    adjusted = ad::mul(adjusted, mult);
  }
  ad::Var delta = ad::sub(ad::Var::constant(std::move(newest)), adjusted);
  delta = ad::mask_fill(ad::reshape(delta, g_count * slots, 1), fixed_delta, 0.0);
  ad::Var messages = ad::concat_cols({ad::Var::constant(std::move(inf)), time_.encode(delta)});
  return attention_.aggregate(messages, ad::Var::constant(std::move(inf0)), masked, slots)
      .aggregated;
}

MemoryUpdate Model::updated_memory(const GraphState& state, std::span<const NodeId> nodes,
                                   double t_ref) const {
  MemoryUpdate out;
  out.nodes.assign(nodes.begin(), nodes.end());
  if (!std::is_sorted(out.nodes.begin(), out.nodes.end()) ||
      std::adjacent_find(out.nodes.begin(), out.nodes.end()) != out.nodes.end()) {
    throw InvalidArgument("updated_memory: nodes must be sorted and unique");
  }
  const std::size_t m = config_.memory_dim;
  const MemoryStore& store = state.memory();
  out.updated.assign(nodes.size(), false);
  std::vector<NodeId> pending;
  std::vector<std::size_t> pending_rows;
  std::vector<std::size_t> stale_rows;
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    if (!state.contains(nodes[r])) {
      throw InvalidArgument("node " + std::to_string(nodes[r]) + " outside the graph");
    }
    if (store.pending(nodes[r]) > 0) {
      out.updated[r] = true;
      pending.push_back(nodes[r]);
      pending_rows.push_back(r);
    } else {
      stale_rows.push_back(r);
    }
  }
  if (nodes.empty()) return out;

  std::vector<ad::Var> blocks;
  if (!pending.empty()) {
    Tensor old_mem = Tensor::matrix(pending.size(), m);
    for (std::size_t g = 0; g < pending.size(); ++g) {
      const auto v = store.get(pending[g]);
      std::copy(v.begin(), v.end(), old_mem.row(g).begin());
    }
    ad::Var input = aggregate_pending(state, pending, t_ref);
    blocks.push_back(gru_.update(ad::Var::constant(std::move(old_mem)), input));
  }
  if (!stale_rows.empty()) {
    Tensor kept = Tensor::matrix(stale_rows.size(), m);
    for (std::size_t k = 0; k < stale_rows.size(); ++k) {
      const auto v = store.get(nodes[stale_rows[k]]);
      std::copy(v.begin(), v.end(), kept.row(k).begin());
    }
    blocks.push_back(ad::Var::constant(std::move(kept)));
  }
  if (stale_rows.empty()) {
    out.memory = blocks.front();
    return out;
  }
  if (pending.empty()) {
    out.memory = blocks.front();
    return out;
  }
  // Interleave the two blocks back into node order.
  std::vector<std::size_t> order(nodes.size());
  for (std::size_t g = 0; g < pending_rows.size(); ++g) order[pending_rows[g]] = g;
  for (std::size_t k = 0; k < stale_rows.size(); ++k) order[stale_rows[k]] = pending.size() + k;
  out.memory = ad::select_rows(ad::concat_rows(blocks), order);
  return out;
}

ad::Var Model::embed(const GraphState& state, const MemoryUpdate& memory,
                     std::span<const NodeId> query_nodes, std::span<const double> query_times) const {
  if (query_nodes.size() != query_times.size() || query_nodes.empty()) {
    throw InvalidArgument("embed: need matching, non-empty node and time lists");
  }
  const std::size_t q = query_nodes.size();
  const std::size_t slots = config_.neighbors;
  const std::size_t m = config_.memory_dim;
  const std::size_t de = config_.edge_dim;
  const MemoryStore& store = state.memory();
  const TemporalNeighborIndex& index = state.neighbors();

  std::vector<std::size_t> rows(q);
  std::vector<double> self_delta(q);
  Tensor nbr_static = Tensor::matrix(q * slots, m + de);
  std::vector<double> nbr_delta(q * slots, 0.0);
  std::vector<bool> nbr_masked(q * slots, true);
  for (std::size_t k = 0; k < q; ++k) {
    const NodeId node = query_nodes[k];
    const double tp = query_times[k];
    rows[k] = memory.row_of(node);
    const double tl = state.last_event_time(node);
    if (std::isinf(tl)) {
      self_delta[k] = 0.0;
    } else if (tp < tl) {
      throw InvalidArgument("embed: target time " + std::to_string(tp) +
                            " precedes the latest event " + std::to_string(tl) + " of node " +
                            std::to_string(node));
    } else {
      self_delta[k] = tp - tl;
    }
    const auto nbrs = index.query(node, tp, slots);
    for (std::size_t s = 0; s < nbrs.size(); ++s) {
      const std::size_t r = k * slots + s;
      auto out = nbr_static.row(r);
      const auto mem = store.get(nbrs[s].neighbor);
      std::copy(mem.begin(), mem.end(), out.begin());
      const auto feats = index.edge_features(nbrs[s]);
      std::copy(feats.begin(), feats.end(), out.begin() + static_cast<std::ptrdiff_t>(m));
      nbr_delta[r] = tp - nbrs[s].timestamp;
      nbr_masked[r] = false;
    }
  }
  ad::Var self_rows = ad::concat_cols(
      {ad::select_rows(memory.memory, rows), time_.encode(std::span<const double>(self_delta))});
  ad::Var nbr_rows = ad::concat_cols({ad::Var::constant(std::move(nbr_static)),
                                      time_.encode(std::span<const double>(nbr_delta))});
  return gat_.embed(self_rows, nbr_rows, nbr_masked, slots).embedding;
}

BatchOutput Model::forward_batch(const GraphState& state, const Trace& trace, std::size_t begin,
                                 std::size_t end, std::span<const std::uint32_t> negative_items) const {
  if (begin >= end || end > trace.size()) throw InvalidArgument("forward_batch: empty or bad range");
  const std::size_t b = end - begin;
  if (negative_items.size() != b) {
    throw InvalidArgument("forward_batch: need one negative item per event");
  }
  BatchOutput out;
  out.reference_time = trace.timestamps()[end - 1];

  std::vector<NodeId> query_nodes(3 * b);
  std::vector<double> query_times(3 * b);
  for (std::size_t k = 0; k < b; ++k) {
    const std::size_t e = begin + k;
    const double t = trace.timestamps()[e];
    query_nodes[k] = state.user_node(trace.users()[e]);
    query_nodes[b + k] = state.item_node(trace.items()[e]);
    query_nodes[2 * b + k] = state.item_node(negative_items[k]);
    query_times[k] = query_times[b + k] = query_times[2 * b + k] = t;
  }
  std::vector<NodeId> nodes = query_nodes;
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  out.memory = updated_memory(state, nodes, out.reference_time);
  ad::Var emb = embed(state, out.memory, query_nodes, query_times);

  std::vector<std::size_t> user_rows(b), item_rows(b), neg_rows(b);
  for (std::size_t k = 0; k < b; ++k) {
    user_rows[k] = k;
    item_rows[k] = b + k;
    neg_rows[k] = 2 * b + k;
  }
  ad::Var eu = ad::select_rows(emb, user_rows);
  ad::Var pos = predictor_.score(eu, ad::select_rows(emb, item_rows));
  ad::Var neg = predictor_.score(eu, ad::select_rows(emb, neg_rows));
  out.positive_scores = pos.value().values();
  out.negative_scores = neg.value().values();
  std::vector<double> labels(2 * b, 0.0);
  std::fill_n(labels.begin(), b, 1.0);
  out.loss = bce_loss(ad::concat_rows({pos, neg}), labels, &out.clamp_count);
  return out;
}

void Model::commit(GraphState& state, const MemoryUpdate& memory, double t_ref, const Trace& trace,
                   std::size_t begin, std::size_t end) {
  if (memory.memory.defined()) {
    const Tensor& values = memory.memory.value();
    for (std::size_t r = 0; r < memory.nodes.size(); ++r) {
      if (memory.updated[r]) state.memory().set(memory.nodes[r], values.row(r), t_ref);
    }
  }
  for (std::size_t e = begin; e < end; ++e) {
    const InteractionEvent ev = trace.event(e);
    state.insert_event(ev.user, ev.item, ev.timestamp, ev.edge_features);
  }
}

void Model::replay(GraphState& state, const Trace& trace, std::size_t begin, std::size_t end,
                   std::size_t batch_size) const {
  if (batch_size == 0) throw InvalidArgument("replay: batch size must be at least 1");
  ad::NoGradGuard no_grad;
  for (std::size_t b = begin; b < end; b += batch_size) {
    const std::size_t e = std::min(end, b + batch_size);
    std::vector<NodeId> nodes;
    nodes.reserve(2 * (e - b));
    for (std::size_t i = b; i < e; ++i) {
      nodes.push_back(state.user_node(trace.users()[i]));
      nodes.push_back(state.item_node(trace.items()[i]));
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    const double t_ref = trace.timestamps()[e - 1];
    MemoryUpdate mu = updated_memory(state, nodes, t_ref);
    commit(state, mu, t_ref, trace, b, e);
  }
}

std::vector<Tensor> Model::parameter_values() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& entry : params_) out.push_back(entry.var.value());
  return out;
}

void Model::set_parameter_values(const std::vector<Tensor>& values) {
  if (values.size() != params_.size()) throw InvalidArgument("parameter snapshot size mismatch");
  std::size_t k = 0;
  for (const auto& entry : params_) {
    ad::Var v = entry.var;
    if (!v.value().same_shape(values[k])) throw ShapeError("parameter snapshot shape mismatch");
    v.mutable_value() = values[k++];
  }
}

}  // namespace aoicache
