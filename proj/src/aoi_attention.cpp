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

#include "aoicache/aoi_attention.hpp"

#include <cmath>
#include <limits>

#include "aoicache/errors.hpp"
#include "aoicache/layers.hpp"

namespace aoicache {

std::string_view to_string(MaskOrientation o) {
  return o == MaskOrientation::kAsWritten ? "as-written" : "stale-drops";
}

std::string_view to_string(HeadActivation a) {
  return a == HeadActivation::kIdentity ? "identity" : "sigmoid";
}

MaskOrientation parse_mask_orientation(std::string_view s) {
  if (s == "as-written") return MaskOrientation::kAsWritten;
  if (s == "stale-drops") return MaskOrientation::kStaleDrops;
  throw InvalidArgument("unknown mask orientation '" + std::string(s) +
                        "' (allowed: as-written, stale-drops)");
}

HeadActivation parse_head_activation(std::string_view s) {
  if (s == "identity") return HeadActivation::kIdentity;
  if (s == "sigmoid") return HeadActivation::kSigmoid;
  throw InvalidArgument("unknown head activation '" + std::string(s) +
                        "' (allowed: identity, sigmoid)");
}

std::vector<double> compute_ages(std::span<const double> births, const std::vector<bool>& padded,
                                 double t) {
  if (padded.size() != births.size()) {
    throw ShapeError("compute_ages: " + std::to_string(births.size()) + " births but " +
                     std::to_string(padded.size()) + " mask flags");
  }
  std::vector<double> ages(births.size());
  for (std::size_t n = 0; n < births.size(); ++n) {
    if (padded[n]) {
      ages[n] = std::numeric_limits<double>::infinity();
      continue;
    }
    if (births[n] > t) {
      throw InvalidArgument("message born at " + std::to_string(births[n]) +
                            " after reference time " + std::to_string(t));
    }
    ages[n] = t - births[n];
  }
  return ages;
}

// --- threshold --------------------------------------------------------------

AoiThresholdNet::AoiThresholdNet(Weights w) : w_(std::move(w)) {}

AoiThresholdNet AoiThresholdNet::create(ParameterSet& params, const std::string& prefix,
                                        std::size_t n, std::size_t hidden, std::mt19937_64& rng) {
  Weights w;
  w.w1 = add_weight(params, prefix + ".w1", n, hidden, rng);
  w.b1 = add_bias(params, prefix + ".b1", n, hidden, rng);
  w.w2 = add_weight(params, prefix + ".w2", hidden, 1, rng);
  w.b2 = add_bias(params, prefix + ".b2", hidden, 1, rng);
  return AoiThresholdNet(std::move(w));
}

ad::Var AoiThresholdNet::threshold(const ad::Var& ages) const {
  if (ages.cols() != input_dim()) {
    throw ShapeError("threshold net expects " + std::to_string(input_dim()) + " ages, got " +
                     std::to_string(ages.cols()));
  }
  ad::Var h = ad::relu(linear(ages, w_.w1, w_.b1));
  return ad::relu(linear(h, w_.w2, w_.b2));
}

double AoiThresholdNet::threshold(std::span<const double> ages) const {
  std::vector<double> row(ages.begin(), ages.end());
  for (double& a : row) {
    if (std::isinf(a)) a = 0.0;
  }
  ad::NoGradGuard guard;
  return threshold(ad::Var::constant(Tensor::row_vector(row))).value().item();
}

// --- soft mask ----------------------------------------------------------------

ad::Var soft_mask_multiplier(const ad::Var& ages, const ad::Var& thre, MaskOrientation o) {
  if (thre.cols() != 1 || thre.rows() != ages.rows()) {
    throw ShapeError("soft mask threshold must be " + std::to_string(ages.rows()) + " x 1, got " +
                     thre.value().shape_string());
  }
  ad::Var t = broadcast_cols(thre, ages.cols());
  ad::Var signal = o == MaskOrientation::kStaleDrops ? ad::sub(t, ages) : ad::sub(ages, t);
  return ad::sigmoid(ad::scale(signal, kSoftMaskSharpness));
}

std::vector<double> soft_mask(std::span<const double> timestamps, std::span<const double> ages,
                              double thre, MaskOrientation o) {
  if (timestamps.size() != ages.size()) {
    throw ShapeError("soft_mask: timestamps and ages differ in length");
  }
  std::vector<double> out(timestamps.size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    const double signal = o == MaskOrientation::kStaleDrops ? thre - ages[n] : ages[n] - thre;
    out[n] = timestamps[n] / (1.0 + std::exp(-kSoftMaskSharpness * signal));
  }
  return out;
}

// --- attention ------------------------------------------------------------------

MultiHeadAggregator::MultiHeadAggregator(Weights w, std::size_t heads, HeadActivation activation)
    : w_(std::move(w)), heads_(heads), activation_(activation) {
  if (heads_ == 0 || w_.w_q.cols() % heads_ != 0) {
    throw InvalidArgument("attention width must split evenly across heads");
  }
}

MultiHeadAggregator MultiHeadAggregator::create(ParameterSet& params, const std::string& prefix,
                                                std::size_t input_dim, std::size_t inf_dim,
                                                std::size_t heads, std::size_t head_dim,
                                                std::size_t ffn_hidden, HeadActivation activation,
                                                std::mt19937_64& rng) {
  const std::size_t width = heads * head_dim;
  Weights w;
  w.w_q = add_weight(params, prefix + ".w_q", input_dim, width, rng);
  w.w_k = add_weight(params, prefix + ".w_k", input_dim, width, rng);
  w.w_v = add_weight(params, prefix + ".w_v", input_dim, width, rng);
  w.w0 = add_weight(params, prefix + ".ffn.w0", width + inf_dim, ffn_hidden, rng);
  w.b0 = add_bias(params, prefix + ".ffn.b0", width + inf_dim, ffn_hidden, rng);
  w.w1 = add_weight(params, prefix + ".ffn.w1", ffn_hidden, inf_dim, rng);
  w.b1 = add_bias(params, prefix + ".ffn.b1", ffn_hidden, inf_dim, rng);
  return MultiHeadAggregator(std::move(w), heads, activation);
}

MultiHeadAggregator::Output MultiHeadAggregator::aggregate(const ad::Var& messages,
                                                           const ad::Var& inf0,
                                                           const std::vector<bool>& masked,
                                                           std::size_t slots) const {
  if (slots == 0 || messages.rows() % slots != 0) {
    throw ShapeError("aggregate: " + std::to_string(messages.rows()) +
                     " message rows do not split into groups of " + std::to_string(slots));
  }
  const std::size_t groups = messages.rows() / slots;
  if (masked.size() != messages.rows()) {
    throw ShapeError("aggregate: mask length " + std::to_string(masked.size()) + " for " +
                     std::to_string(messages.rows()) + " messages");
  }
  if (inf0.rows() != groups) {
    throw ShapeError("aggregate: " + std::to_string(inf0.rows()) + " skip rows for " +
                     std::to_string(groups) + " groups");
  }
  std::vector<std::size_t> newest(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    if (masked[g * slots]) {
      throw InvalidArgument("aggregate: group " + std::to_string(g) + " has its newest message masked");
    }
    newest[g] = g * slots;
  }
  ad::Var query = ad::matmul(ad::select_rows(messages, newest), w_.w_q);
  ad::Var keys = ad::matmul(messages, w_.w_k);
  ad::Var values = ad::matmul(messages, w_.w_v);
  ad::Var scores = ad::attention_scores(query, keys, slots, heads_);
  scores = ad::mask_fill(scores, expand_head_mask(masked, slots, heads_),
                         -std::numeric_limits<double>::infinity());
  Output out;
  out.weights = ad::softmax_rows(scores);
  out.heads = ad::attention_combine(out.weights, values, slots, heads_);
  if (activation_ == HeadActivation::kSigmoid) out.heads = ad::sigmoid(out.heads);
  ad::Var hidden = ad::relu(linear(ad::concat_cols({out.heads, inf0}), w_.w0, w_.b0));
  out.aggregated = linear(hidden, w_.w1, w_.b1);
  return out;
}

// --- GRU ------------------------------------------------------------------------

Gru::Gru(Weights w) : w_(std::move(w)) {}

Gru Gru::create(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                std::size_t memory_dim, std::mt19937_64& rng) {
  Weights w;
  const std::size_t fan_in = input_dim + memory_dim;
  w.w_hz = add_weight(params, prefix + ".w_hz", input_dim, memory_dim, rng);
  w.w_mz = add_weight(params, prefix + ".w_mz", memory_dim, memory_dim, rng);
  w.b_z = add_bias(params, prefix + ".b_z", fan_in, memory_dim, rng);
  w.w_hf = add_weight(params, prefix + ".w_hf", input_dim, memory_dim, rng);
  w.w_mf = add_weight(params, prefix + ".w_mf", memory_dim, memory_dim, rng);
  w.b_f = add_bias(params, prefix + ".b_f", fan_in, memory_dim, rng);
  w.w_hh = add_weight(params, prefix + ".w_hh", input_dim, memory_dim, rng);
  w.w_mh = add_weight(params, prefix + ".w_mh", memory_dim, memory_dim, rng);
  w.b_h = add_bias(params, prefix + ".b_h", fan_in, memory_dim, rng);
  return Gru(std::move(w));
}

Gru::Gates Gru::gates(const ad::Var& mem, const ad::Var& input) const {
  if (mem.cols() != memory_dim() || input.cols() != input_dim() || mem.rows() != input.rows()) {
    throw ShapeError("gru: memory " + mem.value().shape_string() + " and input " +
                     input.value().shape_string() + " do not match cell dims " +
                     std::to_string(memory_dim()) + "/" + std::to_string(input_dim()));
  }
  Gates g;
  g.z = ad::sigmoid(ad::add(ad::add(ad::matmul(input, w_.w_hz), ad::matmul(mem, w_.w_mz)), w_.b_z));
  g.f = ad::sigmoid(ad::add(ad::add(ad::matmul(input, w_.w_hf), ad::matmul(mem, w_.w_mf)), w_.b_f));
  g.h = ad::tanh(ad::add(
      ad::add(ad::matmul(input, w_.w_hh), ad::matmul(ad::mul(g.f, mem), w_.w_mh)), w_.b_h));
  g.next = ad::add(ad::mul(g.z, g.h), ad::mul(ad::scale(g.z, -1.0, 1.0), mem));
  return g;
}

}  // namespace aoicache
