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

#include "aoicache/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aoicache/errors.hpp"
#include "aoicache/layers.hpp"

namespace aoicache {

GatLayer::GatLayer(Weights w, std::size_t heads) : w_(std::move(w)), heads_(heads) {
  if (heads_ == 0 || w_.w_q.cols() % heads_ != 0) {
    throw InvalidArgument("GAT width must split evenly across heads");
  }
}

GatLayer GatLayer::create(ParameterSet& params, const std::string& prefix, std::size_t self_dim,
                          std::size_t neighbor_dim, std::size_t heads, std::size_t head_dim,
                          std::size_t hidden, std::size_t out_dim, std::mt19937_64& rng) {
  const std::size_t width = heads * head_dim;
  Weights w;
  w.w_q = add_weight(params, prefix + ".w_q", neighbor_dim, width, rng);
  w.w_k = add_weight(params, prefix + ".w_k", self_dim, width, rng);
  w.w_v = add_weight(params, prefix + ".w_v", neighbor_dim, width, rng);
  w.w0 = add_weight(params, prefix + ".ffn.w0", width + self_dim, hidden, rng);
  w.b0 = add_bias(params, prefix + ".ffn.b0", width + self_dim, hidden, rng);
  w.w1 = add_weight(params, prefix + ".ffn.w1", hidden, out_dim, rng);
  w.b1 = add_bias(params, prefix + ".ffn.b1", hidden, out_dim, rng);
  return GatLayer(std::move(w), heads);
}

GatLayer::Output GatLayer::embed(const ad::Var& self_rows, const ad::Var& neighbors,
                                 const std::vector<bool>& masked, std::size_t slots) const {
  const std::size_t q = self_rows.rows();
  if (slots == 0 || neighbors.rows() != q * slots || masked.size() != q * slots) {
    throw ShapeError("gat: " + std::to_string(q) + " queries need " + std::to_string(q * slots) +
                     " neighbor rows and flags, got " + std::to_string(neighbors.rows()) + "/" +
                     std::to_string(masked.size()));
  }
  ad::Var keys = ad::matmul(self_rows, w_.w_k);
  ad::Var queries = ad::matmul(neighbors, w_.w_q);
  ad::Var values = ad::matmul(neighbors, w_.w_v);
  ad::Var scores = ad::attention_scores(keys, queries, slots, heads_);
  scores = ad::mask_fill(scores, expand_head_mask(masked, slots, heads_),
                         -std::numeric_limits<double>::infinity());
  Output out;
  out.weights = ad::softmax_rows(scores);
  ad::Var heads = ad::attention_combine(out.weights, values, slots, heads_);
  ad::Var hidden = ad::relu(linear(ad::concat_cols({heads, self_rows}), w_.w0, w_.b0));
  out.embedding = linear(hidden, w_.w1, w_.b1);
  return out;
}

Predictor::Predictor(Weights w) : w_(std::move(w)) {}

Predictor Predictor::create(ParameterSet& params, const std::string& prefix, std::size_t embed_dim,
                            std::size_t hidden, std::mt19937_64& rng) {
  Weights w;
  w.w1 = add_weight(params, prefix + ".w1", 2 * embed_dim, hidden, rng);
  w.b1 = add_bias(params, prefix + ".b1", 2 * embed_dim, hidden, rng);
  w.w2 = add_weight(params, prefix + ".w2", hidden, 1, rng);
  w.b2 = add_bias(params, prefix + ".b2", hidden, 1, rng);
  return Predictor(std::move(w));
}

ad::Var Predictor::score(const ad::Var& users, const ad::Var& items) const {
  if (users.cols() != embed_dim() || items.cols() != embed_dim() || users.rows() != items.rows()) {
    throw ShapeError("predictor: embeddings " + users.value().shape_string() + " and " +
                     items.value().shape_string() + ", expected n x " + std::to_string(embed_dim()));
  }
  ad::Var hidden = ad::relu(linear(ad::concat_cols({users, items}), w_.w1, w_.b1));
  return ad::sigmoid(linear(hidden, w_.w2, w_.b2));
}

std::vector<double> Predictor::score_matrix(const Tensor& users, const Tensor& items) const {
  const std::size_t e = embed_dim();
  if (users.cols() != e || items.cols() != e) {
    throw ShapeError("predictor: embeddings " + users.shape_string() + " and " +
                     items.shape_string() + ", expected n x " + std::to_string(e));
  }
  const Tensor& w1 = w_.w1.value();
  const std::size_t hidden = w1.cols();
  // The first layer is linear, so the user and item halves are projected once each.
  auto project = [&](const Tensor& x, std::size_t row_offset, bool with_bias) {
    Tensor out = Tensor::matrix(x.rows(), hidden);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t k = 0; k < e; ++k) {
        const double v = x(r, k);
        for (std::size_t c = 0; c < hidden; ++c) out(r, c) += v * w1(row_offset + k, c);
      }
      if (with_bias) {
        for (std::size_t c = 0; c < hidden; ++c) out(r, c) += w_.b1.value()[c];
      }
    }
    return out;
  };
  const Tensor pu = project(users, 0, true);
  const Tensor pi = project(items, e, false);
  const auto w2 = w_.w2.value().data();
  const double b2 = w_.b2.value()[0];
  std::vector<double> out(users.rows() * items.rows());
  for (std::size_t u = 0; u < users.rows(); ++u) {
    const auto a = pu.row(u);
    for (std::size_t i = 0; i < items.rows(); ++i) {
      const auto b = pi.row(i);
      double z = b2;
      for (std::size_t c = 0; c < hidden; ++c) z += std::max(0.0, a[c] + b[c]) * w2[c];
      out[u * items.rows() + i] = 1.0 / (1.0 + std::exp(-z));
    }
  }
  return out;
}

namespace {

std::size_t count_clamped(std::span<const double> p) {
  return static_cast<std::size_t>(std::count_if(p.begin(), p.end(), [](double v) {
    return v < kProbabilityFloor || v > 1.0 - kProbabilityFloor;
  }));
}

void check_labels(std::size_t n, std::span<const double> labels) {
  if (labels.size() != n) {
    throw ShapeError("bce: " + std::to_string(n) + " predictions but " +
                     std::to_string(labels.size()) + " labels");
  }
  if (n == 0) throw InvalidArgument("bce: empty batch");
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) throw InvalidArgument("bce: labels must be 0 or 1");
  }
}

}  // namespace

ad::Var bce_loss(const ad::Var& predictions, std::span<const double> labels,
                 std::size_t* clamp_count) {
  if (predictions.cols() != 1) throw ShapeError("bce: predictions must be n x 1");
  const std::size_t n = predictions.rows();
  check_labels(n, labels);
  if (clamp_count) *clamp_count += count_clamped(predictions.value().data());
  const double hi = 1.0 - kProbabilityFloor;
  ad::Var y = ad::Var::constant(Tensor::column_vector(labels));
  ad::Var log_p = ad::log_clamped(predictions, kProbabilityFloor, hi);
  ad::Var log_q = ad::log_clamped(ad::scale(predictions, -1.0, 1.0), kProbabilityFloor, hi);
  ad::Var ll = ad::add(ad::mul(y, log_p), ad::mul(ad::scale(y, -1.0, 1.0), log_q));
  return ad::scale(ad::sum(ll), -1.0 / static_cast<double>(n));
}

double bce_value(std::span<const double> predictions, std::span<const double> labels,
                 std::size_t* clamp_count) {
  check_labels(predictions.size(), labels);
  if (clamp_count) *clamp_count += count_clamped(predictions);
  const double hi = 1.0 - kProbabilityFloor;
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], kProbabilityFloor, hi);
    const double q = std::clamp(1.0 - predictions[i], kProbabilityFloor, hi);
    total += -(labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(q));
  }
  return total / static_cast<double>(predictions.size());
}

}  // namespace aoicache
