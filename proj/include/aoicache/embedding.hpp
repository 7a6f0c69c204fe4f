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

// Final node embeddings via dot-product attention over temporal neighbors,
// the preference MLP, and the BCE loss.

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "aoicache/autodiff.hpp"
#include "aoicache/parameters.hpp"

namespace aoicache {

/// One multi-head attention layer over temporal neighbors. A query node's
/// self row is [Mem' || phi(T_p - T_l)]; each neighbor row is
/// [Mem_m || e || phi(T_p - t_edge)]. Logits are (nbr W_Q) . (self W_K).
class GatLayer {
 public:
  struct Weights {
    ad::Var w_q, w_k, w_v;   // nbr_dim x L*d_g, self_dim x L*d_g, nbr_dim x L*d_g
    ad::Var w0, b0, w1, b1;  // (L*d_g + self_dim) x hidden, ..., hidden x out
  };
  struct Output {
    ad::Var embedding;  // Q x out
    ad::Var weights;    // Q*L x S, row q*L + l
  };

  GatLayer() = default;
  GatLayer(Weights w, std::size_t heads);
  static GatLayer create(ParameterSet& params, const std::string& prefix, std::size_t self_dim,
                         std::size_t neighbor_dim, std::size_t heads, std::size_t head_dim,
                         std::size_t hidden, std::size_t out_dim, std::mt19937_64& rng);

  std::size_t heads() const { return heads_; }
  std::size_t output_dim() const { return w_.w1.cols(); }
  const Weights& weights() const { return w_; }

  /// self_rows: Q x self_dim. neighbors: Q*S x neighbor_dim. masked: Q*S
  /// flags for padded neighbor slots. A query with no neighbors gets zero
  /// head output, so its embedding depends on its self row alone.
  Output embed(const ad::Var& self_rows, const ad::Var& neighbors, const std::vector<bool>& masked,
               std::size_t slots) const;

 private:
  Weights w_;
  std::size_t heads_ = 1;
};

/// p = sigmoid(ReLU([E_u || E_i] W1 + b1) W2 + b2).
class Predictor {
 public:
  struct Weights {
    ad::Var w1, b1, w2, b2;
  };

  Predictor() = default;
  explicit Predictor(Weights w);
  static Predictor create(ParameterSet& params, const std::string& prefix, std::size_t embed_dim,
                          std::size_t hidden, std::mt19937_64& rng);

  std::size_t embed_dim() const { return w_.w1.rows() / 2; }
  const Weights& weights() const { return w_; }

  /// users, items: n x e. Returns n x 1 probabilities.
  ad::Var score(const ad::Var& users, const ad::Var& items) const;

  /// Scores every user against every item without recording a graph.
  /// Result is row-major, users.rows() x items.rows().
  std::vector<double> score_matrix(const Tensor& users, const Tensor& items) const;

 private:
  Weights w_;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean binary cross-entropy. Predictions outside [1e-12, 1 - 1e-12] are
/// clamped and counted in *clamp_count.
ad::Var bce_loss(const ad::Var& predictions, std::span<const double> labels,
                 std::size_t* clamp_count = nullptr);
double bce_value(std::span<const double> predictions, std::span<const double> labels,
                 std::size_t* clamp_count = nullptr);

}  // namespace aoicache
