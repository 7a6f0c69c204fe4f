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

// Message aggregation and memory update: age computation, the adaptive
// staleness threshold, soft masking, multi-head attention over a node's
// recent messages, and the GRU memory cell.

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aoicache/autodiff.hpp"
#include "aoicache/parameters.hpp"

namespace aoicache {

/// Which side of the threshold the soft mask keeps.
///   kStaleDrops: multiplier sigma(100 * (thre - age)), keeps fresh messages.
///   kAsWritten:  multiplier sigma(100 * (age - thre)).
enum class MaskOrientation { kAsWritten, kStaleDrops };

enum class HeadActivation { kIdentity, kSigmoid };

std::string_view to_string(MaskOrientation o);
std::string_view to_string(HeadActivation a);
MaskOrientation parse_mask_orientation(std::string_view s);
HeadActivation parse_head_activation(std::string_view s);

inline constexpr double kSoftMaskSharpness = 100.0;

/// age_n = t - birth_n; padded slots get +inf. Throws InvalidArgument when a
/// real birth is later than t.
std::vector<double> compute_ages(std::span<const double> births, const std::vector<bool>& padded,
                                 double t);

/// Two-layer ReLU MLP mapping the N ages of a node to one threshold.
class AoiThresholdNet {
 public:
  struct Weights {
    ad::Var w1, b1, w2, b2;  // N x h, 1 x h, h x 1, 1 x 1
  };

  AoiThresholdNet() = default;
  explicit AoiThresholdNet(Weights w);
  static AoiThresholdNet create(ParameterSet& params, const std::string& prefix, std::size_t n,
                                std::size_t hidden, std::mt19937_64& rng);

  std::size_t input_dim() const { return w_.w1.rows(); }
  const Weights& weights() const { return w_; }

  /// ages: G x N with padded slots already set to 0. Returns G x 1.
  ad::Var threshold(const ad::Var& ages) const;
  /// One node; +inf entries are treated as padding and presented as 0.
  double threshold(std::span<const double> ages) const;

 private:
  Weights w_;
};

/// ages: G x N (finite), thre: G x 1. Returns the G x N sigmoid multipliers.
ad::Var soft_mask_multiplier(const ad::Var& ages, const ad::Var& thre, MaskOrientation o);

/// Adjusted timestamps t'_n = t_n * multiplier_n.
std::vector<double> soft_mask(std::span<const double> timestamps, std::span<const double> ages,
                              double thre, MaskOrientation o);

/// Multi-head attention keyed on the newest message plus the skip-connection FFN.
class MultiHeadAggregator {
 public:
  struct Weights {
    ad::Var w_q, w_k, w_v;  // (d + d_T) x L*d_h, heads side by side
    ad::Var w0, b0, w1, b1; // (L*d_h + d) x d_0, 1 x d_0, d_0 x d, 1 x d
  };
  struct Output {
    ad::Var aggregated;  // G x d
    ad::Var heads;       // G x L*d_h, after the head activation
    ad::Var weights;     // G*L x S attention coefficients, row g*L + l
  };

  MultiHeadAggregator() = default;
  MultiHeadAggregator(Weights w, std::size_t heads, HeadActivation activation);
  static MultiHeadAggregator create(ParameterSet& params, const std::string& prefix,
                                    std::size_t input_dim, std::size_t inf_dim, std::size_t heads,
                                    std::size_t head_dim, std::size_t ffn_hidden,
                                    HeadActivation activation, std::mt19937_64& rng);

  std::size_t heads() const { return heads_; }
  std::size_t head_dim() const { return w_.w_q.cols() / heads_; }
  const Weights& weights() const { return w_; }

  /// messages: G*S x (d + d_T), group g occupies rows g*S .. g*S+S-1 with its
  /// newest message first. inf0: G x d, the raw part of each newest message.
  /// masked: G*S flags; slot 0 of every group must be unmasked.
  Output aggregate(const ad::Var& messages, const ad::Var& inf0, const std::vector<bool>& masked,
                   std::size_t slots) const;

 private:
  Weights w_;
  std::size_t heads_ = 1;
  HeadActivation activation_ = HeadActivation::kIdentity;
};

/// Mem' = Z * H + (1 - Z) * Mem.
class Gru {
 public:
  struct Weights {
    ad::Var w_hz, w_mz, b_z;
    ad::Var w_hf, w_mf, b_f;
    ad::Var w_hh, w_mh, b_h;
  };
  struct Gates {
    ad::Var z, f, h, next;
  };

  Gru() = default;
  explicit Gru(Weights w);
  static Gru create(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                    std::size_t memory_dim, std::mt19937_64& rng);

  std::size_t memory_dim() const { return w_.w_mz.rows(); }
  std::size_t input_dim() const { return w_.w_hz.rows(); }
  const Weights& weights() const { return w_; }

  /// mem: G x m, input: G x d. Returns G x m.
  ad::Var update(const ad::Var& mem, const ad::Var& input) const { return gates(mem, input).next; }
  Gates gates(const ad::Var& mem, const ad::Var& input) const;

 private:
  Weights w_;
};

}  // namespace aoicache
