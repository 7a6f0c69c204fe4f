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

// Reverse-mode automatic differentiation over rank-2 tensors.
//
// Operations evaluate eagerly: every op computes its output immediately and,
// when gradient recording is enabled and some input requires gradients, also
// records a backward closure and its parents. backward() walks the recorded
// DAG from a scalar root in reverse topological order.
//
//   ad::Var w = ad::Var::parameter(Tensor::from_rows({{0.5}, {-1.0}}));
//   ad::Var x = ad::Var::constant(Tensor::from_rows({{1.0, 2.0}}));
//   ad::Var loss = ad::sum(ad::sigmoid(ad::matmul(x, w)));
//   ad::backward(loss);   // w.grad() now holds dloss/dw

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "aoicache/tensor.hpp"

namespace aoicache::ad {

enum class OpKind {
  kLeaf,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kConcat,
  kSoftmaxRow,
  kRelu,
  kTanh,
  kSigmoid,
  kCos,
  kLog,
  kScale,
  kSum,
  kMean,
  kSelectRows,
  kMask,
  kReshape,
  kAttentionScores,
  kAttentionCombine,
};

std::string_view to_string(OpKind op);

struct Node {
  OpKind op = OpKind::kLeaf;
  Tensor value;
  Tensor grad;  // empty until backward() allocates it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  bool has_grad() const { return !grad.empty(); }
  Tensor& ensure_grad();
};

/// Handle to a node in the computation graph. Copies share the node.
class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->ensure_grad(); }
  bool has_grad() const { return node_->has_grad(); }
  bool requires_grad() const { return node_->requires_grad; }
  OpKind op() const { return node_->op; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }

  void zero_grad();
  void clear_grad() { node_->grad = Tensor(); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend Var make_op(OpKind, Tensor, std::vector<Var>, std::function<void(Node&)>);

  std::shared_ptr<Node> node_;
};

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Var make_op(OpKind op, Tensor value, std::vector<Var> parents,
            std::function<void(Node&)> backward_fn);

// --- operations -----------------------------------------------------------

Var matmul(const Var& a, const Var& b);
/// Elementwise a + b; b may also be a 1 x cols row broadcast over a's rows.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Elementwise product of equal shapes.
Var mul(const Var& a, const Var& b);
/// alpha * a + beta.
Var scale(const Var& a, double alpha, double beta = 0.0);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var concat_rows(std::initializer_list<Var> parts);
/// Row-wise softmax with max subtraction. -inf entries map to exactly 0 and a
/// row made only of -inf yields all zeros.
Var softmax_rows(const Var& a);
Var relu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var cos(const Var& a);
/// Natural log of max(a, floor); clamped entries pass no gradient and are
/// added to *clamp_count when non-null.
Var log_clamped(const Var& a, double floor, double ceil, std::size_t* clamp_count = nullptr);
Var sum(const Var& a);
Var mean(const Var& a);
Var select_rows(const Var& a, std::span<const std::size_t> rows);
/// Replace entries where mask[i] is true by fill; those positions receive
/// zero gradient.
Var mask_fill(const Var& a, const std::vector<bool>& mask, double fill);
Var reshape(const Var& a, std::size_t rows, std::size_t cols);

/// Grouped dot products for batched multi-head attention.
///   query: [G, H*d], keys: [G*S, H*d]  ->  [G*H, S]
///   out(g*H + h, s) = <query(g, h*d : (h+1)*d), keys(g*S + s, h*d : (h+1)*d)>
Var attention_scores(const Var& query, const Var& keys, std::size_t slots, std::size_t heads);
/// Weighted sum of values per group and head.
///   weights: [G*H, S], values: [G*S, H*d]  ->  [G, H*d]
Var attention_combine(const Var& weights, const Var& values, std::size_t slots,
                      std::size_t heads);

/// Fills dRoot/dNode for every node reachable from root that requires
/// gradients. Leaf gradients accumulate across calls; interior gradients are
/// reset per call. Throws ShapeError unless root holds exactly one element.
void backward(const Var& root);

}  // namespace aoicache::ad
