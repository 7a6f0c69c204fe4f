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

#include "aoicache/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "aoicache/errors.hpp"

namespace aoicache::ad {

namespace {

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_fail(OpKind op, const std::string& detail) {
  throw ShapeError(std::string(to_string(op)) + ": " + detail);
}

void require_rank2(OpKind op, const Tensor& t) {
  if (t.rank() != 2) shape_fail(op, "expected rank-2 operand, got " + t.shape_string());
}

// c += a * b  (a: m x k, b: k x n)
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c += a^T * b  (a: k x m, b: k x n, c: m x n)
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t k, std::size_t m,
                 std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c += a * b^T  (a: m x n, b: k x n, c: m x k)
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                 std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    double* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += arow[j] * brow[j];
      crow[p] += s;
    }
  }
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

template <typename F>
Var unary_elementwise(OpKind op, const Var& a, F&& f,
                      std::function<void(Node&)> backward) {
  Tensor out = a.value();
  for (double& v : out.data()) v = f(v);
  return make_op(op, std::move(out), {a}, std::move(backward));
}

}  // namespace

std::string_view to_string(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kConcat: return "concat";
    case OpKind::kSoftmaxRow: return "softmax-row";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kCos: return "cos";
    case OpKind::kLog: return "log";
    case OpKind::kScale: return "scale";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSelectRows: return "select-rows";
    case OpKind::kMask: return "mask";
    case OpKind::kReshape: return "reshape";
    case OpKind::kAttentionScores: return "attention-scores";
    case OpKind::kAttentionCombine: return "attention-combine";
  }
  return "unknown";
}

Tensor& Node::ensure_grad() {
  if (grad.empty() || !grad.same_shape(value)) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var Var::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

void Var::zero_grad() { node_->ensure_grad().fill(0.0); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var make_op(OpKind op, Tensor value, std::vector<Var> parents,
            std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->value = std::move(value);
  if (g_grad_enabled) {
    const bool any = std::any_of(parents.begin(), parents.end(),
                                 [](const Var& p) { return p.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(p.node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Var(std::move(node));
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(OpKind::kMatmul, av);
  require_rank2(OpKind::kMatmul, bv);
  if (av.cols() != bv.rows()) {
    shape_fail(OpKind::kMatmul, "inner dimensions differ: " + av.shape_string() + " x " +
                                    bv.shape_string());
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out = Tensor::matrix(m, n);
  gemm_acc(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  return make_op(OpKind::kMatmul, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const double* g = self.grad.data().data();
    if (pa.requires_grad) {
      gemm_nt_acc(g, pb.value.data().data(), pa.ensure_grad().data().data(), m, n, k);
    }
    if (pb.requires_grad) {
      gemm_tn_acc(pa.value.data().data(), g, pb.ensure_grad().data().data(), m, k, n);
    }
  });
}

namespace {

Var add_sub(OpKind op, const Var& a, const Var& b, double sign) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(op, av);
  require_rank2(op, bv);
  const bool broadcast = !av.same_shape(bv);
  if (broadcast && !(bv.rows() == 1 && bv.cols() == av.cols())) {
    shape_fail(op, "cannot combine " + av.shape_string() + " with " + bv.shape_string());
  }
  Tensor out = av;
  const std::size_t cols = av.cols();
  auto od = out.data();
  auto bd = bv.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += sign * bd[broadcast ? i % cols : i];
  return make_op(op, std::move(out), {a, b}, [broadcast, cols, sign](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    auto g = self.grad.data();
    if (pa.requires_grad) {
      auto ga = pa.ensure_grad().data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (pb.requires_grad) {
      auto gb = pb.ensure_grad().data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[broadcast ? i % cols : i] += sign * g[i];
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) { return add_sub(OpKind::kAdd, a, b, 1.0); }
Var sub(const Var& a, const Var& b) { return add_sub(OpKind::kSub, a, b, -1.0); }

Var mul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) {
    shape_fail(OpKind::kMul, "shapes differ: " + av.shape_string() + " vs " + bv.shape_string());
  }
  Tensor out = av;
  auto od = out.data();
  auto bd = bv.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[i];
  return make_op(OpKind::kMul, std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    auto g = self.grad.data();
    if (pa.requires_grad) {
      auto ga = pa.ensure_grad().data();
      auto bd = pb.value.data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bd[i];
    }
    if (pb.requires_grad) {
      auto gb = pb.ensure_grad().data();
      auto ad = pa.value.data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ad[i];
    }
  });
}

Var scale(const Var& a, double alpha, double beta) {
  return unary_elementwise(
      OpKind::kScale, a, [alpha, beta](double v) { return alpha * v + beta; },
      [alpha](Node& self) {
        Node& pa = parent(self, 0);
        auto g = self.grad.data();
        auto ga = pa.ensure_grad().data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += alpha * g[i];
      });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) shape_fail(OpKind::kConcat, "no operands");
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank2(OpKind::kConcat, p.value());
    if (p.value().rows() != rows) {
      shape_fail(OpKind::kConcat, "row counts differ: " + parts[0].value().shape_string() +
                                      " vs " + p.value().shape_string());
    }
    widths.push_back(p.value().cols());
    total += p.value().cols();
  }
  Tensor out = Tensor::matrix(rows, total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(pv.row(r).begin(), pv.row(r).end(), out.row(r).begin() + offset);
    }
    offset += widths[k];
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return make_op(OpKind::kConcat, std::move(out), std::move(ps),
                 [widths, rows, total](Node& self) {
                   std::size_t off = 0;
                   for (std::size_t k = 0; k < widths.size(); ++k) {
                     Node& p = parent(self, k);
                     if (p.requires_grad) {
                       Tensor& gp = p.ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* g = self.grad.data().data() + r * total + off;
                         double* dst = gp.data().data() + r * widths[k];
                         for (std::size_t c = 0; c < widths[k]; ++c) dst[c] += g[c];
                       }
                     }
                     off += widths[k];
                   }
                 });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) shape_fail(OpKind::kConcat, "no operands");
  const std::size_t cols = parts[0].value().cols();
  std::vector<std::size_t> sizes;
  std::vector<double> data;
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require_rank2(OpKind::kConcat, p.value());
    if (p.value().cols() != cols) {
      shape_fail(OpKind::kConcat, "column counts differ: " + parts[0].value().shape_string() +
                                      " vs " + p.value().shape_string());
    }
    rows += p.value().rows();
    sizes.push_back(p.value().size());
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return make_op(OpKind::kConcat, Tensor({rows, cols}, std::move(data)), std::move(ps),
                 [sizes](Node& self) {
                   std::size_t off = 0;
                   auto g = self.grad.data();
                   for (std::size_t k = 0; k < sizes.size(); ++k) {
                     Node& p = parent(self, k);
                     if (p.requires_grad) {
                       auto gp = p.ensure_grad().data();
                       for (std::size_t i = 0; i < sizes[k]; ++i) gp[i] += g[off + i];
                     }
                     off += sizes[k];
                   }
                 });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

Var softmax_rows(const Var& a) {
  const Tensor& av = a.value();
  require_rank2(OpKind::kSoftmaxRow, av);
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out = Tensor::matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = av.row(r);
    auto o = out.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : in) mx = std::max(mx, v);
    if (mx == -std::numeric_limits<double>::infinity()) continue;  // fully masked row
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = in[c] == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(in[c] - mx);
      total += o[c];
    }
    for (double& v : o) v /= total;
  }
  return make_op(OpKind::kSoftmaxRow, std::move(out), {a}, [rows, cols](Node& self) {
    Node& pa = parent(self, 0);
    Tensor& ga = pa.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      auto y = self.value.row(r);
      auto g = self.grad.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += y[c] * g[c];
      auto dst = ga.row(r);
      for (std::size_t c = 0; c < cols; ++c) dst[c] += y[c] * (g[c] - dot);
    }
  });
}

Var relu(const Var& a) {
  return unary_elementwise(
      OpKind::kRelu, a, [](double v) { return v > 0.0 ? v : 0.0; }, [](Node& self) {
        Node& pa = parent(self, 0);
        auto g = self.grad.data();
        auto x = pa.value.data();
        auto ga = pa.ensure_grad().data();
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x[i] > 0.0) ga[i] += g[i];
        }
      });
}

Var tanh(const Var& a) {
  return unary_elementwise(
      OpKind::kTanh, a, [](double v) { return std::tanh(v); }, [](Node& self) {
        Node& pa = parent(self, 0);
        auto g = self.grad.data();
        auto y = self.value.data();
        auto ga = pa.ensure_grad().data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
      });
}

Var sigmoid(const Var& a) {
  return unary_elementwise(
      OpKind::kSigmoid, a,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](Node& self) {
        Node& pa = parent(self, 0);
        auto g = self.grad.data();
        auto y = self.value.data();
        auto ga = pa.ensure_grad().data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      });
}

Var cos(const Var& a) {
  return unary_elementwise(
      OpKind::kCos, a, [](double v) { return std::cos(v); }, [](Node& self) {
        Node& pa = parent(self, 0);
        auto g = self.grad.data();
        auto x = pa.value.data();
        auto ga = pa.ensure_grad().data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i] * std::sin(x[i]);
      });
}

Var log_clamped(const Var& a, double floor, double ceil, std::size_t* clamp_count) {
  std::size_t clamped = 0;
  Tensor out = a.value();
  for (double& v : out.data()) {
    if (v < floor) {
      v = floor;
      ++clamped;
    } else if (v > ceil) {
      v = ceil;
      ++clamped;
    }
    v = std::log(v);
  }
  if (clamp_count) *clamp_count += clamped;
  return make_op(OpKind::kLog, std::move(out), {a}, [floor, ceil](Node& self) {
    Node& pa = parent(self, 0);
    auto g = self.grad.data();
    auto x = pa.value.data();
    auto ga = pa.ensure_grad().data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] >= floor && x[i] <= ceil) ga[i] += g[i] / x[i];
    }
  });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return make_op(OpKind::kSum, Tensor::scalar(total), {a}, [](Node& self) {
    Node& pa = parent(self, 0);
    const double g = self.grad[0];
    for (double& v : pa.ensure_grad().data()) v += g;
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return make_op(OpKind::kMean, Tensor::scalar(total / n), {a}, [n](Node& self) {
    Node& pa = parent(self, 0);
    const double g = self.grad[0] / n;
    for (double& v : pa.ensure_grad().data()) v += g;
  });
}

Var select_rows(const Var& a, std::span<const std::size_t> rows) {
  const Tensor& av = a.value();
  require_rank2(OpKind::kSelectRows, av);
  const std::size_t cols = av.cols();
  if (rows.empty()) shape_fail(OpKind::kSelectRows, "empty row selection");
  Tensor out = Tensor::matrix(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) {
      shape_fail(OpKind::kSelectRows, "row " + std::to_string(rows[i]) + " out of range for " +
                                          av.shape_string());
    }
    std::copy(av.row(rows[i]).begin(), av.row(rows[i]).end(), out.row(i).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_op(OpKind::kSelectRows, std::move(out), {a}, [idx, cols](Node& self) {
    Node& pa = parent(self, 0);
    Tensor& ga = pa.ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = self.grad.row(i);
      auto dst = ga.row(idx[i]);
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Var mask_fill(const Var& a, const std::vector<bool>& mask, double fill) {
  if (mask.size() != a.value().size()) {
    shape_fail(OpKind::kMask, "mask length " + std::to_string(mask.size()) +
                                  " does not match " + a.value().shape_string());
  }
  Tensor out = a.value();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) {
    if (mask[i]) od[i] = fill;
  }
  return make_op(OpKind::kMask, std::move(out), {a}, [mask](Node& self) {
    Node& pa = parent(self, 0);
    auto g = self.grad.data();
    auto ga = pa.ensure_grad().data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!mask[i]) ga[i] += g[i];
    }
  });
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.value().size()) {
    shape_fail(OpKind::kReshape, "cannot view " + a.value().shape_string() + " as [" +
                                     std::to_string(rows) + "x" + std::to_string(cols) + "]");
  }
  Tensor out({rows, cols}, a.value().values());
  return make_op(OpKind::kReshape, std::move(out), {a}, [](Node& self) {
    Node& pa = parent(self, 0);
    auto g = self.grad.data();
    auto ga = pa.ensure_grad().data();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var attention_scores(const Var& query, const Var& keys, std::size_t slots, std::size_t heads) {
  const Tensor& q = query.value();
  const Tensor& k = keys.value();
  require_rank2(OpKind::kAttentionScores, q);
  require_rank2(OpKind::kAttentionScores, k);
  const std::size_t groups = q.rows();
  if (heads == 0 || slots == 0 || q.cols() % heads != 0 || k.cols() != q.cols() ||
      k.rows() != groups * slots) {
    shape_fail(OpKind::kAttentionScores,
               "query " + q.shape_string() + " and keys " + k.shape_string() + " with " +
                   std::to_string(slots) + " slots and " + std::to_string(heads) + " heads");
  }
  const std::size_t width = q.cols(), dim = width / heads;
  Tensor out = Tensor::matrix(groups * heads, slots);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t h = 0; h < heads; ++h) {
      const double* qv = q.data().data() + g * width + h * dim;
      for (std::size_t s = 0; s < slots; ++s) {
        const double* kv = k.data().data() + (g * slots + s) * width + h * dim;
        double acc = 0.0;
        for (std::size_t c = 0; c < dim; ++c) acc += qv[c] * kv[c];
        out(g * heads + h, s) = acc;
      }
    }
  }
  return make_op(OpKind::kAttentionScores, std::move(out), {query, keys},
                 [groups, heads, slots, width, dim](Node& self) {
                   Node& pq = parent(self, 0);
                   Node& pk = parent(self, 1);
                   const double* qd = pq.value.data().data();
                   const double* kd = pk.value.data().data();
                   double* gq = pq.requires_grad ? pq.ensure_grad().data().data() : nullptr;
                   double* gk = pk.requires_grad ? pk.ensure_grad().data().data() : nullptr;
                   for (std::size_t g = 0; g < groups; ++g) {
                     for (std::size_t h = 0; h < heads; ++h) {
                       for (std::size_t s = 0; s < slots; ++s) {
                         const double go = self.grad(g * heads + h, s);
                         if (go == 0.0) continue;
                         const std::size_t qo = g * width + h * dim;
                         const std::size_t ko = (g * slots + s) * width + h * dim;
                         for (std::size_t c = 0; c < dim; ++c) {
                           if (gq) gq[qo + c] += go * kd[ko + c];
                           if (gk) gk[ko + c] += go * qd[qo + c];
                         }
                       }
                     }
                   }
                 });
}

Var attention_combine(const Var& weights, const Var& values, std::size_t slots,
                      std::size_t heads) {
  const Tensor& w = weights.value();
  const Tensor& v = values.value();
  require_rank2(OpKind::kAttentionCombine, w);
  require_rank2(OpKind::kAttentionCombine, v);
  if (heads == 0 || slots == 0 || w.cols() != slots || w.rows() % heads != 0 ||
      v.cols() % heads != 0 || v.rows() != (w.rows() / heads) * slots) {
    shape_fail(OpKind::kAttentionCombine,
               "weights " + w.shape_string() + " and values " + v.shape_string() + " with " +
                   std::to_string(slots) + " slots and " + std::to_string(heads) + " heads");
  }
  const std::size_t groups = w.rows() / heads, width = v.cols(), dim = width / heads;
  Tensor out = Tensor::matrix(groups, width);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t h = 0; h < heads; ++h) {
      double* o = out.data().data() + g * width + h * dim;
      for (std::size_t s = 0; s < slots; ++s) {
        const double a = w(g * heads + h, s);
        if (a == 0.0) continue;
        const double* vv = v.data().data() + (g * slots + s) * width + h * dim;
        for (std::size_t c = 0; c < dim; ++c) o[c] += a * vv[c];
      }
    }
  }
  return make_op(OpKind::kAttentionCombine, std::move(out), {weights, values},
                 [groups, heads, slots, width, dim](Node& self) {
                   Node& pw = parent(self, 0);
                   Node& pv = parent(self, 1);
                   const double* wd = pw.value.data().data();
                   const double* vd = pv.value.data().data();
                   double* gw = pw.requires_grad ? pw.ensure_grad().data().data() : nullptr;
                   double* gv = pv.requires_grad ? pv.ensure_grad().data().data() : nullptr;
                   const double* go = self.grad.data().data();
                   for (std::size_t g = 0; g < groups; ++g) {
                     for (std::size_t h = 0; h < heads; ++h) {
                       const double* gorow = go + g * width + h * dim;
                       for (std::size_t s = 0; s < slots; ++s) {
                         const std::size_t wi = (g * heads + h) * slots + s;
                         const std::size_t vo = (g * slots + s) * width + h * dim;
                         double acc = 0.0;
                         for (std::size_t c = 0; c < dim; ++c) {
                           acc += gorow[c] * vd[vo + c];
                           if (gv) gv[vo + c] += wd[wi] * gorow[c];
                         }
                         if (gw) gw[wi] += acc;
                       }
                     }
                   }
                 });
}

void backward(const Var& root) {
  if (!root.defined()) throw InvalidArgument("backward: undefined root");
  if (root.value().size() != 1) {
    throw ShapeError("backward: root must be scalar, got " + root.value().shape_string());
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->op == OpKind::kLeaf) {
      n->ensure_grad();
    } else {
      n->ensure_grad().fill(0.0);
    }
  }
  root.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace aoicache::ad
