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


#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace aoicache::oracle {

Mat random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(rows, Vec(cols));
  for (auto& r : m) {
    for (double& x : r) x = u(rng);
  }
  return m;
}

Vec random_vector(std::mt19937_64& rng, std::size_t n, double scale) {
  return random_matrix(rng, 1, n, scale)[0];
}

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), Vec(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  }
  return m;
}

Tensor to_tensor(const Mat& m) {
  Tensor t = Tensor::matrix(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t r = 0; r < m.size(); ++r) {
    for (std::size_t c = 0; c < m[r].size(); ++c) t(r, c) = m[r][c];
  }
  return t;
}

Tensor to_row(const Vec& v) { return to_tensor(Mat{v}); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec row_times(const Vec& x, const Mat& w) {
  if (x.size() != w.size()) throw std::logic_error("oracle: row_times shape");
  Vec out(w.empty() ? 0 : w[0].size(), 0.0);
  for (std::size_t c = 0; c < out.size(); ++c) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * w[k][c];
    out[c] = s;
  }
  return out;
}

Vec concat(const Vec& a, const Vec& b) {
  Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

namespace {

Vec plus(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Vec relu(Vec a) {
  for (double& x : a) x = x > 0.0 ? x : 0.0;
  return a;
}

Vec ffn(const Vec& x, const AttentionWeights& w) {
  return plus(row_times(relu(plus(row_times(x, w.w0), w.b0)), w.w1), w.b1);
}

Vec head_slice(const Vec& v, std::size_t head, std::size_t dim) {
  return Vec(v.begin() + static_cast<std::ptrdiff_t>(head * dim),
             v.begin() + static_cast<std::ptrdiff_t>((head + 1) * dim));
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// alpha_m = exp(l_m) / sum_n exp(l_n) over unmasked n, written without the
// max shift so it stays a different computation from the library's.
Vec normalized(const Vec& logits, const std::vector<bool>& masked) {
  Vec out(logits.size(), 0.0);
  double denom = 0.0;
  for (std::size_t n = 0; n < logits.size(); ++n) {
    if (!masked[n]) denom += std::exp(logits[n]);
  }
  if (denom == 0.0) return out;
  for (std::size_t m = 0; m < logits.size(); ++m) {
    if (!masked[m]) out[m] = std::exp(logits[m]) / denom;
  }
  return out;
}

}  // namespace

Vec time_encode(const Vec& omegas, double dt) {
  Vec out(omegas.size());
  const double s = std::sqrt(1.0 / static_cast<double>(omegas.size()));
  for (std::size_t i = 0; i < omegas.size(); ++i) out[i] = s * std::cos(omegas[i] * dt);
  return out;
}

double threshold_mlp(const Vec& ages, const Mat& w1, const Vec& b1, const Mat& w2, double b2) {
  const Vec h = relu(plus(row_times(ages, w1), b1));
  const double t = row_times(h, w2)[0] + b2;
  return t > 0.0 ? t : 0.0;
}

double soft_multiplier(double age, double thre, bool stale_drops) {
  return sigmoid(100.0 * (stale_drops ? thre - age : age - thre));
}

AttentionResult message_attention(const Mat& messages, const std::vector<bool>& masked,
                                  const AttentionWeights& w, std::size_t heads, bool sigmoid_heads,
                                  const Vec& inf0) {
  const std::size_t slots = messages.size();
  const std::size_t dh = w.wq[0].size() / heads;
  const Vec q = row_times(messages[0], w.wq);
  AttentionResult r;
  r.alpha.assign(heads, Vec(slots, 0.0));
  r.heads_out.assign(heads * dh, 0.0);
  for (std::size_t l = 0; l < heads; ++l) {
    Vec logits(slots, 0.0);
    for (std::size_t m = 0; m < slots; ++m) {
      logits[m] = dot(head_slice(q, l, dh), head_slice(row_times(messages[m], w.wk), l, dh));
    }
    r.alpha[l] = normalized(logits, masked);
    for (std::size_t m = 0; m < slots; ++m) {
      const Vec v = head_slice(row_times(messages[m], w.wv), l, dh);
      for (std::size_t c = 0; c < dh; ++c) r.heads_out[l * dh + c] += r.alpha[l][m] * v[c];
    }
  }
  if (sigmoid_heads) {
    for (double& x : r.heads_out) x = sigmoid(x);
  }
  r.out = ffn(concat(r.heads_out, inf0), w);
  return r;
}

AttentionResult neighbor_attention(const Vec& self_row, const Mat& neighbors,
                                   const std::vector<bool>& masked, const AttentionWeights& w,
                                   std::size_t heads) {
  const std::size_t slots = neighbors.size();
  const std::size_t dg = w.wk[0].size() / heads;
  const Vec k = row_times(self_row, w.wk);
  AttentionResult r;
  r.alpha.assign(heads, Vec(slots, 0.0));
  r.heads_out.assign(heads * dg, 0.0);
  for (std::size_t l = 0; l < heads; ++l) {
    Vec logits(slots, 0.0);
    for (std::size_t m = 0; m < slots; ++m) {
      logits[m] = dot(head_slice(row_times(neighbors[m], w.wq), l, dg), head_slice(k, l, dg));
    }
    r.alpha[l] = normalized(logits, masked);
    for (std::size_t m = 0; m < slots; ++m) {
      const Vec v = head_slice(row_times(neighbors[m], w.wv), l, dg);
      for (std::size_t c = 0; c < dg; ++c) r.heads_out[l * dg + c] += r.alpha[l][m] * v[c];
    }
  }
  r.out = ffn(concat(r.heads_out, self_row), w);
  return r;
}

GruResult gru(const Vec& mem, const Vec& input, const GruWeights& w) {
  const std::size_t m = mem.size();
  GruResult r;
  r.z = plus(plus(row_times(input, w.w_hz), row_times(mem, w.w_mz)), w.b_z);
  r.f = plus(plus(row_times(input, w.w_hf), row_times(mem, w.w_mf)), w.b_f);
  for (std::size_t i = 0; i < m; ++i) {
    r.z[i] = sigmoid(r.z[i]);
    r.f[i] = sigmoid(r.f[i]);
  }
  Vec fm(m);
  for (std::size_t i = 0; i < m; ++i) fm[i] = r.f[i] * mem[i];
  r.h = plus(plus(row_times(input, w.w_hh), row_times(fm, w.w_mh)), w.b_h);
  r.next.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    r.h[i] = std::tanh(r.h[i]);
    r.next[i] = r.z[i] * r.h[i] + (1.0 - r.z[i]) * mem[i];
  }
  return r;
}

double predictor(const Vec& eu, const Vec& ei, const Mat& w1, const Vec& b1, const Mat& w2,
                 double b2) {
  const Vec h = relu(plus(row_times(concat(eu, ei), w1), b1));
  return sigmoid(row_times(h, w2)[0] + b2);
}

double bce(const Vec& predictions, const Vec& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = predictions[i];
    const double y = labels[i];
    total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return total / static_cast<double>(predictions.size());
}

double pairwise_auc(const Vec& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / pairs;
}

double ranked_average_precision(const Vec& scores, const std::vector<int>& labels) {
  const std::set<double, std::greater<>> levels(scores.begin(), scores.end());
  double positives = 0.0;
  for (int y : labels) positives += y;
  double ap = 0.0;
  double prev_recall = 0.0;
  for (double v : levels) {
    double selected = 0.0;
    double tp = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= v) {
        selected += 1.0;
        tp += labels[i];
      }
    }
    const double recall = tp / positives;
    ap += (tp / selected) * (recall - prev_recall);
    prev_recall = recall;
  }
  return ap;
}

}  // namespace aoicache::oracle
