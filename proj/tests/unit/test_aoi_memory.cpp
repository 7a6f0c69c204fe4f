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


#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "aoicache/aoi_attention.hpp"
#include "aoicache/errors.hpp"
#include "aoicache/model.hpp"
#include "grad_suite.hpp"
#include "reference.hpp"

using namespace aoicache;
using oracle::Mat;
using oracle::Vec;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ad::Var var(const Mat& m) { return ad::Var::parameter(oracle::to_tensor(m)); }
ad::Var var(const Vec& v) { return ad::Var::parameter(oracle::to_row(v)); }

struct AttentionInstance {
  oracle::AttentionWeights w;
  MultiHeadAggregator agg;
};

AttentionInstance random_attention(std::mt19937_64& rng, std::size_t input, std::size_t inf,
                                   std::size_t heads, std::size_t head_dim, std::size_t hidden,
                                   HeadActivation act) {
  AttentionInstance a;
  a.w.wq = oracle::random_matrix(rng, input, heads * head_dim);
  a.w.wk = oracle::random_matrix(rng, input, heads * head_dim);
  a.w.wv = oracle::random_matrix(rng, input, heads * head_dim);
  a.w.w0 = oracle::random_matrix(rng, heads * head_dim + inf, hidden);
  a.w.b0 = oracle::random_vector(rng, hidden);
  a.w.w1 = oracle::random_matrix(rng, hidden, inf);
  a.w.b1 = oracle::random_vector(rng, inf);
  MultiHeadAggregator::Weights w{var(a.w.wq), var(a.w.wk), var(a.w.wv), var(a.w.w0),
                                 var(a.w.b0), var(a.w.w1), var(a.w.b1)};
  a.agg = MultiHeadAggregator(std::move(w), heads, act);
  return a;
}

struct GruInstance {
  oracle::GruWeights w;
  Gru cell;
};

GruInstance random_gru(std::mt19937_64& rng, std::size_t in, std::size_t m, double scale = 1.0) {
  GruInstance g;
  auto mat = [&](std::size_t r, std::size_t c) { return oracle::random_matrix(rng, r, c, scale); };
  g.w = {mat(in, m), mat(m, m), mat(1, m)[0], mat(in, m), mat(m, m), mat(1, m)[0],
         mat(in, m), mat(m, m), mat(1, m)[0]};
  g.cell = Gru(Gru::Weights{var(g.w.w_hz), var(g.w.w_mz), var(g.w.b_z), var(g.w.w_hf),
                            var(g.w.w_mf), var(g.w.b_f), var(g.w.w_hh), var(g.w.w_mh),
                            var(g.w.b_h)});
  return g;
}

AoiThresholdNet zero_threshold(std::size_t n, std::size_t hidden) {
  return AoiThresholdNet({var(Mat(n, Vec(hidden, 0.0))), var(Vec(hidden, 0.0)),
                          var(Mat(hidden, Vec(1, 0.0))), var(Vec{0.0})});
}

}  // namespace

TEST_CASE("ages") {
  CHECK(compute_ages(std::vector<double>{60, 95}, {false, false}, 100) == std::vector<double>{40, 5});
  CHECK(compute_ages(std::vector<double>{100}, {false}, 100) == std::vector<double>{0});
  const auto repeated = compute_ages(std::vector<double>{90, 80, 70}, {false, false, false}, 100);
  CHECK(repeated == std::vector<double>{10, 20, 30});
  const auto padded = compute_ages(std::vector<double>{90, 0}, {false, true}, 100);
  CHECK(padded[1] == kInf);
  CHECK_THROWS_AS(compute_ages(std::vector<double>{101}, {false}, 100), InvalidArgument);
}

TEST_CASE("threshold net") {
  CHECK(zero_threshold(4, 3).threshold(std::vector<double>{1, 2, 3, 4}) == 0.0);

  // Identity first layer and a positive output bias.
  AoiThresholdNet ident({var(Mat{{1, 0}, {0, 1}}), var(Vec{0, 0}), var(Mat{{1}, {1}}), var(Vec{0.5})});
  CHECK(ident.threshold(std::vector<double>{2, 3}) == 5.5);
  CHECK(ident.threshold(std::vector<double>{2, kInf}) == 2.5);

  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 10, h = 1 + trial % 7;
    const Mat w1 = oracle::random_matrix(rng, n, h), w2 = oracle::random_matrix(rng, h, 1);
    const Vec b1 = oracle::random_vector(rng, h), b2 = oracle::random_vector(rng, 1);
    const Vec ages = oracle::random_vector(rng, n, 50.0);
    Vec abs_ages = ages;
    for (double& a : abs_ages) a = std::abs(a);
    AoiThresholdNet net({var(w1), var(b1), var(w2), var(b2)});
    const double got = net.threshold(abs_ages);
    CHECK(got >= 0.0);
    CHECK(std::abs(got - oracle::threshold_mlp(abs_ages, w1, b1, w2, b2[0])) < 1e-12);
  }
}

TEST_CASE("soft mask boundary and saturation") {
  const std::vector<double> stamps = {200.0};
  for (auto o : {MaskOrientation::kStaleDrops, MaskOrientation::kAsWritten}) {
    CHECK(soft_mask(stamps, std::vector<double>{7.0}, 7.0, o)[0] == 100.0);
  }
  // keep-signal +1 and -1
  CHECK(std::abs(soft_mask(stamps, std::vector<double>{6.0}, 7.0, MaskOrientation::kStaleDrops)[0] -
                 200.0) < 1e-9);
  CHECK(std::abs(soft_mask(stamps, std::vector<double>{8.0}, 7.0, MaskOrientation::kStaleDrops)[0]) <
        1e-9);
  CHECK(std::abs(soft_mask(stamps, std::vector<double>{8.0}, 7.0, MaskOrientation::kAsWritten)[0] -
                 200.0) < 1e-9);
  CHECK(std::abs(soft_mask(stamps, std::vector<double>{6.0}, 7.0, MaskOrientation::kAsWritten)[0]) <
        1e-9);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 0.1);
  for (int trial = 0; trial < 100; ++trial) {
    const double age = u(rng), thre = u(rng), t = 1000 * u(rng);
    const bool stale = trial % 2 == 0;
    const auto o = stale ? MaskOrientation::kStaleDrops : MaskOrientation::kAsWritten;
    const double got = soft_mask(std::vector<double>{t}, std::vector<double>{age}, thre, o)[0];
    CHECK(std::abs(got - t * oracle::soft_multiplier(age, thre, stale)) < 1e-9);
    const double mult = soft_mask_multiplier(ad::Var::constant(Tensor::scalar(age)),
                                             ad::Var::constant(Tensor::scalar(thre)), o)
                            .value()
                            .item();
    CHECK(std::abs(mult - oracle::soft_multiplier(age, thre, stale)) < 1e-12);
  }
}

TEST_CASE("attention with a single message") {
  std::mt19937_64 rng(1);
  for (auto act : {HeadActivation::kIdentity, HeadActivation::kSigmoid}) {
    auto a = random_attention(rng, 5, 3, 2, 2, 4, act);
    const Mat msg = oracle::random_matrix(rng, 3, 5);
    const Vec inf0 = {msg[0][0], msg[0][1], msg[0][2]};
    const auto out = a.agg.aggregate(var(msg), var(inf0), {false, true, true}, 3);
    const Tensor& alpha = out.weights.value();
    CHECK(alpha(0, 0) == 1.0);
    CHECK(alpha(1, 0) == 1.0);
    const Vec v = oracle::row_times(msg[0], a.w.wv);
    for (std::size_t c = 0; c < v.size(); ++c) {
      const double want = act == HeadActivation::kSigmoid ? oracle::sigmoid(v[c]) : v[c];
      CHECK(std::abs(out.heads.value()[c] - want) < 1e-12);
    }
  }
}

TEST_CASE("attention over two identical messages splits evenly") {
  std::mt19937_64 rng(2);
  auto a = random_attention(rng, 4, 2, 3, 2, 4, HeadActivation::kIdentity);
  const Vec row = oracle::random_vector(rng, 4);
  const auto out = a.agg.aggregate(var(Mat{row, row}), var(Vec{row[0], row[1]}), {false, false}, 2);
  for (std::size_t h = 0; h < 3; ++h) {
    CHECK(out.weights.value()(h, 0) == 0.5);
    CHECK(out.weights.value()(h, 1) == 0.5);
  }
}

TEST_CASE("attention matches the direct evaluator") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t slots = 1 + trial % 6, heads = 1 + trial % 3, dh = 1 + trial % 4;
    const std::size_t d = 2 + trial % 3, dt = 1 + trial % 2, groups = 1 + trial % 3;
    const auto act = trial % 2 ? HeadActivation::kSigmoid : HeadActivation::kIdentity;
    auto a = random_attention(rng, d + dt, d, heads, dh, 5, act);
    Mat all;
    Mat inf0;
    std::vector<bool> mask;
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t s = 0; s < slots; ++s) {
        all.push_back(oracle::random_vector(rng, d + dt, 2.0));
        mask.push_back(s > 0 && rng() % 3 == 0);
      }
      inf0.push_back(Vec(all[g * slots].begin(), all[g * slots].begin() + static_cast<long>(d)));
    }
    const auto out = a.agg.aggregate(var(all), var(inf0), mask, slots);
    for (std::size_t g = 0; g < groups; ++g) {
      const Mat msgs(all.begin() + static_cast<long>(g * slots),
                     all.begin() + static_cast<long>((g + 1) * slots));
      const std::vector<bool> m(mask.begin() + static_cast<long>(g * slots),
                                mask.begin() + static_cast<long>((g + 1) * slots));
      const auto ref = oracle::message_attention(msgs, m, a.w, heads,
                                                 act == HeadActivation::kSigmoid, inf0[g]);
      for (std::size_t h = 0; h < heads; ++h) {
        double total = 0.0;
        for (std::size_t s = 0; s < slots; ++s) {
          const double alpha = out.weights.value()(g * heads + h, s);
          CHECK(std::abs(alpha - ref.alpha[h][s]) < 1e-12);
          if (m[s]) CHECK(alpha == 0.0);
          total += alpha;
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
      }
      for (std::size_t c = 0; c < ref.heads_out.size(); ++c) {
        CHECK(std::abs(out.heads.value()(g, c) - ref.heads_out[c]) < 1e-12);
      }
      for (std::size_t c = 0; c < d; ++c) {
        CHECK(std::abs(out.aggregated.value()(g, c) - ref.out[c]) < 1e-12);
      }
    }
  }
}

TEST_CASE("masked messages receive zero gradient") {
  std::mt19937_64 rng(3);
  auto a = random_attention(rng, 4, 2, 2, 2, 3, HeadActivation::kIdentity);
  ad::Var msgs = var(oracle::random_matrix(rng, 4, 4));
  const std::vector<bool> mask = {false, true, false, true};
  const auto out = a.agg.aggregate(msgs, ad::Var::constant(Tensor::matrix(1, 2, 0.3)), mask, 4);
  ad::backward(ad::sum(out.aggregated));
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(msgs.grad()(1, c) == 0.0);
    CHECK(msgs.grad()(3, c) == 0.0);
  }
  CHECK_THROWS_AS(a.agg.aggregate(msgs, ad::Var::constant(Tensor::matrix(1, 2)),
                                  {true, false, false, false}, 4),
                  InvalidArgument);
}

TEST_CASE("one head with identity values reproduces the latest message") {
  // W_V = I, one head, one slot: the head output is the newest message itself.
  const std::size_t d = 3;
  Mat eye(d, Vec(d, 0.0));
  for (std::size_t i = 0; i < d; ++i) eye[i][i] = 1.0;
  std::mt19937_64 rng(6);
  MultiHeadAggregator agg({var(oracle::random_matrix(rng, d, d)), var(oracle::random_matrix(rng, d, d)),
                           var(eye), var(oracle::random_matrix(rng, d + 2, 4)),
                           var(oracle::random_vector(rng, 4)), var(oracle::random_matrix(rng, 4, 2)),
                           var(oracle::random_vector(rng, 2))},
                          1, HeadActivation::kIdentity);
  const Vec msg = oracle::random_vector(rng, d);
  const auto out = agg.aggregate(var(Mat{msg}), var(Vec{msg[0], msg[1]}), {false}, 1);
  for (std::size_t c = 0; c < d; ++c) CHECK(out.heads.value()[c] == msg[c]);
}

TEST_CASE("gru special cases") {
  std::mt19937_64 rng(0);
  auto g = random_gru(rng, 3, 4, 0.0);
  const Vec mem = {1.0, -2.0, 0.5, 4.0};
  const Tensor next = g.cell.update(var(Mat{mem}), var(Mat{{0.3, 0.2, 0.1}})).value();
  for (std::size_t i = 0; i < 4; ++i) CHECK(next[i] == 0.5 * mem[i]);
  const Tensor zero = g.cell.update(var(Mat{Vec(4, 0.0)}), var(Mat{Vec(3, 0.0)})).value();
  for (double v : zero.data()) CHECK(v == 0.0);
}

TEST_CASE("gru matches the direct evaluator and stays convex") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t in = 1 + trial % 6, m = 1 + trial % 5;
    auto g = random_gru(rng, in, m);
    const Vec mem = oracle::random_vector(rng, m, 3.0), x = oracle::random_vector(rng, in, 3.0);
    const auto gates = g.cell.gates(var(Mat{mem}), var(Mat{x}));
    const auto ref = oracle::gru(mem, x, g.w);
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(std::abs(gates.next.value()[i] - ref.next[i]) < 1e-12);
      const double z = gates.z.value()[i], f = gates.f.value()[i], h = gates.h.value()[i];
      CHECK(std::abs(z - ref.z[i]) < 1e-12);
      CHECK(std::abs(f - ref.f[i]) < 1e-12);
      CHECK(z > 0.0);
      CHECK(z < 1.0);
      CHECK(f > 0.0);
      CHECK(f < 1.0);
      const double next = gates.next.value()[i];
      CHECK(next >= std::min(h, mem[i]) - 1e-15);
      CHECK(next <= std::max(h, mem[i]) + 1e-15);
    }
  }
}

TEST_CASE("module gradients pass 100 finite-difference trials") {
  std::uint64_t seed = 500;
  for (const auto& c : oracle::module_cases()) {
    if (c.name == "gat" || c.name == "predictor" || c.name == "bce" || c.name == "time_encoder") {
      continue;
    }
    const auto s = oracle::run_case(c, 100, ++seed);
    INFO(c.name << ": " << s.result.worst);
    CHECK(s.result.max_rel_error < 1e-4);
    CHECK(s.result.kinks * 100 <= s.result.checked);
  }
}

namespace {

// One user with three messages at t = 10, 20, 30 and fresh memory.
struct SmallGraph {
  Model model;
  GraphState state;
};

SmallGraph small_graph(Aggregator agg, MaskOrientation o, std::size_t messages) {
  ModelConfig c = oracle::toy_model_config(agg, 3);
  c.orientation = o;
  SmallGraph g{Model(c), GraphState()};
  g.state = GraphState(g.model.graph_dims(1, 3));
  const double f[][2] = {{0.2, -0.4}, {0.9, 0.1}, {-0.5, 0.7}};
  for (std::size_t k = 3 - messages; k < 3; ++k) {
    g.state.insert_event(0, static_cast<std::uint32_t>(k), 10.0 * (k + 1), f[k]);
  }
  return g;
}

Tensor user_memory(const SmallGraph& g) {
  const NodeId nodes[] = {0};
  return g.model.updated_memory(g.state, nodes, 30.0).memory.value();
}

void zero_threshold_net(const Model& m) {
  for (ad::Var v : {m.threshold_net().weights().w1, m.threshold_net().weights().b1,
                    m.threshold_net().weights().w2, m.threshold_net().weights().b2}) {
    v.mutable_value().fill(0.0);
  }
}

}  // namespace

TEST_CASE("aoi filter drops stale messages only in the stale-drops orientation") {
  // A zero threshold makes every older message stale.
  auto full = small_graph(Aggregator::kAoiAttention, MaskOrientation::kStaleDrops, 3);
  auto newest_only = small_graph(Aggregator::kAoiAttention, MaskOrientation::kStaleDrops, 1);
  zero_threshold_net(full.model);
  zero_threshold_net(newest_only.model);
  CHECK(user_memory(full) == user_memory(newest_only));

  auto as_written = small_graph(Aggregator::kAoiAttention, MaskOrientation::kAsWritten, 3);
  zero_threshold_net(as_written.model);
  CHECK(user_memory(as_written) != user_memory(newest_only));

  // Plain attention ignores ages altogether.
  auto plain = small_graph(Aggregator::kAttention, MaskOrientation::kStaleDrops, 3);
  CHECK(user_memory(plain) != user_memory(small_graph(Aggregator::kAttention,
                                                      MaskOrientation::kStaleDrops, 1)));
}

TEST_CASE("latest and mean aggregators use the raw message part") {
  auto latest = small_graph(Aggregator::kLatest, MaskOrientation::kStaleDrops, 3);
  auto latest_one = small_graph(Aggregator::kLatest, MaskOrientation::kStaleDrops, 1);
  CHECK(user_memory(latest) == user_memory(latest_one));
  auto mean = small_graph(Aggregator::kMean, MaskOrientation::kStaleDrops, 3);
  CHECK(user_memory(mean) != user_memory(latest));

  // Mean over the three raw messages fed straight into the GRU.
  const Gru& gru = mean.model.gru();
  const Tensor direct = gru.update(ad::Var::constant(Tensor::matrix(1, 4)),
                                   ad::Var::constant(Tensor::from_rows({{0.2, 0.4 / 3.0}})))
                            .value();
  const Tensor got = user_memory(mean);
  for (std::size_t i = 0; i < 4; ++i) CHECK(got[i] == doctest::Approx(direct[i]).epsilon(1e-14));
}

TEST_CASE("memory update pipeline gradient") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (auto agg : {Aggregator::kAttention, Aggregator::kAoiAttention}) {
      ModelConfig c = oracle::toy_model_config(agg, seed);
      Model model(c);
      GraphState state(model.graph_dims(2, 3));
      std::mt19937_64 rng(seed);
      for (int e = 0; e < 6; ++e) {
        const Vec f = oracle::random_vector(rng, 2);
        state.insert_event(static_cast<std::uint32_t>(e % 2), static_cast<std::uint32_t>(e % 3),
                           0.4 * e + 0.01 * static_cast<double>(rng() % 10), f);
      }
      const NodeId nodes[] = {0, 1, 2, 3, 4};
      const Tensor proj = oracle::to_tensor(oracle::random_matrix(rng, 5, c.memory_dim));
      std::vector<ad::Var> leaves;
      for (const auto& p : model.parameters()) leaves.push_back(p.var);
      const auto r = oracle::gradcheck(
          [&] {
            return ad::sum(ad::mul(model.updated_memory(state, nodes, 2.5).memory,
                                   ad::Var::constant(proj)));
          },
          leaves);
      INFO(r.worst);
      CHECK(r.max_rel_error < 1e-4);
    }
  }
}
