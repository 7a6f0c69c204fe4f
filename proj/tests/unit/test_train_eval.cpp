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

#include <algorithm>
#include <cmath>
#include <random>

#include "aoicache/errors.hpp"
#include "aoicache/metrics.hpp"
#include "aoicache/negatives.hpp"
#include "aoicache/synthetic.hpp"
#include "aoicache/trainer.hpp"
#include "grad_suite.hpp"
#include "reference.hpp"

using namespace aoicache;

namespace {

Trace toy_trace() {
  SyntheticConfig cfg;
  cfg.seed = 3;
  cfg.users = 6;
  cfg.items = 4;
  cfg.clusters = 2;
  cfg.hours = 1;
  cfg.events_per_hour = 20;
  return generate_synthetic_trace(cfg);
}

TrainConfig quick_train() {
  TrainConfig t;
  t.batch_size = 5;
  t.learning_rate = 1e-3;
  t.epochs = 1;
  t.seed = 7;
  return t;
}

}  // namespace

TEST_CASE("auc examples") {
  CHECK(auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
  CHECK(auc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1, 0}) == 0.5);
  CHECK(auc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}) == 0.0);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 1}), InvalidArgument);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), InvalidArgument);
}

TEST_CASE("average precision examples") {
  CHECK(average_precision(std::vector<double>{0.9, 0.5, 0.1}, std::vector<int>{1, 0, 0}) == 1.0);
  for (int n : {2, 5, 10}) {
    std::vector<double> s(n);
    std::vector<int> y(n, 0);
    for (int i = 0; i < n; ++i) s[i] = n - i;
    y[n - 1] = 1;
    CHECK(average_precision(s, y) == doctest::Approx(1.0 / n).epsilon(1e-15));
  }
  CHECK_THROWS_AS(average_precision(std::vector<double>{0.1}, std::vector<int>{0}), InvalidArgument);
}

TEST_CASE("metrics match brute-force oracles") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t n = 2 + rng() % 999;
    std::vector<double> s(n);
    std::vector<int> y(n);
    // Coarse scores on odd trials force many ties.
    const double grid = trial % 2 ? 20.0 : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = std::uniform_real_distribution<double>(0, 1)(rng);
      s[i] = grid > 0 ? std::round(u * grid) / grid : u;
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 1;
    y[1] = 0;
    CHECK(std::abs(auc(s, y) - oracle::pairwise_auc(s, y)) < 1e-9);
    CHECK(std::abs(average_precision(s, y) - oracle::ranked_average_precision(s, y)) < 1e-9);
  }
}

TEST_CASE("auc is invariant under strictly monotone transforms") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::vector<double> logits(300);
  std::vector<int> y(300);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    y[i] = static_cast<int>(i % 2);
    logits[i] = z(rng) + 0.7 * y[i];
  }
  std::vector<double> p(logits.size()), q(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = oracle::sigmoid(logits[i]);
    q[i] = oracle::sigmoid(2 * logits[i] + 1);
  }
  CHECK(auc(p, y) == auc(q, y));
  CHECK(auc(logits, y) == auc(p, y));
}

TEST_CASE("perfect scores give unit metrics for both tasks") {
  ScoredEvents s;
  s.positive = {0.9, 0.8, 0.99, 0.7};
  s.negative = {0.1, 0.2, 0.3, 0.05};
  s.inductive = {false, true, false, true};
  std::vector<std::string> warnings;
  const SplitMetrics m = summarize(s, "test", &warnings);
  CHECK(*m.transductive.auc == 1.0);
  CHECK(*m.transductive.ap == 1.0);
  CHECK(*m.inductive.auc == 1.0);
  CHECK(*m.inductive.ap == 1.0);
  CHECK(warnings.empty());
}

TEST_CASE("empty inductive subset is reported") {
  Trace t(2);
  t.reserve_universe(2, 2);
  const double f[] = {0.5, -0.5};
  for (int e = 0; e < 20; ++e) t.append(e % 2, (e / 2) % 2, e * 10.0, f);
  const TraceSplit split = chronological_split(t, {0.6, 0.2, 0.2});
  CHECK(split.new_nodes.empty());
  const auto r = train(oracle::toy_model_config(Aggregator::kLatest, 1), quick_train(), t, split);
  REQUIRE(r.report.test.has_value());
  CHECK(r.report.test->inductive.events == 0);
  CHECK_FALSE(r.report.test->inductive.auc.has_value());
  const auto& w = r.report.warnings;
  CHECK(std::find(w.begin(), w.end(), "test: inductive subset is empty") != w.end());
}

TEST_CASE("training is deterministic") {
  const Trace t = toy_trace();
  const TraceSplit split = chronological_split(t, {0.5, 0.25, 0.25});
  const auto cfg = oracle::toy_model_config(Aggregator::kAoiAttention, 11);
  const auto a = train(cfg, quick_train(), t, split);
  const auto b = train(cfg, quick_train(), t, split);
  REQUIRE(!a.report.loss_curve.empty());
  CHECK(a.report.loss_curve.back().loss == b.report.loss_curve.back().loss);
  CHECK(a.model.parameter_values() == b.model.parameter_values());
  CHECK(a.validation_state == b.validation_state);
  CHECK(a.report.to_json().dump() == b.report.to_json().dump());
}

TEST_CASE("aggregator choice changes the trajectory") {
  const Trace t = toy_trace();
  const TraceSplit split = chronological_split(t, {0.5, 0.25, 0.25});
  const auto latest = train(oracle::toy_model_config(Aggregator::kLatest, 11), quick_train(), t, split);
  const auto aoi = train(oracle::toy_model_config(Aggregator::kAoiAttention, 11), quick_train(), t, split);
  CHECK(latest.report.variant == "TGN-L");
  CHECK(aoi.report.variant == "ATAGNN");
  CHECK(latest.report.loss_curve.back().loss != aoi.report.loss_curve.back().loss);
}

TEST_CASE("latest with one slot matches the generic message path bit for bit") {
  const Trace t = toy_trace();
  const TraceSplit split = chronological_split(t, {0.5, 0.25, 0.25});
  auto fast = oracle::toy_model_config(Aggregator::kLatest, 2);
  fast.neighbors = 1;
  auto generic = fast;
  generic.force_generic_path = true;
  TrainConfig tc = quick_train();
  tc.epochs = 2;
  const auto a = train(fast, tc, t, split);
  const auto b = train(generic, tc, t, split);
  CHECK(a.model.parameter_values() == b.model.parameter_values());
  CHECK(a.validation_state == b.validation_state);
  CHECK(a.report.to_json().dump() == b.report.to_json().dump());
}

TEST_CASE("duplicated events leave the mean loss unchanged") {
  // BCE level.
  const std::vector<double> p = {0.3, 0.8, 0.55}, y = {1, 0, 1};
  std::vector<double> pp = p, yy = y;
  pp.insert(pp.end(), p.begin(), p.end());
  yy.insert(yy.end(), y.begin(), y.end());
  CHECK(bce_value(pp, yy) == doctest::Approx(bce_value(p, y)).epsilon(1e-15));

  // Model level: the same event twice in one batch.
  Model model(oracle::toy_model_config(Aggregator::kAoiAttention, 5));
  const double f[] = {0.2, 0.4};
  Trace once(2), twice(2);
  for (Trace* tr : {&once, &twice}) {
    tr->reserve_universe(2, 3);
    tr->append(0, 1, 1.0, f);
    tr->append(1, 2, 2.0, f);
    tr->append(0, 2, 3.0, f);
  }
  twice.append(0, 2, 3.0, f);
  GraphState state(model.graph_dims(2, 3));
  {
    ad::NoGradGuard guard;
    const std::uint32_t negs[] = {0, 0};
    const auto warm = model.forward_batch(state, once, 0, 2, negs);
    Model::commit(state, warm.memory, warm.reference_time, once, 0, 2);
  }
  const std::uint32_t one_neg[] = {0};
  const std::uint32_t two_negs[] = {0, 0};
  const double l1 = model.forward_batch(state, once, 2, 3, one_neg).loss.value().item();
  const double l2 = model.forward_batch(state, twice, 2, 4, two_negs).loss.value().item();
  CHECK(l2 == doctest::Approx(l1).epsilon(1e-14));
}

TEST_CASE("train config validation") {
  TrainConfig t;
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
  t = TrainConfig{};
  t.learning_rate = 0.0;
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
  t = TrainConfig{};
  t.epochs = 0;
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
  ModelConfig m;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);  // no edge or node features
}

TEST_CASE("model config json round trip") {
  auto c = oracle::toy_model_config(Aggregator::kAttention, 99);
  c.orientation = MaskOrientation::kAsWritten;
  c.head_activation = HeadActivation::kSigmoid;
  c.max_timespan = 12345.678;
  const ModelConfig back = ModelConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  CHECK(back.to_json().dump() == c.to_json().dump());
}

TEST_CASE("scoring a segment does not record gradients and advances the state") {
  const Trace t = toy_trace();
  const TraceSplit split = chronological_split(t, {0.5, 0.25, 0.25});
  Model model(oracle::toy_model_config(Aggregator::kAoiAttention, 4));
  GraphState state(model.graph_dims(t.num_users(), t.num_items()));
  const auto s = score_segment(model, state, t, 0, split.train_end, 4, 1, split);
  CHECK(s.positive.size() == split.train_end);
  CHECK(s.negative.size() == split.train_end);
  for (const auto& p : model.parameters()) CHECK_FALSE(p.var.has_grad());
  CHECK(state.last_event_time(t.user_node(t.users()[0])) >= t.timestamps()[0]);
}
