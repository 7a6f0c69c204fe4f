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
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "aoicache/cache_policy.hpp"
#include "aoicache/cache_sim.hpp"
#include "aoicache/errors.hpp"
#include "aoicache/synthetic.hpp"
#include "cache_suite.hpp"
#include "grad_suite.hpp"
#include "reference_cache.hpp"

using namespace aoicache;

namespace {

// Scores 1 exactly when the pair is requested within [t, t + step).
class FutureScorer final : public PairScorer {
 public:
  FutureScorer(const Trace& trace, double step) : trace_(trace), step_(step) {}
  std::vector<double> score(std::span<const std::uint32_t> users,
                            std::span<const std::uint32_t> items, double t) override {
    std::vector<double> out(users.size() * items.size(), 0.0);
    for (std::size_t e = 0; e < trace_.size(); ++e) {
      const double ts = trace_.timestamps()[e];
      if (ts < t || ts >= t + step_) continue;
      const auto u = std::lower_bound(users.begin(), users.end(), trace_.users()[e]);
      const auto i = std::lower_bound(items.begin(), items.end(), trace_.items()[e]);
      if (u == users.end() || *u != trace_.users()[e]) continue;
      if (i == items.end() || *i != trace_.items()[e]) continue;
      out[static_cast<std::size_t>(u - users.begin()) * items.size() +
          static_cast<std::size_t>(i - items.begin())] = 1.0;
    }
    return out;
  }

 private:
  const Trace& trace_;
  double step_;
};

class ConstantScorer final : public PairScorer {
 public:
  explicit ConstantScorer(double v, bool fakes = false) : v_(v), fakes_(fakes) {}
  std::vector<double> score(std::span<const std::uint32_t> users,
                            std::span<const std::uint32_t> items, double) override {
    return std::vector<double>(users.size() * items.size(), v_);
  }
  bool uses_fake_requests() const override { return fakes_; }

 private:
  double v_;
  bool fakes_;
};

SyntheticConfig still_config(std::size_t hours, std::size_t per_hour) {
  SyntheticConfig c;
  c.seed = 21;
  c.users = 50;
  c.items = 100;
  c.clusters = 5;
  c.hours = hours;
  c.events_per_hour = per_hour;
  return c;
}

std::vector<std::uint32_t> top_by_count(std::span<const std::uint32_t> items, std::size_t n,
                                        std::size_t c) {
  std::vector<std::size_t> counts(n, 0);
  for (auto i : items) ++counts[i];
  std::vector<std::uint32_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0u);
  return select_top_c(counts, ids, c);
}

}  // namespace

TEST_CASE("hand-computed cache cases") {
  for (const auto& c : oracle::cache_hand_cases()) {
    INFO(c.name);
    CHECK(c.passed);
  }
}

TEST_CASE("top-C selection matches repeated selection") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<std::size_t> counts(n);
    std::vector<std::uint32_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0u);
    std::shuffle(ids.begin(), ids.end(), rng);
    for (auto& c : counts) c = rng() % 5;
    const std::size_t cap = rng() % (n + 3);
    CHECK(select_top_c(counts, ids, cap) == oracle::reference_top_c(counts, ids, cap));
  }
}

TEST_CASE("policies match the brute-force simulators on random traces") {
  for (const auto& s : oracle::cache_equivalence(50, 99)) {
    INFO(s.policy);
    CHECK(s.traces == 50);
    CHECK(s.mismatches == 0);
    CHECK(s.requests > 0);
  }
}

TEST_CASE("an oracle scorer recovers the true request counts") {
  Trace t(0);
  t.reserve_universe(4, 5);
  std::mt19937_64 rng(4);
  std::vector<std::size_t> truth(5, 0);
  // At most one event per step keeps every (pair, step) distinct.
  for (int k = 0; k < 300; ++k) {
    if (rng() % 3 == 0) continue;
    const auto u = static_cast<std::uint32_t>(rng() % 4);
    const auto i = static_cast<std::uint32_t>(rng() % 5);
    t.append(u, i, k * 6.0 + 1.0, {});
    ++truth[i];
  }
  FutureScorer scorer(t, 6.0);
  const std::uint32_t users[] = {0, 1, 2, 3};
  const std::uint32_t items[] = {0, 1, 2, 3, 4};
  CHECK(predict_requests(scorer, users, items, 0.0, 6.0, 0.5, 1800.0) == truth);
}

TEST_CASE("predict_requests validation") {
  ConstantScorer s(0.7);
  const std::uint32_t one[] = {0};
  CHECK_THROWS_AS(predict_requests(s, {}, one, 0.0, 6.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(predict_requests(s, one, {}, 0.0, 6.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(predict_requests(s, one, one, 0.0, 0.0, 0.5), InvalidArgument);
  CHECK(predict_requests(s, one, one, 0.0, 6.0, 0.5) == std::vector<std::size_t>{600});
  ConstantScorer faking(0.7, true);
  const double two[] = {0.4, 0.6};
  CHECK_THROWS_AS(predict_request_counts(faking, one, one, 0.0, 6.0, two), InvalidArgument);
}

TEST_CASE("hit rate does not decrease with cache size") {
  SyntheticConfig cfg = still_config(6, 400);
  cfg.set_drift_period(2);
  const Trace trace = generate_synthetic_trace(cfg);
  const std::size_t sizes[] = {5, 10, 15, 20};
  oracle::HashScorer scorer(3);
  PredictionWindowConfig pc;
  pc.step_seconds = 120.0;
  const auto runs = run_predictive_policy(scorer, trace, 400, trace.size(), sizes, pc, {}, "hash");
  std::vector<double> lru_rates, lfu_rates;
  for (std::size_t c : sizes) {
    LruCache lru(c);
    lru_rates.push_back(run_baseline(lru, trace, 0, 400, trace.size()).average_hit_rate());
    LfuCache lfu(c);
    lfu_rates.push_back(run_baseline(lfu, trace, 0, 400, trace.size()).average_hit_rate());
  }
  for (std::size_t k = 1; k < 4; ++k) {
    CHECK(lru_rates[k] >= lru_rates[k - 1]);
    CHECK(lfu_rates[k] >= lfu_rates[k - 1]);
    for (std::size_t h = 0; h < runs[k].hours.size(); ++h) {
      CHECK(runs[k].hours[h].hits >= runs[k - 1].hours[h].hits);
    }
  }
  CHECK(lru_rates.back() > lru_rates.front());
}

TEST_CASE("LFU settles on the true top-C without drift") {
  const Trace trace = generate_synthetic_trace(still_config(4, 5000));
  const std::size_t c = 5;
  const auto truth = top_by_count(trace.items(), trace.num_items(), c);
  LfuCache lfu(c);
  std::size_t e = 0;
  for (std::int64_t h = 0; h < 4; ++h) {
    while (e < trace.size() && hour_of(trace.timestamps()[e]) == h) lfu.request(trace.items()[e++]);
    // Cached counts dominate every uncached count.
    std::size_t min_in = SIZE_MAX, max_out = 0;
    for (std::uint32_t i = 0; i < trace.num_items(); ++i) {
      if (lfu.contains(i)) {
        min_in = std::min(min_in, lfu.count(i));
      } else {
        max_out = std::max(max_out, lfu.count(i));
      }
    }
    CHECK(min_in >= max_out);
    if (h >= 1) CHECK(lfu.contents() == truth);
  }
}

TEST_CASE("synthetic popularity follows the Zipf law") {
  SyntheticConfig cfg = still_config(10, 10000);
  const Trace trace = generate_synthetic_trace(cfg);
  CHECK(trace.size() >= 100000);
  std::vector<std::size_t> counts(trace.num_items(), 0);
  for (auto i : trace.items()) ++counts[i];
  std::sort(counts.rbegin(), counts.rend());
  const double ratio = static_cast<double>(counts[0]) / static_cast<double>(counts[9]);
  CHECK(ratio > 8.0);
  CHECK(ratio < 12.0);

  const auto pmf = zipf_pmf(4, 1.0);
  CHECK(pmf[0] / pmf[3] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(std::accumulate(pmf.begin(), pmf.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("without drift the popular set stays put") {
  const Trace trace = generate_synthetic_trace(still_config(3, 20000));
  std::set<std::vector<std::uint32_t>> tops;
  std::size_t e = 0;
  for (std::int64_t h = 0; h < 3; ++h) {
    std::vector<std::uint32_t> hour;
    while (e < trace.size() && hour_of(trace.timestamps()[e]) == h) hour.push_back(trace.items()[e++]);
    tops.insert(top_by_count(hour, trace.num_items(), 5));
  }
  CHECK(tops.size() == 1);
}

TEST_CASE("drift moves the popular set") {
  SyntheticConfig cfg = still_config(2, 20000);
  cfg.drift_hours = {1};
  const Trace trace = generate_synthetic_trace(cfg);
  std::vector<std::uint32_t> h0, h1;
  for (std::size_t e = 0; e < trace.size(); ++e) {
    (hour_of(trace.timestamps()[e]) == 0 ? h0 : h1).push_back(trace.items()[e]);
  }
  CHECK(top_by_count(h0, 100, 5) != top_by_count(h1, 100, 5));
}

TEST_CASE("synthetic traces are reproducible") {
  const SyntheticConfig cfg = still_config(2, 300);
  const Trace a = generate_synthetic_trace(cfg);
  const Trace b = generate_synthetic_trace(cfg);
  CHECK(std::ranges::equal(a.users(), b.users()));
  CHECK(std::ranges::equal(a.items(), b.items()));
  CHECK(std::ranges::equal(a.timestamps(), b.timestamps()));
  for (std::size_t e = 0; e < a.size(); e += 37) {
    CHECK(std::ranges::equal(a.event(e).edge_features, b.event(e).edge_features));
  }
  SyntheticConfig other = cfg;
  other.seed = 22;
  CHECK_FALSE(std::ranges::equal(a.items(), generate_synthetic_trace(other).items()));
}

TEST_CASE("candidate scopes") {
  Trace t(0);
  t.reserve_universe(5, 6);
  t.append(0, 0, 100.0, {});
  t.append(1, 1, 4000.0, {});
  t.append(2, 2, 7300.0, {});
  t.append(3, 3, 9000.0, {});
  const auto [u1, i1] = candidates_for(t, 3 * 3600.0, CandidateScope::kRecent1h);
  CHECK(u1 == std::vector<std::uint32_t>{2, 3});
  CHECK(i1 == std::vector<std::uint32_t>{2, 3});
  const auto [u2, i2] = candidates_for(t, 3 * 3600.0, CandidateScope::kRecent2h);
  CHECK(u2 == std::vector<std::uint32_t>{1, 2, 3});
  const auto [ua, ia] = candidates_for(t, 3 * 3600.0, CandidateScope::kAllItems);
  CHECK(ua == std::vector<std::uint32_t>{0, 1, 2, 3});
  CHECK(ia.size() == 6);
  for (auto s : {CandidateScope::kAllItems, CandidateScope::kRecent1h, CandidateScope::kRecent2h}) {
    CHECK(parse_candidate_scope(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_candidate_scope("recent-3h"), InvalidArgument);
}

TEST_CASE("an hour without candidates keeps the previous set") {
  Trace t(0);
  t.reserve_universe(2, 3);
  t.append(0, 1, 10.0, {});
  t.append(1, 1, 20.0, {});
  t.append(0, 1, 2 * 3600.0 + 5.0, {});
  t.append(1, 2, 2 * 3600.0 + 9.0, {});
  ConstantScorer s(0.9);
  const std::size_t sizes[] = {1};
  PredictionWindowConfig cfg;
  cfg.step_seconds = 600.0;
  const auto runs = run_predictive_policy(s, t, 0, 4, sizes, cfg, {}, "const");
  // Hour 1 predicts {1} from hour 0; hour 2 sees nothing recent and keeps it.
  CHECK(runs.front().hit_sequence == std::vector<bool>{false, false, true, false});
}

TEST_CASE("threshold calibration") {
  const Trace trace = generate_synthetic_trace(still_config(3, 200));
  PredictionWindowConfig cfg;
  cfg.step_seconds = 300.0;
  ConstantScorer s(0.9);
  const double tied[] = {0.4, 0.3, 0.5};
  const auto cal = calibrate_request_threshold(s, trace, 200, trace.size(), 5, cfg, tied, {});
  CHECK(cal.best_threshold == 0.4);
  CHECK(cal.grid.size() == 3);

  oracle::HashScorer h(9);
  const auto grid = default_threshold_grid();
  CHECK(grid.size() == 51);
  CHECK(grid.front() == 0.30);
  CHECK(grid.back() == 0.80);
  const auto best = calibrate_request_threshold(h, trace, 200, trace.size(), 5, cfg, grid, {});
  for (const auto& [p, rate] : best.grid) CHECK(rate <= best.best_hit_rate);
  const double bad[] = {1.5};
  CHECK_THROWS_AS(calibrate_request_threshold(h, trace, 200, trace.size(), 5, cfg, bad, {}),
                  InvalidArgument);
  CHECK_THROWS_AS(calibrate_request_threshold(h, trace, 200, trace.size(), 5, cfg, {}, {}),
                  InvalidArgument);
  cfg.fake_updates = true;
  CHECK_THROWS_AS(calibrate_request_threshold(h, trace, 200, trace.size(), 5, cfg, grid, {}),
                  InvalidArgument);
}

TEST_CASE("fake requests stay out of the real state") {
  SyntheticConfig sc = still_config(3, 40);
  sc.users = 8;
  sc.items = 6;
  sc.clusters = 2;
  const Trace trace = generate_synthetic_trace(sc);
  Model model(oracle::toy_model_config(Aggregator::kAoiAttention, 12));
  const std::size_t begin = 40;
  GraphState base(model.graph_dims(trace.num_users(), trace.num_items()));
  model.replay(base, trace, 0, begin, 10);

  {
    const GraphState before = base;
    ModelScorer plain(model, base, false);
    ModelScorer faking(model, base, true);
    const auto [users, items] = candidates_for(trace, begin, trace.timestamps()[begin - 1],
                                               CandidateScope::kRecent1h);
    const double t0 = trace.timestamps()[begin - 1];
    plain.begin_window(t0);
    faking.begin_window(t0);
    const auto p0 = plain.score(users, items, t0 + 6.0);
    CHECK(faking.score(users, items, t0 + 6.0) == p0);
    const UserItem pairs[] = {{users.front(), items.front()}};
    faking.record_fake_requests(pairs, t0 + 6.0);
    CHECK(faking.score(users, items, t0 + 12.0) != plain.score(users, items, t0 + 12.0));
    CHECK(base == before);
  }

  PredictionWindowConfig cfg;
  cfg.step_seconds = 600.0;
  cfg.request_threshold = 0.3;
  const std::size_t sizes[] = {3};
  GraphState with_fakes = base, without = base;
  cfg.fake_updates = true;
  const auto a = run_model_policy(model, with_fakes, trace, begin, trace.size(), sizes, cfg);
  cfg.fake_updates = false;
  const auto b = run_model_policy(model, without, trace, begin, trace.size(), sizes, cfg);
  CHECK(with_fakes == without);
  // Only real events up to the last refresh hour were replayed.
  GraphState replayed = base;
  const auto times = trace.timestamps();
  const auto last_hour_start = static_cast<std::size_t>(
      std::lower_bound(times.begin(), times.end(),
                       static_cast<double>(hour_of(times.back())) * kSecondsPerHour) -
      times.begin());
  model.replay(replayed, trace, begin, last_hour_start, cfg.replay_batch_size);
  CHECK(without == replayed);
  CHECK(a.front().hit_sequence.size() == trace.size() - begin);
  CHECK(b.front().hit_sequence.size() == trace.size() - begin);
}

TEST_CASE("static cache and result formatting") {
  StaticCache s(2);
  s.assign({4, 1});
  CHECK(s.contains(1));
  CHECK_FALSE(s.request(3));
  CHECK_THROWS_AS(s.assign({1, 2, 3}), InvalidArgument);
  PolicyRun r;
  r.policy = "lru";
  r.cache_size = 2;
  r.hours = {{0, 4, 1}, {1, 2, 2}};
  CHECK(r.average_hit_rate() == doctest::Approx(0.625));
  const PolicyRun runs[] = {r};
  std::ostringstream out;
  write_hit_rate_csv(out, runs);
  const std::string csv = out.str();
  CHECK(csv.rfind("hour,policy,cache_size,hit_rate\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
