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

#include "aoicache/cache_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "aoicache/errors.hpp"
#include "aoicache/synthetic.hpp"

namespace aoicache {

std::string_view to_string(CandidateScope s) {
  switch (s) {
    case CandidateScope::kAllItems: return "all-items";
    case CandidateScope::kRecent1h: return "recent-1h";
    case CandidateScope::kRecent2h: return "recent-2h";
  }
  return "?";
}

CandidateScope parse_candidate_scope(std::string_view s) {
  for (CandidateScope c :
       {CandidateScope::kAllItems, CandidateScope::kRecent1h, CandidateScope::kRecent2h}) {
    if (s == to_string(c)) return c;
  }
  throw InvalidArgument("unknown candidate scope '" + std::string(s) +
                        "' (allowed: all-items, recent-1h, recent-2h)");
}

void PredictionWindowConfig::validate() const {
  if (!(step_seconds > 0.0)) throw InvalidArgument("prediction step must be positive");
  if (memory_update_hours == 0) throw InvalidArgument("memory update period must be at least 1 hour");
  if (static_cast<double>(memory_update_hours) * kSecondsPerHour < step_seconds) {
    throw InvalidArgument("memory update period must be at least one prediction step");
  }
  if (!(request_threshold >= 0.0 && request_threshold <= 1.0)) {
    throw InvalidArgument("request threshold must lie in [0, 1]");
  }
  if (replay_batch_size == 0) throw InvalidArgument("replay batch size must be at least 1");
}

nlohmann::ordered_json PredictionWindowConfig::to_json() const {
  nlohmann::ordered_json j;
  j["step_seconds"] = step_seconds;
  j["request_threshold"] = request_threshold;
  j["memory_update_hours"] = memory_update_hours;
  j["candidate_scope"] = std::string(to_string(scope));
  j["fake_updates"] = fake_updates;
  j["replay_batch_size"] = replay_batch_size;
  return j;
}

std::vector<std::vector<std::size_t>> predict_request_counts(
    PairScorer& scorer, std::span<const std::uint32_t> users, std::span<const std::uint32_t> items,
    double start, double step_seconds, std::span<const double> thresholds, double window_seconds) {
  if (users.empty() || items.empty()) throw InvalidArgument("predict_requests: no candidates");
  if (!(step_seconds > 0.0)) throw InvalidArgument("predict_requests: step must be positive");
  if (thresholds.empty()) throw InvalidArgument("predict_requests: no thresholds");
  if (thresholds.size() > 1 && scorer.uses_fake_requests()) {
    throw InvalidArgument("predict_requests: fake requests need a single threshold");
  }
  std::vector<std::vector<std::size_t>> counts(thresholds.size(),
                                               std::vector<std::size_t>(items.size(), 0));
  scorer.begin_window(start);
  std::vector<UserItem> fakes;
  for (std::size_t k = 0;; ++k) {
    const double offset = static_cast<double>(k) * step_seconds;
    if (offset >= window_seconds) break;
    const double tp = start + offset;
    const std::vector<double> p = scorer.score(users, items, tp);
    if (p.size() != users.size() * items.size()) {
      throw ShapeError("predict_requests: scorer returned " + std::to_string(p.size()) +
                       " scores for " + std::to_string(users.size() * items.size()) + " pairs");
    }
    fakes.clear();
    for (std::size_t u = 0; u < users.size(); ++u) {
      for (std::size_t i = 0; i < items.size(); ++i) {
        const double v = p[u * items.size() + i];
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
          if (v > thresholds[t]) ++counts[t][i];
        }
        if (v > thresholds[0]) fakes.emplace_back(users[u], items[i]);
      }
    }
    if (!fakes.empty()) scorer.record_fake_requests(fakes, tp);
  }
  return counts;
}

std::vector<std::size_t> predict_requests(PairScorer& scorer, std::span<const std::uint32_t> users,
                                          std::span<const std::uint32_t> items, double start,
                                          double step_seconds, double threshold,
                                          double window_seconds) {
  const double thresholds[] = {threshold};
  return std::move(predict_request_counts(scorer, users, items, start, step_seconds, thresholds,
                                          window_seconds)
                       .front());
}

std::vector<std::uint32_t> select_top_c(std::span<const std::size_t> counts,
                                        std::span<const std::uint32_t> items, std::size_t capacity) {
  if (counts.size() != items.size()) {
    throw InvalidArgument("select_top_c: counts and items differ in length");
  }
  std::vector<std::size_t> idx(items.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return counts[a] != counts[b] ? counts[a] > counts[b] : items[a] < items[b];
  });
  idx.resize(std::min(capacity, idx.size()));
  std::vector<std::uint32_t> out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = items[idx[k]];
  std::sort(out.begin(), out.end());
  return out;
}

double hit_rate(std::span<const std::uint32_t> requests, std::span<const std::uint32_t> cached) {
  if (requests.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::uint32_t r : requests) {
    if (std::find(cached.begin(), cached.end(), r) != cached.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(requests.size());
}

double PolicyRun::average_hit_rate() const {
  if (hours.empty()) return 0.0;
  double total = 0.0;
  for (const auto& h : hours) total += h.hit_rate();
  return total / static_cast<double>(hours.size());
}

std::int64_t hour_of(double timestamp) {
  return static_cast<std::int64_t>(std::floor(timestamp / kSecondsPerHour));
}

namespace {

void check_range(const Trace& trace, std::size_t begin, std::size_t end) {
  if (begin > end || end > trace.size()) throw InvalidArgument("simulation range out of bounds");
}

void record(PolicyRun& run, std::int64_t hour, bool hit) {
  if (run.hours.empty() || run.hours.back().hour != hour) run.hours.push_back({hour, 0, 0});
  ++run.hours.back().requests;
  if (hit) ++run.hours.back().hits;
  run.hit_sequence.push_back(hit);
}

}  // namespace

PolicyRun run_baseline(CachePolicy& policy, const Trace& trace, std::size_t warm_begin,
                       std::size_t begin, std::size_t end) {
  check_range(trace, begin, end);
  if (warm_begin > begin) throw InvalidArgument("warm-up must precede the segment");
  for (std::size_t e = warm_begin; e < begin; ++e) policy.request(trace.items()[e]);
  PolicyRun run;
  run.policy = policy.name();
  run.cache_size = policy.capacity();
  for (std::size_t e = begin; e < end; ++e) {
    record(run, hour_of(trace.timestamps()[e]), policy.request(trace.items()[e]));
  }
  return run;
}

std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> candidates_for(
    const Trace& trace, std::size_t stop, double reference_time, CandidateScope scope) {
  if (stop > trace.size()) throw InvalidArgument("candidates_for: stop out of bounds");
  const auto times = trace.timestamps();
  std::size_t from = 0;
  if (scope != CandidateScope::kAllItems) {
    const double span = scope == CandidateScope::kRecent1h ? kSecondsPerHour : 2 * kSecondsPerHour;
    from = static_cast<std::size_t>(
        std::lower_bound(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(stop),
                         reference_time - span) -
        times.begin());
  }
  std::vector<std::uint32_t> users(trace.users().begin() + static_cast<std::ptrdiff_t>(from),
                                   trace.users().begin() + static_cast<std::ptrdiff_t>(stop));
  std::vector<std::uint32_t> items;
  if (scope == CandidateScope::kAllItems) {
    items.resize(trace.num_items());
    std::iota(items.begin(), items.end(), 0u);
  } else {
    items.assign(trace.items().begin() + static_cast<std::ptrdiff_t>(from),
                 trace.items().begin() + static_cast<std::ptrdiff_t>(stop));
  }
  for (auto* v : {&users, &items}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  return {std::move(users), std::move(items)};
}

std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> candidates_for(
    const Trace& trace, double hour_start, CandidateScope scope) {
  const auto times = trace.timestamps();
  const auto stop = static_cast<std::size_t>(
      std::lower_bound(times.begin(), times.end(), hour_start) - times.begin());
  return candidates_for(trace, stop, hour_start, scope);
}

namespace {

// runs[t][c] for thresholds[t] and cache_sizes[c].
std::vector<std::vector<PolicyRun>> predictive_sweep(PairScorer& scorer, const Trace& trace,
                                                     std::size_t begin, std::size_t end,
                                                     std::span<const std::size_t> cache_sizes,
                                                     const PredictionWindowConfig& config,
                                                     std::span<const double> thresholds,
                                                     const RefreshFn& refresh,
                                                     const std::string& name) {
  config.validate();
  check_range(trace, begin, end);
  const std::size_t nt = thresholds.size();
  std::vector<std::vector<PolicyRun>> runs(nt, std::vector<PolicyRun>(cache_sizes.size()));
  for (auto& row : runs) {
    for (std::size_t c = 0; c < cache_sizes.size(); ++c) {
      row[c].policy = name;
      row[c].cache_size = cache_sizes[c];
    }
  }
  if (begin == end) return runs;
  const auto times = trace.timestamps();
  const auto items = trace.items();
  std::vector<std::vector<std::vector<std::uint32_t>>> cached(
      nt, std::vector<std::vector<std::uint32_t>>(cache_sizes.size()));
  const std::int64_t first = hour_of(times[begin]);
  const std::int64_t last = hour_of(times[end - 1]);
  std::size_t idx = begin;
  for (std::int64_t h = first; h <= last; ++h) {
    const double hour_start = static_cast<double>(h) * kSecondsPerHour;
    if (h > first && (h - first) % static_cast<std::int64_t>(config.memory_update_hours) == 0 &&
        refresh) {
      refresh(idx);
    }
    // A segment that starts mid-hour already knows the events before `begin`.
    const double window_start =
        (h == first && begin > 0) ? std::max(hour_start, times[begin - 1]) : hour_start;
    auto [users, cand_items] = candidates_for(trace, idx, window_start, config.scope);
    if (!users.empty() && !cand_items.empty()) {
      const auto counts = predict_request_counts(scorer, users, cand_items, window_start,
                                                 config.step_seconds, thresholds,
                                                 hour_start + kSecondsPerHour - window_start);
      for (std::size_t t = 0; t < nt; ++t) {
        for (std::size_t c = 0; c < cache_sizes.size(); ++c) {
          cached[t][c] = select_top_c(counts[t], cand_items, cache_sizes[c]);
        }
      }
    }
    std::size_t j = idx;
    while (j < end && hour_of(times[j]) == h) ++j;
    for (std::size_t t = 0; t < nt; ++t) {
      for (std::size_t c = 0; c < cache_sizes.size(); ++c) {
        const auto& set = cached[t][c];
        for (std::size_t e = idx; e < j; ++e) {
          record(runs[t][c], h, std::binary_search(set.begin(), set.end(), items[e]));
        }
      }
    }
    idx = j;
  }
  return runs;
}

}  // namespace

std::vector<PolicyRun> run_predictive_policy(PairScorer& scorer, const Trace& trace,
                                             std::size_t begin, std::size_t end,
                                             std::span<const std::size_t> cache_sizes,
                                             const PredictionWindowConfig& config,
                                             const RefreshFn& refresh, const std::string& name) {
  const double thresholds[] = {config.request_threshold};
  return std::move(
      predictive_sweep(scorer, trace, begin, end, cache_sizes, config, thresholds, refresh, name)
          .front());
}

ThresholdCalibration calibrate_request_threshold(PairScorer& scorer, const Trace& trace,
                                                 std::size_t begin, std::size_t end,
                                                 std::size_t cache_size,
                                                 const PredictionWindowConfig& config,
                                                 std::span<const double> grid,
                                                 const RefreshFn& refresh) {
  if (grid.empty()) throw InvalidArgument("calibrate_request_threshold: empty grid");
  if (config.fake_updates) {
    throw InvalidArgument("calibrate_request_threshold: fake updates are not supported");
  }
  for (double g : grid) {
    if (!(g >= 0.0 && g < 1.0)) throw InvalidArgument("calibrate_request_threshold: grid value outside [0, 1)");
  }
  const std::size_t sizes[] = {cache_size};
  const auto runs =
      predictive_sweep(scorer, trace, begin, end, sizes, config, grid, refresh, "calibration");
  ThresholdCalibration out;
  out.best_threshold = grid.front();
  double best = -1.0;
  for (std::size_t t = 0; t < grid.size(); ++t) {
    const double rate = runs[t].front().average_hit_rate();
    out.grid.emplace_back(grid[t], rate);
    if (rate > best) {
      best = rate;
      out.best_threshold = grid[t];
    }
  }
  out.best_hit_rate = best;
  return out;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int k = 30; k <= 80; ++k) grid.push_back(k / 100.0);
  return grid;
}

ModelScorer::ModelScorer(const Model& model, const GraphState& state, bool fake_updates)
    : model_(model), state_(state), fake_updates_(fake_updates) {}

bool ModelScorer::uses_fake_requests() const { return fake_updates_; }

void ModelScorer::begin_window(double start) {
  window_start_ = start;
  reference_time_ = start;
  cached_memory_.reset();
  cached_nodes_.clear();
  if (fake_updates_) {
    scratch_ = state_;
  } else {
    scratch_.reset();
  }
}

std::vector<double> ModelScorer::score(std::span<const std::uint32_t> users,
                                       std::span<const std::uint32_t> items, double t) {
  ad::NoGradGuard no_grad;
  const GraphState& st = current();
  std::vector<NodeId> query(users.size() + items.size());
  for (std::size_t u = 0; u < users.size(); ++u) query[u] = st.user_node(users[u]);
  for (std::size_t i = 0; i < items.size(); ++i) query[users.size() + i] = st.item_node(items[i]);
  std::vector<NodeId> nodes = query;
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  if (!cached_memory_ || nodes != cached_nodes_) {
    cached_memory_ = model_.updated_memory(st, nodes, reference_time_);
    cached_nodes_ = nodes;
  }
  const std::vector<double> times(query.size(), t);
  const Tensor emb = model_.embed(st, *cached_memory_, query, times).value();
  const std::size_t e = emb.cols();
  const auto data = emb.data();
  Tensor user_emb({users.size(), e},
                  std::vector<double>(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(users.size() * e)));
  Tensor item_emb({items.size(), e},
                  std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(users.size() * e), data.end()));
  return model_.predictor().score_matrix(user_emb, item_emb);
}

void ModelScorer::record_fake_requests(std::span<const UserItem> pairs, double t) {
  if (!fake_updates_ || !scratch_) return;
  const std::vector<double> zeros(scratch_->dims().edge_dim, 0.0);
  for (const auto& [u, i] : pairs) scratch_->insert_event(u, i, t, zeros);
  reference_time_ = t;
  cached_memory_.reset();
}

std::vector<PolicyRun> run_model_policy(const Model& model, GraphState& state, const Trace& trace,
                                        std::size_t begin, std::size_t end,
                                        std::span<const std::size_t> cache_sizes,
                                        const PredictionWindowConfig& config) {
  ModelScorer scorer(model, state, config.fake_updates);
  std::size_t replayed = begin;
  RefreshFn refresh = [&](std::size_t upto) {
    model.replay(state, trace, replayed, upto, config.replay_batch_size);
    replayed = upto;
  };
  return run_predictive_policy(scorer, trace, begin, end, cache_sizes, config, refresh,
                               std::string("model-") +
                                   std::string(to_string(model.config().aggregator)));
}

ThresholdCalibration calibrate_model_threshold(const Model& model, GraphState& state,
                                               const Trace& trace, std::size_t begin,
                                               std::size_t end, std::size_t cache_size,
                                               const PredictionWindowConfig& config,
                                               std::span<const double> grid) {
  ModelScorer scorer(model, state, false);
  std::size_t replayed = begin;
  RefreshFn refresh = [&](std::size_t upto) {
    model.replay(state, trace, replayed, upto, config.replay_batch_size);
    replayed = upto;
  };
  return calibrate_request_threshold(scorer, trace, begin, end, cache_size, config, grid, refresh);
}

void write_hit_rate_csv(std::ostream& out, std::span<const PolicyRun> runs) {
  out << "hour,policy,cache_size,hit_rate\n";
  const auto old_precision = out.precision(17);
  std::vector<const PolicyRun*> order;
  for (const auto& r : runs) order.push_back(&r);
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();
  for (const auto& r : runs) {
    for (const auto& h : r.hours) {
      lo = std::min(lo, h.hour);
      hi = std::max(hi, h.hour);
    }
  }
  for (std::int64_t hour = lo; hour <= hi && lo <= hi; ++hour) {
    for (const PolicyRun* r : order) {
      for (const auto& h : r->hours) {
        if (h.hour == hour) {
          out << h.hour << ',' << r->policy << ',' << r->cache_size << ',' << h.hit_rate() << '\n';
        }
      }
    }
  }
  out.precision(old_precision);
}

nlohmann::ordered_json hit_rate_summary(std::span<const PolicyRun> runs) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : runs) {
    std::size_t requests = 0;
    std::size_t hits = 0;
    for (const auto& h : r.hours) {
      requests += h.requests;
      hits += h.hits;
    }
    nlohmann::ordered_json j;
    j["policy"] = r.policy;
    j["cache_size"] = r.cache_size;
    j["average_hit_rate"] = r.average_hit_rate();
    j["hours"] = r.hours.size();
    j["requests"] = requests;
    j["hits"] = hits;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace aoicache
