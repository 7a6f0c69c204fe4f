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

#include "aoicache/trainer.hpp"

#include <cmath>
#include <ostream>

#include "aoicache/adam.hpp"
#include "aoicache/errors.hpp"
#include "aoicache/metrics.hpp"
#include "aoicache/negatives.hpp"
#include "aoicache/rng.hpp"

namespace aoicache {

namespace {

// derive_seed path tags
constexpr std::uint64_t kTrainNegatives = 2;
constexpr std::uint64_t kValidationNegatives = 3;
constexpr std::uint64_t kTestNegatives = 4;

std::vector<std::uint32_t> negatives_for(const Trace& trace, std::size_t begin, std::size_t end,
                                         std::uint64_t seed) {
  auto samples = sample_negatives(trace.users().subspan(begin, end - begin),
                                  trace.timestamps().subspan(begin, end - begin),
                                  trace.num_items(), seed);
  std::vector<std::uint32_t> items(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) items[k] = samples[k].item;
  return items;
}

TaskMetrics task_metrics(const ScoredEvents& s, bool inductive) {
  TaskMetrics m;
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t e = 0; e < s.positive.size(); ++e) {
    if (s.inductive[e] != inductive) continue;
    ++m.events;
    scores.push_back(s.positive[e]);
    labels.push_back(1);
    scores.push_back(s.negative[e]);
    labels.push_back(0);
  }
  if (m.events > 0) {
    m.auc = auc(scores, labels);
    m.ap = average_precision(scores, labels);
  }
  return m;
}

nlohmann::ordered_json to_json(const TaskMetrics& m) {
  nlohmann::ordered_json j;
  j["auc"] = m.auc ? nlohmann::ordered_json(*m.auc) : nlohmann::ordered_json(nullptr);
  j["ap"] = m.ap ? nlohmann::ordered_json(*m.ap) : nlohmann::ordered_json(nullptr);
  j["events"] = m.events;
  return j;
}

double selection_score(const SplitMetrics& m) {
  if (m.transductive.ap) return *m.transductive.ap;
  if (m.inductive.ap) return *m.inductive.ap;
  return -1.0;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw InvalidArgument("batch size must be at least 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (epochs == 0) throw InvalidArgument("epochs must be at least 1");
}

nlohmann::ordered_json to_json(const SplitMetrics& m) {
  nlohmann::ordered_json j;
  j["transductive"] = to_json(m.transductive);
  j["inductive"] = to_json(m.inductive);
  j["loss"] = m.loss;
  return j;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = variant;
  j["aggregator"] = aggregator;
  j["best_epoch"] = best_epoch;
  j["validation"] = aoicache::to_json(validation);
  j["test"] = test ? aoicache::to_json(*test) : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json ep = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    nlohmann::ordered_json r;
    r["epoch"] = e.epoch;
    r["train_loss"] = e.train_loss;
    r["validation"] = aoicache::to_json(e.validation);
    ep.push_back(std::move(r));
  }
  j["epochs"] = std::move(ep);
  j["clamped_predictions"] = clamped_predictions;
  j["warnings"] = warnings;
  return j;
}

void EvalReport::write_loss_csv(std::ostream& out) const {
  out << "epoch,batch,loss\n";
  const auto old_precision = out.precision(17);
  for (const auto& p : loss_curve) out << p.epoch << ',' << p.batch << ',' << p.loss << '\n';
  out.precision(old_precision);
}

ScoredEvents score_segment(const Model& model, GraphState& state, const Trace& trace,
                           std::size_t begin, std::size_t end, std::size_t batch_size,
                           std::uint64_t seed, const TraceSplit& split) {
  if (batch_size == 0) throw InvalidArgument("batch size must be at least 1");
  ad::NoGradGuard no_grad;
  ScoredEvents out;
  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t b = begin, k = 0; b < end; b += batch_size, ++k) {
    const std::size_t e = std::min(end, b + batch_size);
    const auto negs = negatives_for(trace, b, e, derive_seed(seed, {k}));
    BatchOutput res = model.forward_batch(state, trace, b, e, negs);
    out.positive.insert(out.positive.end(), res.positive_scores.begin(), res.positive_scores.end());
    out.negative.insert(out.negative.end(), res.negative_scores.begin(), res.negative_scores.end());
    for (std::size_t i = b; i < e; ++i) {
      out.inductive.push_back(split.is_new(trace.user_node(trace.users()[i])) ||
                              split.is_new(trace.item_node(trace.items()[i])));
    }
    loss_sum += res.loss.value().item();
    ++batches;
    Model::commit(state, res.memory, res.reference_time, trace, b, e);
  }
  out.mean_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
  return out;
}

SplitMetrics summarize(const ScoredEvents& scored, const std::string& label,
                       std::vector<std::string>* warnings) {
  if (scored.positive.size() != scored.negative.size() ||
      scored.positive.size() != scored.inductive.size()) {
    throw InvalidArgument("summarize: score vectors differ in length");
  }
  SplitMetrics m;
  m.transductive = task_metrics(scored, false);
  m.inductive = task_metrics(scored, true);
  m.loss = scored.mean_loss;
  if (warnings) {
    if (m.transductive.events == 0) warnings->push_back(label + ": transductive subset is empty");
    if (m.inductive.events == 0) warnings->push_back(label + ": inductive subset is empty");
  }
  return m;
}

SplitMetrics evaluate_test(const Model& model, GraphState state, const Trace& trace,
                           const TraceSplit& split, std::size_t batch_size, std::uint64_t seed,
                           std::vector<std::string>* warnings) {
  ScoredEvents s = score_segment(model, state, trace, split.validation_end, trace.size(),
                                 batch_size, derive_seed(seed, {kTestNegatives}), split);
  return summarize(s, "test", warnings);
}

TrainResult train(const ModelConfig& model_config, const TrainConfig& config, const Trace& trace,
                  const TraceSplit& split, std::ostream* log) {
  config.validate();
  if (split.train_end == 0) throw InvalidArgument("training split is empty");
  Model model(model_config);
  EvalReport report;
  report.variant = std::string(variant_label(model_config.aggregator));
  report.aggregator = std::string(to_string(model_config.aggregator));

  AdamState adam;
  adam.learning_rate = config.learning_rate;
  const GraphState::Dims dims = model.graph_dims(trace.num_users(), trace.num_items());

  double best_score = -2.0;
  std::vector<Tensor> best_params = model.parameter_values();
  GraphState best_state(dims);
  GraphState best_train_state(dims);
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    GraphState state(dims);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0, k = 0; b < split.train_end; b += config.batch_size, ++k) {
      const std::size_t e = std::min(split.train_end, b + config.batch_size);
      const auto negs =
          negatives_for(trace, b, e, derive_seed(config.seed, {kTrainNegatives, epoch, k}));
      BatchOutput res = model.forward_batch(state, trace, b, e, negs);
      const double loss = res.loss.value().item();
      if (!std::isfinite(loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(k));
      }
      report.clamped_predictions += res.clamp_count;
      model.parameters().zero_grad();
      ad::backward(res.loss);
      adam_step(model.parameters(), adam);
      Model::commit(state, res.memory, res.reference_time, trace, b, e);
      report.loss_curve.push_back({epoch, k, loss});
      loss_sum += loss;
      ++batches;
    }

    GraphState train_state = state;
    std::vector<std::string> scratch;
    ScoredEvents val = score_segment(model, state, trace, split.train_end, split.validation_end,
                                     config.batch_size,
                                     derive_seed(config.seed, {kValidationNegatives}), split);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.validation = summarize(val, "validation", &scratch);
    report.epochs.push_back(rec);
    if (log) {
      *log << report.variant << " epoch " << epoch << " loss " << rec.train_loss;
      if (rec.validation.transductive.auc) {
        *log << " val-auc " << *rec.validation.transductive.auc << " val-ap "
             << *rec.validation.transductive.ap;
      }
      *log << '\n';
    }

    const double score = selection_score(rec.validation);
    if (score > best_score) {
      best_score = score;
      report.best_epoch = epoch;
      report.validation = rec.validation;
      best_params = model.parameter_values();
      best_state = std::move(state);
      best_train_state = std::move(train_state);
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  model.set_parameter_values(best_params);
  std::vector<std::string> warnings;
  if (report.validation.transductive.events == 0) warnings.push_back("validation: transductive subset is empty");
  if (report.validation.inductive.events == 0) warnings.push_back("validation: inductive subset is empty");
  if (split.validation_end < trace.size()) {
    report.test = evaluate_test(model, best_state, trace, split, config.batch_size, config.seed,
                                &warnings);
  } else {
    warnings.push_back("test: split is empty");
  }
  report.warnings = std::move(warnings);
  return TrainResult{std::move(model), std::move(best_train_state), std::move(best_state),
                     std::move(report)};
}

}  // namespace aoicache
