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


#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aoicache/cache_policy.hpp"
#include "aoicache/cache_sim.hpp"
#include "aoicache/errors.hpp"
#include "aoicache/graph_state.hpp"
#include "aoicache/model.hpp"
#include "aoicache/parameters.hpp"
#include "aoicache/synthetic.hpp"
#include "aoicache/trace.hpp"
#include "aoicache/trainer.hpp"

namespace aoicache::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

/// Problems the caller can fix: missing inputs, bad option values.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write '" + tmp.string() + "'");
    f << content;
    f.flush();
    if (!f) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw UsageError(what + " not found: '" + path.string() + "'");
}

fs::path prepare_out_dir(const std::string& dir, const std::string& config) {
  if (dir.empty()) throw UsageError("--out-dir must not be empty");
  const fs::path out(dir);
  fs::create_directories(out);
  write_atomic(out / "config.toml", config);
  return out;
}

// --- shared option groups ---------------------------------------------------

struct TraceOptions {
  std::string source = "synthetic";
  std::string header = "auto";
  std::size_t min_edge_features = 0;
  std::size_t max_events = 0;
  SyntheticConfig synth;
  std::size_t drift_period = 4;
};

void add_synthetic_options(CLI::App* app, SyntheticConfig& s, std::size_t& drift_period) {
  app->add_option("--synth-users", s.users, "synthetic trace: number of users")->capture_default_str();
  app->add_option("--synth-items", s.items, "synthetic trace: number of items")->capture_default_str();
  app->add_option("--synth-hours", s.hours, "synthetic trace: length in hours")->capture_default_str();
  app->add_option("--synth-events-per-hour", s.events_per_hour, "synthetic trace: requests per hour")
      ->capture_default_str();
  app->add_option("--synth-zipf", s.zipf_exponent, "synthetic trace: Zipf exponent")->capture_default_str();
  app->add_option("--synth-clusters", s.clusters, "synthetic trace: user/item clusters")
      ->capture_default_str();
  app->add_option("--synth-noise", s.feature_noise, "synthetic trace: edge feature noise")
      ->capture_default_str();
  app->add_option("--synth-drift-period", drift_period,
                  "synthetic trace: hours between popularity permutations (0 = none)")
      ->capture_default_str();
}

void add_trace_options(CLI::App* app, TraceOptions& o) {
  app->add_option("--trace", o.source, "trace CSV path, or 'synthetic'")->capture_default_str();
  app->add_option("--header", o.header, "CSV header line: auto, present or absent")->capture_default_str();
  app->add_option("--min-edge-features", o.min_edge_features, "minimum edge feature columns per row")
      ->capture_default_str();
  app->add_option("--max-events", o.max_events, "use only the first N events (0 = all)")
      ->capture_default_str();
  add_synthetic_options(app, o.synth, o.drift_period);
}

HeaderMode parse_header(const std::string& s) {
  if (s == "auto") return HeaderMode::kAuto;
  if (s == "present") return HeaderMode::kPresent;
  if (s == "absent") return HeaderMode::kAbsent;
  throw UsageError("unknown header mode '" + s + "' (allowed: auto, present, absent)");
}

SyntheticConfig synthetic_config(const SyntheticConfig& base, std::size_t drift_period,
                                 std::uint64_t seed) {
  SyntheticConfig s = base;
  s.seed = seed;
  s.set_drift_period(drift_period);
  s.validate();
  return s;
}

Trace load_trace(const TraceOptions& o, std::uint64_t seed) {
  Trace trace;
  if (o.source == "synthetic") {
    trace = generate_synthetic_trace(synthetic_config(o.synth, o.drift_period, seed));
  } else {
    require_file(o.source, "trace");
    trace = ingest_csv(fs::path(o.source), CsvSchema{parse_header(o.header), o.min_edge_features}).trace;
  }
  if (o.max_events > 0 && o.max_events < trace.size()) trace = trace.slice(0, o.max_events);
  return trace;
}

SplitFractions fractions(const std::vector<double>& v) {
  if (v.size() != 3) throw UsageError("--split needs three fractions");
  return {v[0], v[1], v[2]};
}

ordered_json split_json(const TraceSplit& split, std::size_t total) {
  ordered_json j;
  j["train_events"] = split.train_end;
  j["validation_events"] = split.validation_end - split.train_end;
  j["test_events"] = total - split.validation_end;
  j["new_nodes"] = split.new_nodes.size();
  return j;
}

struct ModelOptions {
  ModelConfig config;
  std::string aggregator = "aoi-attention";
  std::string orientation = "stale-drops";
  std::string activation = "identity";
};

void add_model_options(CLI::App* app, ModelOptions& o) {
  ModelConfig& c = o.config;
  app->add_option("--aggregator", o.aggregator, "latest, mean, attention or aoi-attention")
      ->capture_default_str();
  app->add_option("--mask-orientation", o.orientation, "soft mask side: stale-drops or as-written")
      ->capture_default_str();
  app->add_option("--head-activation", o.activation, "attention head activation: identity or sigmoid")
      ->capture_default_str();
  app->add_option("--node-feature-dim", c.node_feature_dim, "zero node feature width")->capture_default_str();
  app->add_option("--time-dim", c.time_dim, "time encoding width")->capture_default_str();
  app->add_option("--memory-dim", c.memory_dim, "node memory width")->capture_default_str();
  app->add_option("--neighbors", c.neighbors, "messages per node and GAT fan-in")->capture_default_str();
  app->add_option("--attention-heads", c.attention_heads, "aggregator heads")->capture_default_str();
  app->add_option("--attention-head-dim", c.attention_head_dim, "aggregator head width")
      ->capture_default_str();
  app->add_option("--ffn-hidden", c.ffn_hidden, "aggregator FFN hidden width")->capture_default_str();
  app->add_option("--threshold-hidden", c.threshold_hidden, "age threshold MLP hidden width")
      ->capture_default_str();
  app->add_option("--gat-heads", c.gat_heads, "GAT heads")->capture_default_str();
  app->add_option("--gat-head-dim", c.gat_head_dim, "GAT head width")->capture_default_str();
  app->add_option("--gat-hidden", c.gat_hidden, "GAT FFN hidden width")->capture_default_str();
  app->add_option("--embedding-dim", c.embedding_dim, "node embedding width")->capture_default_str();
  app->add_option("--predictor-hidden", c.predictor_hidden, "predictor MLP hidden width")
      ->capture_default_str();
}

ModelConfig model_config(const ModelOptions& o, const Trace& trace, const TraceSplit& split,
                         std::uint64_t seed) {
  ModelConfig c = o.config;
  c.aggregator = parse_aggregator(o.aggregator);
  c.orientation = parse_mask_orientation(o.orientation);
  c.head_activation = parse_head_activation(o.activation);
  c.edge_dim = trace.edge_dim();
  const auto times = trace.timestamps();
  c.max_timespan = split.train_end > 0 ? times[split.train_end - 1] - times[0] : 1.0;
  c.seed = seed;
  c.validate();
  return c;
}


Model load_model(const fs::path& run_dir) {
  require_file(run_dir / "model_config.json", "model config");
  require_file(run_dir / "checkpoint.json", "checkpoint");
  const ModelConfig config =
      ModelConfig::from_json(nlohmann::json::parse(read_file(run_dir / "model_config.json")));
  Model model(config);
  load_checkpoint(run_dir / "checkpoint.json", model.parameters());
  return model;
}

GraphState load_state(const fs::path& path, const Trace& trace, const Model& model) {
  require_file(path, "state snapshot");
  GraphState state = GraphState::load(path);
  if (!(state.dims() == model.graph_dims(trace.num_users(), trace.num_items()))) {
    throw UsageError("state snapshot '" + path.string() +
                     "' does not match the trace and model (different dataset or options?)");
  }
  return state;
}

std::string graph_state_bytes(const GraphState& state) {
  std::ostringstream s(std::ios::binary);
  state.save(s);
  return s.str();
}

// Resolved options of one subcommand as a TOML section. Unset list options
// get their defaults as results first so they print as arrays, which makes the
// snapshot a fixed point under re-runs.
std::string config_snapshot(CLI::App* sub) {
  for (CLI::Option* opt : sub->get_options()) {
    if (opt->count() != 0 || !opt->get_configurable() || opt->get_expected_max() <= 1) continue;
    std::string d = opt->get_default_str();
    if (d.size() >= 2 && d.front() == '[' && d.back() == ']') d = d.substr(1, d.size() - 2);
    if (!d.empty()) opt->add_result(CLI::detail::split(d, ','));
  }
  return "[" + sub->get_name() + "]\n" + sub->config_to_str(true, false);
}

// --- subcommands ------------------------------------------------------------

struct IngestArgs {
  std::string path;
  std::string header = "auto";
  std::size_t min_edge_features = 0;
  std::string out_dir;
};

void cmd_ingest(const IngestArgs& a, const std::string& config, std::ostream& out) {
  require_file(a.path, "trace");
  const IngestResult r =
      ingest_csv(fs::path(a.path), CsvSchema{parse_header(a.header), a.min_edge_features});
  const std::string summary = r.summary.to_json() + "\n";
  out << summary;
  if (!a.out_dir.empty()) {
    const fs::path dir = prepare_out_dir(a.out_dir, config);
    write_atomic(dir / "summary.json", summary);
  }
}

struct SynthArgs {
  SyntheticConfig synth;
  std::size_t drift_period = 4;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
};

void cmd_synth(const SynthArgs& a, const std::string& config, std::ostream& out) {
  const SyntheticConfig s = synthetic_config(a.synth, a.drift_period, a.seed);
  const Trace trace = generate_synthetic_trace(s);
  const fs::path dir = prepare_out_dir(a.out_dir, config);
  std::ostringstream csv;
  write_csv(csv, trace);
  write_atomic(dir / "trace.csv", csv.str());
  ordered_json j;
  j["generator"] = s.to_json();
  j["dataset"] = ordered_json::parse(summarize(trace).to_json());
  write_atomic(dir / "summary.json", dump(j));
  out << "wrote " << trace.size() << " events to " << (dir / "trace.csv").string() << '\n';
}

struct TrainArgs {
  TraceOptions trace;
  std::vector<double> split{0.7, 0.15, 0.15};
  ModelOptions model;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
};

void cmd_train(const TrainArgs& a, const std::string& config, std::ostream& out, std::ostream& log) {
  const Trace trace = load_trace(a.trace, a.seed);
  const TraceSplit split = chronological_split(trace, fractions(a.split));
  const ModelConfig mc = model_config(a.model, trace, split, a.seed);
  TrainConfig tc = a.train;
  tc.seed = a.seed;
  tc.validate();
  const fs::path dir = prepare_out_dir(a.out_dir, config);

  TrainResult r = train(mc, tc, trace, split, &log);
  write_atomic(dir / "checkpoint.json", checkpoint_to_string(r.model.parameters()));
  write_atomic(dir / "model_config.json", dump(mc.to_json()));
  write_atomic(dir / "state_train.bin", graph_state_bytes(r.train_state));
  write_atomic(dir / "state_validation.bin", graph_state_bytes(r.validation_state));
  ordered_json j;
  j["dataset"] = ordered_json::parse(summarize(trace).to_json());
  j["split"] = split_json(split, trace.size());
  j["report"] = r.report.to_json();
  write_atomic(dir / "metrics.json", dump(j));
  std::ostringstream loss;
  r.report.write_loss_csv(loss);
  write_atomic(dir / "loss.csv", loss.str());
  out << r.report.variant << ": best epoch " << r.report.best_epoch << ", outputs in "
      << dir.string() << '\n';
}

struct EvaluateArgs {
  TraceOptions trace;
  std::vector<double> split{0.7, 0.15, 0.15};
  std::string run_dir;
  std::size_t batch_size = 200;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
};

void cmd_evaluate(const EvaluateArgs& a, const std::string& config, std::ostream& out) {
  const fs::path run(a.run_dir);
  const Model model = load_model(run);
  const Trace trace = load_trace(a.trace, a.seed);
  const TraceSplit split = chronological_split(trace, fractions(a.split));
  GraphState state = load_state(run / "state_validation.bin", trace, model);
  if (a.batch_size == 0) throw UsageError("--batch-size must be at least 1");
  const fs::path dir = prepare_out_dir(a.out_dir, config);
  std::vector<std::string> warnings;
  const SplitMetrics test =
      evaluate_test(model, std::move(state), trace, split, a.batch_size, a.seed, &warnings);
  ordered_json j;
  j["variant"] = std::string(variant_label(model.config().aggregator));
  j["split"] = split_json(split, trace.size());
  j["test"] = to_json(test);
  j["warnings"] = warnings;
  write_atomic(dir / "evaluation.json", dump(j));
  out << dump(j);
}

struct SimulateArgs {
  TraceOptions trace;
  std::vector<double> split{0.7, 0.15, 0.15};
  std::string segment = "test";
  std::vector<std::string> policies{"lru", "lfu"};
  std::vector<std::size_t> cache_sizes{15};
  std::string run_dir;
  PredictionWindowConfig window;
  std::string scope = "recent-1h";
  bool calibrate = false;
  std::size_t calibration_cache_size = 15;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
};

void cmd_simulate(const SimulateArgs& a, const std::string& config, std::ostream& out) {
  for (const auto& p : a.policies) {
    if (p != "lru" && p != "lfu" && p != "model") {
      throw UsageError("unknown policy '" + p + "' (allowed: lru, lfu, model)");
    }
  }
  if (a.cache_sizes.empty()) throw UsageError("--cache-size needs at least one value");
  if (a.segment != "test" && a.segment != "all") {
    throw UsageError("unknown segment '" + a.segment + "' (allowed: test, all)");
  }
  const bool with_model =
      std::find(a.policies.begin(), a.policies.end(), "model") != a.policies.end();
  if (with_model && a.segment != "test") {
    throw UsageError("the model policy runs on the test segment only");
  }
  PredictionWindowConfig window = a.window;
  window.scope = parse_candidate_scope(a.scope);
  window.validate();

  const Trace trace = load_trace(a.trace, a.seed);
  const TraceSplit split = chronological_split(trace, fractions(a.split));
  const std::size_t begin = a.segment == "test" ? split.validation_end : 0;
  const std::size_t end = trace.size();

  std::optional<Model> model;
  std::optional<GraphState> state;
  if (with_model) {
    if (a.run_dir.empty()) throw UsageError("the model policy needs --run-dir");
    model.emplace(load_model(a.run_dir));
    state.emplace(load_state(fs::path(a.run_dir) / "state_validation.bin", trace, *model));
  }
  const fs::path dir = prepare_out_dir(a.out_dir, config);

  std::vector<PolicyRun> runs;
  ordered_json calibration = nullptr;
  for (const auto& p : a.policies) {
    if (p == "model") {
      if (a.calibrate) {
        GraphState train_state =
            load_state(fs::path(a.run_dir) / "state_train.bin", trace, *model);
        const auto grid = default_threshold_grid();
        const ThresholdCalibration cal =
            calibrate_model_threshold(*model, train_state, trace, split.train_end,
                                      split.validation_end, a.calibration_cache_size, window, grid);
        window.request_threshold = cal.best_threshold;
        calibration = ordered_json::object();
        calibration["cache_size"] = a.calibration_cache_size;
        calibration["request_threshold"] = cal.best_threshold;
        calibration["validation_hit_rate"] = cal.best_hit_rate;
      }
      auto model_runs = run_model_policy(*model, *state, trace, begin, end, a.cache_sizes, window);
      runs.insert(runs.end(), model_runs.begin(), model_runs.end());
      continue;
    }
    for (std::size_t c : a.cache_sizes) {
      if (p == "lru") {
        LruCache cache(c);
        runs.push_back(run_baseline(cache, trace, begin, begin, end));
      } else {
        LfuCache cache(c);
        runs.push_back(run_baseline(cache, trace, begin, begin, end));
      }
    }
  }

  std::ostringstream csv;
  write_hit_rate_csv(csv, runs);
  write_atomic(dir / "hit_rates.csv", csv.str());
  ordered_json j;
  j["segment"] = {{"name", a.segment}, {"first_event", begin}, {"end_event", end}};
  if (with_model) j["prediction"] = window.to_json();
  j["calibration"] = calibration;
  j["policies"] = hit_rate_summary(runs);
  write_atomic(dir / "summary.json", dump(j));
  for (const auto& r : runs) {
    out << r.policy << " C=" << r.cache_size << " average hit rate " << r.average_hit_rate() << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Edge caching driven by temporal graph popularity prediction", "aoicache"};
  app.set_config("--config", "", "TOML or INI config; command-line flags override file values");
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "parse a trace CSV and print its summary");
  ingest_cmd->add_option("path", ingest.path, "trace CSV")->required();
  ingest_cmd->add_option("--header", ingest.header, "header line: auto, present or absent")
      ->capture_default_str();
  ingest_cmd->add_option("--min-edge-features", ingest.min_edge_features,
                         "minimum edge feature columns per row")
      ->capture_default_str();
  ingest_cmd->add_option("--out-dir", ingest.out_dir, "also write summary.json here")
      ->configurable(false);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth-trace", "generate a synthetic Zipf request trace");
  add_synthetic_options(synth_cmd, synth.synth, synth.drift_period);
  synth_cmd->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  synth_cmd->add_option("--out-dir", synth.out_dir, "output directory")
      ->capture_default_str()
      ->configurable(false);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train a popularity model");
  add_trace_options(train_cmd, tr.trace);
  train_cmd->add_option("--split", tr.split, "train,validation,test fractions")
      ->delimiter(',')
      ->expected(3)
      ->capture_default_str();
  add_model_options(train_cmd, tr.model);
  train_cmd->add_option("--batch-size", tr.train.batch_size, "events per batch")->capture_default_str();
  train_cmd->add_option("--lr", tr.train.learning_rate, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", tr.train.epochs, "maximum epochs")->capture_default_str();
  train_cmd->add_option("--patience", tr.train.patience, "early stopping patience")->capture_default_str();
  train_cmd->add_option("--seed", tr.seed, "seed for data generation, init and sampling")
      ->capture_default_str();
  train_cmd->add_option("--out-dir", tr.out_dir, "output directory")
      ->capture_default_str()
      ->configurable(false);

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "score the test segment with a trained run");
  add_trace_options(eval_cmd, ev.trace);
  eval_cmd->add_option("--split", ev.split, "train,validation,test fractions")
      ->delimiter(',')
      ->expected(3)
      ->capture_default_str();
  eval_cmd->add_option("--run-dir", ev.run_dir, "directory written by train")->required();
  eval_cmd->add_option("--batch-size", ev.batch_size, "events per batch")->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed, "seed used for training")->capture_default_str();
  eval_cmd->add_option("--out-dir", ev.out_dir, "output directory")
      ->capture_default_str()
      ->configurable(false);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "run caching policies over a trace");
  add_trace_options(sim_cmd, sim.trace);
  sim_cmd->add_option("--split", sim.split, "train,validation,test fractions")
      ->delimiter(',')
      ->expected(3)
      ->capture_default_str();
  sim_cmd->add_option("--segment", sim.segment, "events to serve: test or all")->capture_default_str();
  sim_cmd->add_option("--policies", sim.policies, "comma list of lru, lfu, model")
      ->delimiter(',')
      ->capture_default_str();
  sim_cmd->add_option("--cache-size", sim.cache_sizes, "comma list of cache sizes")
      ->delimiter(',')
      ->capture_default_str();
  sim_cmd->add_option("--run-dir", sim.run_dir, "directory written by train (model policy)");
  sim_cmd->add_option("--step", sim.window.step_seconds, "prediction step in seconds")
      ->capture_default_str();
  sim_cmd->add_option("--threshold", sim.window.request_threshold, "request probability threshold")
      ->capture_default_str();
  sim_cmd->add_option("--memory-update-hours", sim.window.memory_update_hours,
                      "hours between memory refreshes with real events")
      ->capture_default_str();
  sim_cmd->add_option("--scope", sim.scope, "candidates: recent-1h, recent-2h or all-items")
      ->capture_default_str();
  sim_cmd->add_flag("--fake-updates,!--no-fake-updates", sim.window.fake_updates,
                    "feed predicted requests into a scratch state within each hour")
      ->capture_default_str();
  sim_cmd->add_option("--replay-batch-size", sim.window.replay_batch_size,
                      "batch size for memory refreshes")
      ->capture_default_str();
  sim_cmd->add_flag("--calibrate-threshold,!--no-calibrate-threshold", sim.calibrate,
                    "pick the threshold on the validation segment")
      ->capture_default_str();
  sim_cmd->add_option("--calibration-cache-size", sim.calibration_cache_size,
                      "cache size scored during calibration")
      ->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "seed for synthetic traces and the split")
      ->capture_default_str();
  sim_cmd->add_option("--out-dir", sim.out_dir, "output directory")
      ->capture_default_str()
      ->configurable(false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    const std::string config = config_snapshot(active);
    if (active == ingest_cmd) cmd_ingest(ingest, config, out);
    if (active == synth_cmd) cmd_synth(synth, config, out);
    if (active == train_cmd) cmd_train(tr, config, out, err);
    if (active == eval_cmd) cmd_evaluate(ev, config, out);
    if (active == sim_cmd) cmd_simulate(sim, config, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace aoicache::cli
