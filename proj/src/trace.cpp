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

#include "aoicache/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "aoicache/errors.hpp"

namespace aoicache {

void Trace::append(std::uint32_t user, std::uint32_t item, double timestamp,
                   std::span<const double> edge_features) {
  if (edge_features.size() != edge_dim_) {
    throw InvalidArgument("edge feature dimension " + std::to_string(edge_features.size()) +
                          " differs from trace dimension " + std::to_string(edge_dim_));
  }
  if (!(timestamp >= 0.0) || !std::isfinite(timestamp)) {
    throw InvalidArgument("timestamp must be finite and non-negative");
  }
  if (!times_.empty() && timestamp < times_.back()) {
    throw InvalidArgument("events must be appended in non-decreasing timestamp order");
  }
  users_.push_back(user);
  items_.push_back(item);
  times_.push_back(timestamp);
  features_.insert(features_.end(), edge_features.begin(), edge_features.end());
  num_users_ = std::max<std::size_t>(num_users_, user + 1);
  num_items_ = std::max<std::size_t>(num_items_, item + 1);
}

void Trace::reserve_universe(std::size_t users, std::size_t items) {
  num_users_ = std::max(num_users_, users);
  num_items_ = std::max(num_items_, items);
}

InteractionEvent Trace::event(std::size_t i) const {
  return {users_[i], items_[i], times_[i],
          std::span<const double>(features_).subspan(i * edge_dim_, edge_dim_)};
}

Trace Trace::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw InvalidArgument("Trace::slice range out of bounds");
  Trace out(edge_dim_);
  out.users_.assign(users_.begin() + begin, users_.begin() + end);
  out.items_.assign(items_.begin() + begin, items_.begin() + end);
  out.times_.assign(times_.begin() + begin, times_.begin() + end);
  out.features_.assign(features_.begin() + begin * edge_dim_, features_.begin() + end * edge_dim_);
  out.num_users_ = num_users_;
  out.num_items_ = num_items_;
  out.user_labels = user_labels;
  out.item_labels = item_labels;
  return out;
}

void Trace::extend(const Trace& other) {
  if (other.edge_dim_ != edge_dim_) throw InvalidArgument("Trace::extend edge dimension mismatch");
  for (std::size_t i = 0; i < other.size(); ++i) {
    const auto e = other.event(i);
    append(e.user, e.item, e.timestamp, e.edge_features);
  }
  reserve_universe(other.num_users_, other.num_items_);
}

std::string DatasetSummary::to_json() const {
  nlohmann::ordered_json j;
  j["users"] = users;
  j["items"] = items;
  j["interactions"] = interactions;
  j["edge_feature_dim"] = edge_feature_dim;
  j["time_start"] = time_start;
  j["time_end"] = time_end;
  j["time_span"] = time_span();
  j["reordered_rows"] = reordered_rows;
  return j.dump(2);
}

DatasetSummary summarize(const Trace& trace, std::size_t reordered_rows) {
  DatasetSummary s;
  s.users = trace.num_users();
  s.items = trace.num_items();
  s.interactions = trace.size();
  s.edge_feature_dim = trace.edge_dim();
  if (!trace.empty()) {
    s.time_start = trace.timestamps().front();
    s.time_end = trace.timestamps().back();
  }
  s.reordered_rows = reordered_rows;
  return s;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

struct RawRow {
  std::string user;
  std::string item;
  double timestamp;
  std::vector<double> features;
};

}  // namespace

IngestResult ingest_csv(std::istream& in, const CsvSchema& schema) {
  std::vector<RawRow> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t edge_dim = 0;
  bool have_dim = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    auto fields = split_fields(view);
    if (line_no == 1 && schema.header != HeaderMode::kAbsent) {
      double probe = 0.0;
      const bool numeric = fields.size() >= 3 && parse_double(fields[2], probe);
      if (schema.header == HeaderMode::kPresent || !numeric) continue;
    }
    const auto fail = [&](const std::string& what) -> FormatError {
      return FormatError("line " + std::to_string(line_no) + ": " + what);
    };
    if (fields.size() < 4) throw fail("expected at least 4 columns, got " + std::to_string(fields.size()));
    RawRow row;
    row.user = std::string(fields[0]);
    row.item = std::string(fields[1]);
    if (row.user.empty() || row.item.empty()) throw fail("empty user or item id");
    if (!parse_double(fields[2], row.timestamp) || row.timestamp < 0.0) {
      throw fail("bad timestamp '" + std::string(fields[2]) + "'");
    }
    double label = 0.0;
    if (!parse_double(fields[3], label)) throw fail("bad state label '" + std::string(fields[3]) + "'");
    for (std::size_t f = 4; f < fields.size(); ++f) {
      double v = 0.0;
      if (!parse_double(fields[f], v)) {
        throw fail("bad feature value '" + std::string(fields[f]) + "' in column " + std::to_string(f + 1));
      }
      row.features.push_back(v);
    }
    if (!have_dim) {
      edge_dim = row.features.size();
      have_dim = true;
      if (edge_dim < schema.min_edge_features) {
        throw fail("expected at least " + std::to_string(schema.min_edge_features) + " edge features");
      }
    } else if (row.features.size() != edge_dim) {
      throw fail("edge feature count " + std::to_string(row.features.size()) + " differs from " +
                 std::to_string(edge_dim));
    }
    rows.push_back(std::move(row));
  }

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows[a].timestamp < rows[b].timestamp;
  });
  std::size_t reordered = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] != i) ++reordered;
  }

  IngestResult result{Trace(edge_dim), {}};
  std::unordered_map<std::string, std::uint32_t> user_ids, item_ids;
  for (std::size_t idx : order) {
    const RawRow& r = rows[idx];
    auto [uit, unew] = user_ids.try_emplace(r.user, static_cast<std::uint32_t>(user_ids.size()));
    if (unew) result.trace.user_labels.push_back(r.user);
    auto [iit, inew] = item_ids.try_emplace(r.item, static_cast<std::uint32_t>(item_ids.size()));
    if (inew) result.trace.item_labels.push_back(r.item);
    result.trace.append(uit->second, iit->second, r.timestamp, r.features);
  }
  result.summary = summarize(result.trace, reordered);
  return result;
}

IngestResult ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace '" + path.string() + "'");
  return ingest_csv(in, schema);
}

void write_csv(std::ostream& out, const Trace& trace) {
  out << "user_id,item_id,timestamp,state_label,features\n";
  std::ostringstream buf;
  buf.precision(17);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto e = trace.event(i);
    buf.str("");
    const auto label = [](const std::vector<std::string>& labels, std::uint32_t id) {
      return id < labels.size() ? labels[id] : std::to_string(id);
    };
    buf << label(trace.user_labels, e.user) << ',' << label(trace.item_labels, e.item) << ','
        << e.timestamp << ",0";
    for (double f : e.edge_features) buf << ',' << f;
    out << buf.str() << '\n';
  }
}

bool TraceSplit::is_new(NodeId node) const {
  return std::binary_search(new_nodes.begin(), new_nodes.end(), node);
}

TraceSplit chronological_split(const Trace& trace, const SplitFractions& f) {
  if (!(f.train > 0.0 && f.validation > 0.0 && f.test > 0.0)) {
    throw InvalidArgument("split fractions must all be positive");
  }
  if (std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    throw InvalidArgument("split fractions must sum to 1");
  }
  const double n = static_cast<double>(trace.size());
  TraceSplit out;
  out.train_end = static_cast<std::size_t>(std::llround(f.train * n));
  out.validation_end = static_cast<std::size_t>(std::llround((f.train + f.validation) * n));
  out.validation_end = std::min(out.validation_end, trace.size());
  out.train = trace.slice(0, out.train_end);
  out.validation = trace.slice(out.train_end, out.validation_end);
  out.test = trace.slice(out.validation_end, trace.size());

  std::vector<bool> seen(trace.num_nodes(), false);
  for (std::size_t i = 0; i < out.train_end; ++i) {
    const auto e = trace.event(i);
    seen[trace.user_node(e.user)] = true;
    seen[trace.item_node(e.item)] = true;
  }
  std::vector<bool> later(trace.num_nodes(), false);
  for (std::size_t i = out.train_end; i < trace.size(); ++i) {
    const auto e = trace.event(i);
    later[trace.user_node(e.user)] = true;
    later[trace.item_node(e.item)] = true;
  }
  for (NodeId v = 0; v < trace.num_nodes(); ++v) {
    if (later[v] && !seen[v]) out.new_nodes.push_back(v);
  }
  return out;
}

}  // namespace aoicache
