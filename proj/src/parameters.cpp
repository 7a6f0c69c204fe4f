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

#include "aoicache/parameters.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aoicache/errors.hpp"

namespace aoicache {

using ordered_json = nlohmann::ordered_json;

ad::Var ParameterSet::add(const std::string& name, Tensor init) {
  if (contains(name)) throw InvalidArgument("duplicate parameter name '" + name + "'");
  entries_.push_back({name, ad::Var::parameter(std::move(init))});
  return entries_.back().var;
}

const ad::Var& ParameterSet::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.var;
  }
  throw InvalidArgument("unknown parameter '" + name + "'");
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.var.value().size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

void ParameterSet::clear_grads() {
  for (auto& e : entries_) e.var.clear_grad();
}

Tensor fan_in_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in,
                      std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

std::string checkpoint_to_string(const ParameterSet& params) {
  ordered_json doc;
  doc["format"] = "aoicache-checkpoint";
  doc["version"] = kCheckpointVersion;
  ordered_json entries = ordered_json::object();
  for (const auto& e : params) {
    ordered_json p;
    p["shape"] = e.var.value().shape();
    p["data"] = e.var.value().values();
    entries[e.name] = std::move(p);
  }
  doc["parameters"] = std::move(entries);
  return doc.dump(1) + "\n";
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
  out << checkpoint_to_string(params);
  if (!out) throw Error("failed writing checkpoint '" + path.string() + "'");
}

void load_checkpoint_string(const std::string& text, ParameterSet& params) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (doc.value("format", "") != "aoicache-checkpoint") {
    throw FormatError("not an aoicache checkpoint");
  }
  if (doc.value("version", -1) != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + doc.value("version", nlohmann::json()).dump());
  }
  const auto& entries = doc.at("parameters");
  if (entries.size() != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(entries.size()) +
                      " parameters, model expects " + std::to_string(params.size()));
  }
  for (const auto& e : params) {
    if (!entries.contains(e.name)) throw FormatError("checkpoint lacks parameter '" + e.name + "'");
    const auto& p = entries.at(e.name);
    auto shape = p.at("shape").get<std::vector<std::size_t>>();
    auto data = p.at("data").get<std::vector<double>>();
    Tensor t(shape, std::move(data));
    if (!t.same_shape(e.var.value())) {
      throw FormatError("parameter '" + e.name + "' has shape " + t.shape_string() +
                        ", model expects " + e.var.value().shape_string());
    }
    ad::Var v = e.var;
    v.mutable_value() = std::move(t);
  }
}

void load_checkpoint(const std::filesystem::path& path, ParameterSet& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  load_checkpoint_string(ss.str(), params);
}

}  // namespace aoicache
