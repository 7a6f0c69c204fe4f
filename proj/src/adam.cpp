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

#include "aoicache/adam.hpp"

#include <cmath>

#include "aoicache/errors.hpp"

namespace aoicache {

void adam_step(ParameterSet& params, AdamState& state) {
  std::string missing;
  for (const auto& e : params) {
    if (!e.var.has_grad()) missing += (missing.empty() ? "" : ", ") + e.name;
  }
  if (!missing.empty()) throw InvalidArgument("adam_step: missing gradient for " + missing);

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& e : params) {
    ad::Var var = e.var;
    auto& m = state.first_moment[e.name];
    auto& v = state.second_moment[e.name];
    if (!m.same_shape(var.value())) m = Tensor(var.value().shape(), 0.0);
    if (!v.same_shape(var.value())) v = Tensor(var.value().shape(), 0.0);
    auto p = var.mutable_value().data();
    auto g = var.mutable_grad().data();
    auto md = m.data();
    auto vd = v.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      md[i] = state.beta1 * md[i] + (1.0 - state.beta1) * g[i];
      vd[i] = state.beta2 * vd[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = md[i] / c1;
      const double vhat = vd[i] / c2;
      p[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
    var.zero_grad();
  }
}

}  // namespace aoicache
