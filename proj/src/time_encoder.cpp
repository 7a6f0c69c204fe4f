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

#include "aoicache/time_encoder.hpp"

#include <cmath>
#include <string>

#include "aoicache/errors.hpp"

namespace aoicache {

TimeEncoder::TimeEncoder(ad::Var omegas) : omegas_(std::move(omegas)) {
  if (!omegas_.defined() || omegas_.rows() != 1) {
    throw ShapeError("time encoder omegas must be a 1 x d row");
  }
}

Tensor TimeEncoder::initial_omegas(std::size_t dim, double max_timespan) {
  if (dim == 0) throw InvalidArgument("time encoding dimension must be positive");
  Tensor w = Tensor::matrix(1, dim, 1.0);
  const double span = std::max(max_timespan, 1.0);
  if (dim == 1) return w;
  for (std::size_t i = 0; i < dim; ++i) {
    w[i] = std::pow(span, -static_cast<double>(i) / static_cast<double>(dim - 1));
  }
  return w;
}

ad::Var TimeEncoder::encode(const ad::Var& deltas) const {
  if (deltas.cols() != 1) {
    throw ShapeError("time encoder expects an n x 1 column, got " + deltas.value().shape_string());
  }
  for (double d : deltas.value().data()) {
    if (!(d >= 0.0)) {
      throw InvalidArgument("negative time difference " + std::to_string(d));
    }
  }
  const double norm = std::sqrt(1.0 / static_cast<double>(dim()));
  return ad::scale(ad::cos(ad::matmul(deltas, omegas_)), norm);
}

ad::Var TimeEncoder::encode(std::span<const double> deltas) const {
  return encode(ad::Var::constant(Tensor::column_vector(deltas)));
}

std::vector<double> TimeEncoder::encode(double delta) const {
  const double d[1] = {delta};
  return encode(std::span<const double>(d)).value().values();
}

}  // namespace aoicache
