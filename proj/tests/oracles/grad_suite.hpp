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


#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "aoicache/model.hpp"
#include "gradcheck.hpp"

namespace aoicache::oracle {

/// One randomized gradient check; each call draws fresh shapes and values.
struct GradCase {
  std::string name;
  std::function<GradCheckResult(std::mt19937_64&)> trial;
};

/// Every differentiable autodiff primitive.
std::vector<GradCase> op_cases();

/// Time encoder, threshold MLP, soft mask, attention heads, FFN, GRU, GAT,
/// predictor and BCE, each on its own.
std::vector<GradCase> module_cases();

struct CaseSummary {
  std::string name;
  std::size_t trials = 0;
  GradCheckResult result;
};

CaseSummary run_case(const GradCase& c, std::size_t trials, std::uint64_t seed);

/// Small-dimension model used by the pipeline check.
ModelConfig toy_model_config(Aggregator aggregator, std::uint64_t seed);

/// Loss of the last two events of a 5-event toy graph (the first three are
/// committed beforehand) against every model parameter.
GradCheckResult pipeline_check(std::uint64_t seed, Aggregator aggregator = Aggregator::kAoiAttention,
                               const GradCheckOptions& options = {});

}  // namespace aoicache::oracle
