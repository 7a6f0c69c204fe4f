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

#include <span>

namespace aoicache {

/// Probability that a random positive outranks a random negative, ties
/// counting half. Labels are 0/1. Throws InvalidArgument unless both classes
/// are present.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Sum over distinct descending score thresholds of precision * recall gain.
/// Tied scores form one threshold. Throws InvalidArgument with no positives.
double average_precision(std::span<const double> scores, std::span<const int> labels);

}  // namespace aoicache
