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

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "aoicache/autodiff.hpp"

namespace aoicache {

/// Named trainable leaves in registration order.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    ad::Var var;
  };

  /// Registers a new parameter; throws InvalidArgument on duplicate names.
  ad::Var add(const std::string& name, Tensor init);

  const ad::Var& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  /// Allocates (if needed) and zeroes every gradient slot.
  void zero_grad();
  /// Drops gradient slots entirely, so a later optimizer step detects them as missing.
  void clear_grads();

  std::vector<Entry>::const_iterator begin() const { return entries_.begin(); }
  std::vector<Entry>::const_iterator end() const { return entries_.end(); }

 private:
  std::vector<Entry> entries_;
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor fan_in_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in,
                      std::mt19937_64& rng);

// Checkpoint file (JSON, UTF-8):
//   {
//     "format": "aoicache-checkpoint",
//     "version": 1,
//     "parameters": {
//       "<name>": {"shape": [rows, cols], "data": [row-major values...]},
//       ...
//     }
//   }
// Parameters appear in registration order. Doubles are written in shortest
// round-trip form, so save/load reproduces every value bit for bit.
inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_to_string(const ParameterSet& params);
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
/// Copies values into an already-built ParameterSet. Every registered name must
/// be present with a matching shape; extra names in the file are an error too.
void load_checkpoint_string(const std::string& text, ParameterSet& params);
void load_checkpoint(const std::filesystem::path& path, ParameterSet& params);

}  // namespace aoicache
