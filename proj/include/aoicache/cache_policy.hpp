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
#include <list>
#include <string>
#include <unordered_map>
#include <vector>

namespace aoicache {

/// A cache of equal-size items. request() serves one request, updates the
/// policy state and reports whether it was a hit.
class CachePolicy {
 public:
  explicit CachePolicy(std::size_t capacity) : capacity_(capacity) {}
  virtual ~CachePolicy() = default;

  virtual bool request(std::uint32_t item) = 0;
  virtual bool contains(std::uint32_t item) const = 0;
  /// Cached items in ascending id order.
  virtual std::vector<std::uint32_t> contents() const = 0;
  virtual std::string name() const = 0;

  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
};

/// Evicts the item whose last request is oldest.
class LruCache final : public CachePolicy {
 public:
  explicit LruCache(std::size_t capacity) : CachePolicy(capacity) {}

  bool request(std::uint32_t item) override;
  bool contains(std::uint32_t item) const override { return where_.contains(item); }
  std::vector<std::uint32_t> contents() const override;
  std::string name() const override { return "lru"; }

 private:
  std::list<std::uint32_t> order_;  // most recent first
  std::unordered_map<std::uint32_t, std::list<std::uint32_t>::iterator> where_;
};

/// Frequency-based cache with counts kept for every item ever requested.
/// A missed item is counted first; it enters a full cache only when its
/// count exceeds the smallest cached count, evicting that item (ties go to
/// the least recently requested).
class LfuCache final : public CachePolicy {
 public:
  explicit LfuCache(std::size_t capacity) : CachePolicy(capacity) {}

  bool request(std::uint32_t item) override;
  bool contains(std::uint32_t item) const override { return cached_.contains(item); }
  std::vector<std::uint32_t> contents() const override;
  std::string name() const override { return "lfu"; }
  std::size_t count(std::uint32_t item) const;

 private:
  std::uint64_t clock_ = 0;
  std::unordered_map<std::uint32_t, std::size_t> counts_;
  std::unordered_map<std::uint32_t, std::uint64_t> cached_;  // item -> last request tick
};

/// Contents fixed externally (e.g. a predicted top-C set); requests never
/// change them.
class StaticCache final : public CachePolicy {
 public:
  explicit StaticCache(std::size_t capacity) : CachePolicy(capacity) {}

  bool request(std::uint32_t item) override { return contains(item); }
  bool contains(std::uint32_t item) const override;
  std::vector<std::uint32_t> contents() const override { return items_; }
  std::string name() const override { return "static"; }
  /// Throws InvalidArgument when more than capacity() items are given.
  void assign(std::vector<std::uint32_t> items);

 private:
  std::vector<std::uint32_t> items_;  // sorted
};

}  // namespace aoicache
