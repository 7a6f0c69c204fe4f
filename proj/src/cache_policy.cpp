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

#include "aoicache/cache_policy.hpp"

#include <algorithm>

#include "aoicache/errors.hpp"

namespace aoicache {

bool LruCache::request(std::uint32_t item) {
  if (auto it = where_.find(item); it != where_.end()) {
    order_.splice(order_.begin(), order_, it->second);
    return true;
  }
  if (capacity() == 0) return false;
  if (order_.size() == capacity()) {
    where_.erase(order_.back());
    order_.pop_back();
  }
  order_.push_front(item);
  where_[item] = order_.begin();
  return false;
}

std::vector<std::uint32_t> LruCache::contents() const {
  std::vector<std::uint32_t> out(order_.begin(), order_.end());
  std::sort(out.begin(), out.end());
  return out;
}

bool LfuCache::request(std::uint32_t item) {
  const std::uint64_t now = ++clock_;
  const std::size_t c = ++counts_[item];
  if (auto it = cached_.find(item); it != cached_.end()) {
    it->second = now;
    return true;
  }
  if (capacity() == 0) return false;
  if (cached_.size() < capacity()) {
    cached_[item] = now;
    return false;
  }
  auto victim = cached_.end();
  std::size_t victim_count = 0;
  for (auto it = cached_.begin(); it != cached_.end(); ++it) {
    const std::size_t vc = counts_.at(it->first);
    if (victim == cached_.end() || vc < victim_count ||
        (vc == victim_count && it->second < victim->second)) {
      victim = it;
      victim_count = vc;
    }
  }
  if (c > victim_count) {
    cached_.erase(victim);
    cached_[item] = now;
  }
  return false;
}

std::vector<std::uint32_t> LfuCache::contents() const {
  std::vector<std::uint32_t> out;
  out.reserve(cached_.size());
  for (const auto& [item, tick] : cached_) out.push_back(item);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t LfuCache::count(std::uint32_t item) const {
  auto it = counts_.find(item);
  return it == counts_.end() ? 0 : it->second;
}

bool StaticCache::contains(std::uint32_t item) const {
  return std::binary_search(items_.begin(), items_.end(), item);
}

void StaticCache::assign(std::vector<std::uint32_t> items) {
  if (items.size() > capacity()) {
    throw InvalidArgument("static cache: " + std::to_string(items.size()) +
                          " items exceed capacity " + std::to_string(capacity()));
  }
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  items_ = std::move(items);
}

}  // namespace aoicache
