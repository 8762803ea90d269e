/* Copyright 2026 The Volunteer Compute Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "vc/datastore.h"

#include <chrono>

#include "vc/errors.h"

namespace vc {

void DataStore::put_plain(const std::string& key, Bytes payload) {
  std::lock_guard lock(mu_);
  plain_[key] = std::move(payload);
}

Bytes DataStore::get_plain(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = plain_.find(key);
  if (it == plain_.end()) throw Error(ErrorCode::NoSuchKey, key);
  return it->second;
}

bool DataStore::has_plain(const std::string& key) const {
  std::lock_guard lock(mu_);
  return plain_.contains(key);
}

bool DataStore::put_versioned(const std::string& key,
                              std::uint64_t expected_new_version,
                              Bytes payload) {
  {
    std::lock_guard lock(mu_);
    auto it = versioned_.find(key);
    if (it == versioned_.end()) {
      if (expected_new_version != 0) return false;
      versioned_.emplace(key, VersionedValue{0, std::move(payload)});
    } else {
      if (expected_new_version != it->second.version + 1) return false;
      it->second = VersionedValue{expected_new_version, std::move(payload)};
    }
  }
  changed_.notify_all();
  return true;
}

VersionedValue DataStore::get_versioned(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = versioned_.find(key);
  if (it == versioned_.end()) throw Error(ErrorCode::NoSuchKey, key);
  return it->second;
}

std::optional<std::uint64_t> DataStore::current_version(
    const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = versioned_.find(key);
  if (it == versioned_.end()) return std::nullopt;
  return it->second.version;
}

std::optional<VersionedValue> DataStore::wait_for_version(
    const std::string& key, std::uint64_t min_version,
    std::int64_t timeout_ms) const {
  if (timeout_ms <= 0) {
    throw Error(ErrorCode::InvalidArgument, "timeout_ms must be > 0");
  }
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  std::unique_lock lock(mu_);
  const VersionedValue* found = nullptr;
  const bool ready = changed_.wait_until(lock, deadline, [&] {
    auto it = versioned_.find(key);
    if (it == versioned_.end() || it->second.version < min_version) return false;
    found = &it->second;
    return true;
  });
  if (!ready) return std::nullopt;
  return *found;
}

}  // namespace vc
