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

#pragma once

#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "vc/job_model.h"

namespace vc {

struct VersionedValue {
  std::uint64_t version = 0;
  Bytes payload;

  bool operator==(const VersionedValue&) const = default;
};

// The data server: last-write-wins plain keys for datasets and job metadata,
// plus compare-and-set versioned records for the shared model. Versioned
// writes must name exactly the next version (0 for a fresh key), so each
// (key, version) pair is written at most once.
class DataStore {
 public:
  DataStore() = default;
  DataStore(const DataStore&) = delete;
  DataStore& operator=(const DataStore&) = delete;

  void put_plain(const std::string& key, Bytes payload);
  Bytes get_plain(const std::string& key) const;
  bool has_plain(const std::string& key) const;

  // False signals VersionConflict: the caller's update is stale or a
  // duplicate and must be discarded.
  bool put_versioned(const std::string& key, std::uint64_t expected_new_version,
                     Bytes payload);
  VersionedValue get_versioned(const std::string& key) const;
  std::optional<std::uint64_t> current_version(const std::string& key) const;

  // Blocks until the record reaches min_version; nullopt on timeout,
  // including when the key never appears.
  std::optional<VersionedValue> wait_for_version(const std::string& key,
                                                 std::uint64_t min_version,
                                                 std::int64_t timeout_ms) const;

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable changed_;
  std::unordered_map<std::string, Bytes> plain_;
  std::unordered_map<std::string, VersionedValue> versioned_;
};

}  // namespace vc
