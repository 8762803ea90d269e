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
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "vc/clock.h"
#include "vc/job_model.h"

namespace vc {

using LeaseId = std::uint64_t;

struct Lease {
  LeaseId lease_id = 0;
  std::string queue;
  TaskEnvelope task;
  std::string worker_id;
  std::int64_t issued_at = 0;
  std::int64_t deadline = 0;
};

struct QueueDepth {
  std::size_t pending = 0;
  std::size_t leased = 0;

  bool operator==(const QueueDepth&) const = default;
};

struct QueueStats {
  std::size_t pending = 0;
  std::size_t leased = 0;
  std::uint64_t published = 0;
  std::uint64_t acked = 0;
  std::uint64_t redelivered = 0;
  std::uint64_t purged = 0;
};

// The queue server. Named queues hold task envelopes; fetch hands out a
// lease that hides the task until it is acknowledged or its deadline passes
// and sweep_expired() puts it back. Pending tasks are served in ascending
// (required_model_version, task_id) order, with publish order breaking ties.
//
// All operations are linearizable: one mutex guards the whole state and no
// operation waits on anything external.
class Broker {
 public:
  explicit Broker(std::shared_ptr<const Clock> clock = nullptr);

  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  void create_queue(const std::string& name);
  bool has_queue(const std::string& name) const;
  std::vector<std::string> queue_names() const;

  void publish(const std::string& queue, TaskEnvelope task);

  // std::nullopt means the queue has nothing visible right now.
  std::optional<Lease> fetch(const std::string& queue,
                             const std::string& worker_id);

  void ack(LeaseId lease_id);

  // Returns every lease whose deadline has been reached to its queue.
  std::size_t sweep_expired(std::int64_t now_ms);
  std::size_t sweep_expired() { return sweep_expired(clock_->now_ms()); }

  QueueDepth depth(const std::string& queue) const;
  QueueStats stats(const std::string& queue) const;

  // Drops pending tasks and live leases of one job (or all jobs when job_id
  // is empty). Returns the number of tasks removed.
  std::size_t purge(const std::string& queue, const std::string& job_id = {});

  const Clock& clock() const { return *clock_; }

 private:
  struct PendingKey {
    std::uint64_t version;
    std::uint64_t task_id;
    std::uint64_t seq;

    auto operator<=>(const PendingKey&) const = default;
  };

  struct LeasedTask {
    Lease lease;
    PendingKey key;
  };

  struct Queue {
    std::map<PendingKey, TaskEnvelope> pending;
    std::unordered_map<LeaseId, LeasedTask> leased;
    QueueStats stats;
  };

  Queue& queue_or_throw(const std::string& name);
  const Queue& queue_or_throw(const std::string& name) const;

  std::shared_ptr<const Clock> clock_;
  mutable std::mutex mu_;
  std::map<std::string, Queue> queues_;
  std::unordered_map<LeaseId, std::string> lease_queue_;
  LeaseId next_lease_ = 1;
  std::uint64_t next_seq_ = 0;
};

// Calls Broker::sweep_expired() on a fixed period until destroyed.
class SweepLoop {
 public:
  SweepLoop(Broker& broker, std::int64_t interval_ms);
  ~SweepLoop();

  SweepLoop(const SweepLoop&) = delete;
  SweepLoop& operator=(const SweepLoop&) = delete;

 private:
  Broker& broker_;
  std::int64_t interval_ms_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stop_ = false;
  std::thread thread_;
};

}  // namespace vc
