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

#include "vc/broker.h"

#include "vc/errors.h"

namespace vc {

Broker::Broker(std::shared_ptr<const Clock> clock)
    : clock_(clock ? std::move(clock) : std::make_shared<SteadyClock>()) {}

Broker::Queue& Broker::queue_or_throw(const std::string& name) {
  auto it = queues_.find(name);
  if (it == queues_.end()) throw Error(ErrorCode::NoSuchQueue, name);
  return it->second;
}

const Broker::Queue& Broker::queue_or_throw(const std::string& name) const {
  auto it = queues_.find(name);
  if (it == queues_.end()) throw Error(ErrorCode::NoSuchQueue, name);
  return it->second;
}

void Broker::create_queue(const std::string& name) {
  if (name.empty()) throw Error(ErrorCode::InvalidArgument, "empty queue name");
  std::lock_guard lock(mu_);
  if (!queues_.try_emplace(name).second) {
    throw Error(ErrorCode::QueueExists, name);
  }
}

bool Broker::has_queue(const std::string& name) const {
  std::lock_guard lock(mu_);
  return queues_.contains(name);
}

std::vector<std::string> Broker::queue_names() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> names;
  names.reserve(queues_.size());
  for (const auto& [name, q] : queues_) names.push_back(name);
  return names;
}

void Broker::publish(const std::string& queue, TaskEnvelope task) {
  validate(task);
  std::lock_guard lock(mu_);
  Queue& q = queue_or_throw(queue);
  PendingKey key{task.required_model_version, task.task_id, next_seq_++};
  q.pending.emplace(key, std::move(task));
  ++q.stats.published;
}

std::optional<Lease> Broker::fetch(const std::string& queue,
                                   const std::string& worker_id) {
  std::lock_guard lock(mu_);
  Queue& q = queue_or_throw(queue);
  if (q.pending.empty()) return std::nullopt;

  auto node = q.pending.extract(q.pending.begin());
  Lease lease;
  lease.lease_id = next_lease_++;
  lease.queue = queue;
  lease.task = std::move(node.mapped());
  lease.task.delivery_count += 1;
  lease.worker_id = worker_id;
  lease.issued_at = clock_->now_ms();
  lease.deadline =
      lease.issued_at + static_cast<std::int64_t>(lease.task.max_duration_ms);

  q.leased.emplace(lease.lease_id, LeasedTask{lease, node.key()});
  lease_queue_.emplace(lease.lease_id, queue);
  return lease;
}

void Broker::ack(LeaseId lease_id) {
  std::lock_guard lock(mu_);
  auto it = lease_queue_.find(lease_id);
  if (it == lease_queue_.end()) {
    throw Error(ErrorCode::UnknownLease, std::to_string(lease_id));
  }
  Queue& q = queues_.at(it->second);
  q.leased.erase(lease_id);
  lease_queue_.erase(it);
  ++q.stats.acked;
}

std::size_t Broker::sweep_expired(std::int64_t now_ms) {
  std::lock_guard lock(mu_);
  std::size_t count = 0;
  for (auto& [name, q] : queues_) {
    for (auto it = q.leased.begin(); it != q.leased.end();) {
      if (now_ms >= it->second.lease.deadline) {
        // The requeued envelope keeps its delivery_count so the next lease
        // reports how many times the task has gone out.
        q.pending.emplace(it->second.key, std::move(it->second.lease.task));
        lease_queue_.erase(it->first);
        it = q.leased.erase(it);
        ++q.stats.redelivered;
        ++count;
      } else {
        ++it;
      }
    }
  }
  return count;
}

QueueDepth Broker::depth(const std::string& queue) const {
  std::lock_guard lock(mu_);
  const Queue& q = queue_or_throw(queue);
  return QueueDepth{q.pending.size(), q.leased.size()};
}

QueueStats Broker::stats(const std::string& queue) const {
  std::lock_guard lock(mu_);
  const Queue& q = queue_or_throw(queue);
  QueueStats s = q.stats;
  s.pending = q.pending.size();
  s.leased = q.leased.size();
  return s;
}

std::size_t Broker::purge(const std::string& queue, const std::string& job_id) {
  std::lock_guard lock(mu_);
  Queue& q = queue_or_throw(queue);
  std::size_t removed = 0;
  for (auto it = q.pending.begin(); it != q.pending.end();) {
    if (job_id.empty() || it->second.job_id == job_id) {
      it = q.pending.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  for (auto it = q.leased.begin(); it != q.leased.end();) {
    if (job_id.empty() || it->second.lease.task.job_id == job_id) {
      lease_queue_.erase(it->first);
      it = q.leased.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  q.stats.purged += removed;
  return removed;
}

SweepLoop::SweepLoop(Broker& broker, std::int64_t interval_ms)
    : broker_(broker), interval_ms_(interval_ms > 0 ? interval_ms : 1) {
  thread_ = std::thread([this] {
    std::unique_lock lock(mu_);
    while (!stop_) {
      cv_.wait_for(lock, std::chrono::milliseconds(interval_ms_));
      if (stop_) break;
      lock.unlock();
      broker_.sweep_expired();
      lock.lock();
    }
  });
}

SweepLoop::~SweepLoop() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  thread_.join();
}

}  // namespace vc
