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

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "vc/broker.h"
#include "vc/datastore.h"
#include "vc/rng.h"

namespace vc {

// Client view of the broker and the datastore. Workers, task handlers and
// the job planner only ever talk through a Session, so the same code runs
// in-process, over TCP, or behind injected latency and faults.
class Session {
 public:
  virtual ~Session() = default;

  virtual void create_queue(const std::string& queue) = 0;
  virtual void publish(const std::string& queue, const TaskEnvelope& task) = 0;
  virtual std::optional<Lease> fetch(const std::string& queue,
                                     const std::string& worker_id) = 0;
  virtual void ack(LeaseId lease_id) = 0;
  virtual QueueDepth depth(const std::string& queue) = 0;
  virtual std::size_t purge(const std::string& queue, const std::string& job_id) = 0;

  virtual void put_plain(const std::string& key, const Bytes& payload) = 0;
  virtual Bytes get_plain(const std::string& key) = 0;
  virtual bool put_versioned(const std::string& key, std::uint64_t version,
                             const Bytes& payload) = 0;
  virtual VersionedValue get_versioned(const std::string& key) = 0;
  virtual std::optional<VersionedValue> wait_for_version(
      const std::string& key, std::uint64_t min_version,
      std::int64_t timeout_ms) = 0;

  // Re-establishes transport after ConnectionLost. No-op for local sessions.
  virtual void reconnect() {}
};

class LocalSession final : public Session {
 public:
  LocalSession(Broker& broker, DataStore& store) : broker_(broker), store_(store) {}

  void create_queue(const std::string& queue) override { broker_.create_queue(queue); }
  void publish(const std::string& queue, const TaskEnvelope& task) override {
    broker_.publish(queue, task);
  }
  std::optional<Lease> fetch(const std::string& queue,
                             const std::string& worker_id) override {
    return broker_.fetch(queue, worker_id);
  }
  void ack(LeaseId lease_id) override { broker_.ack(lease_id); }
  QueueDepth depth(const std::string& queue) override { return broker_.depth(queue); }
  std::size_t purge(const std::string& queue, const std::string& job_id) override {
    return broker_.purge(queue, job_id);
  }

  void put_plain(const std::string& key, const Bytes& payload) override {
    store_.put_plain(key, payload);
  }
  Bytes get_plain(const std::string& key) override { return store_.get_plain(key); }
  bool put_versioned(const std::string& key, std::uint64_t version,
                     const Bytes& payload) override {
    return store_.put_versioned(key, version, payload);
  }
  VersionedValue get_versioned(const std::string& key) override {
    return store_.get_versioned(key);
  }
  std::optional<VersionedValue> wait_for_version(const std::string& key,
                                                 std::uint64_t min_version,
                                                 std::int64_t timeout_ms) override {
    return store_.wait_for_version(key, min_version, timeout_ms);
  }

 private:
  Broker& broker_;
  DataStore& store_;
};

// Per-message added delay: fixed when min_ms == max_ms, else uniform.
struct LatencyModel {
  std::int64_t min_ms = 0;
  std::int64_t max_ms = 0;
  std::uint64_t seed = 0;

  bool none() const { return max_ms <= 0; }
};

// Shared flag through which a harness abruptly kills a worker.
class KillSwitch {
 public:
  void kill() { killed_.store(true); }
  bool killed() const { return killed_.load(); }

 private:
  std::atomic<bool> killed_{false};
};

// Decorates a session with simulated network latency and an abrupt-kill
// switch. Once killed, every call (including one already in flight when it
// returns) throws Error(WorkerKilled), so the worker disappears without
// acknowledging anything: exactly what a closed browser tab looks like to
// the broker.
class FaultySession final : public Session {
 public:
  FaultySession(std::unique_ptr<Session> inner, LatencyModel latency,
                std::shared_ptr<KillSwitch> kill);

  void create_queue(const std::string& queue) override;
  void publish(const std::string& queue, const TaskEnvelope& task) override;
  std::optional<Lease> fetch(const std::string& queue,
                             const std::string& worker_id) override;
  void ack(LeaseId lease_id) override;
  QueueDepth depth(const std::string& queue) override;
  std::size_t purge(const std::string& queue, const std::string& job_id) override;
  void put_plain(const std::string& key, const Bytes& payload) override;
  Bytes get_plain(const std::string& key) override;
  bool put_versioned(const std::string& key, std::uint64_t version,
                     const Bytes& payload) override;
  VersionedValue get_versioned(const std::string& key) override;
  std::optional<VersionedValue> wait_for_version(const std::string& key,
                                                 std::uint64_t min_version,
                                                 std::int64_t timeout_ms) override;
  void reconnect() override { inner_->reconnect(); }

 private:
  template <typename F>
  auto call(F&& f) -> decltype(f());

  void delay();
  void check_alive() const;

  std::unique_ptr<Session> inner_;
  LatencyModel latency_;
  std::shared_ptr<KillSwitch> kill_;
  std::mutex rng_mu_;
  Rng rng_;
};

}  // namespace vc
