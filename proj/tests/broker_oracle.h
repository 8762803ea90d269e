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

// Reference model of the broker for randomized differential testing. It is
// deliberately naive: pending tasks live in an unsorted vector and fetch
// scans for the minimum key.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "vc/broker.h"
#include "vc/clock.h"
#include "vc/errors.h"
#include "vc/rng.h"

namespace vc::testing {

struct RefItem {
  std::uint64_t version, task_id, seq;
  TaskEnvelope task;
};

struct RefLease {
  RefItem item;
  std::int64_t deadline;
};

struct RefQueue {
  std::vector<RefItem> pending;
  std::map<std::uint64_t, RefLease> leased;
  std::uint64_t published = 0, acked = 0, redelivered = 0, purged = 0;
};

class RefBroker {
 public:
  bool create(const std::string& q) { return queues_.try_emplace(q).second; }
  bool has(const std::string& q) const { return queues_.count(q) > 0; }

  void publish(const std::string& q, const TaskEnvelope& t) {
    auto& rq = queues_.at(q);
    rq.pending.push_back({t.required_model_version, t.task_id, seq_++, t});
    ++rq.published;
  }

  std::optional<std::pair<std::uint64_t, TaskEnvelope>> fetch(const std::string& q,
                                                               std::int64_t now) {
    auto& rq = queues_.at(q);
    if (rq.pending.empty()) return std::nullopt;
    auto best = std::min_element(rq.pending.begin(), rq.pending.end(), [](auto& a, auto& b) {
      return std::tie(a.version, a.task_id, a.seq) < std::tie(b.version, b.task_id, b.seq);
    });
    RefItem item = *best;
    rq.pending.erase(best);
    item.task.delivery_count += 1;
    const std::uint64_t id = lease_++;
    rq.leased.emplace(id, RefLease{item, now + static_cast<std::int64_t>(item.task.max_duration_ms)});
    owner_[id] = q;
    return std::make_pair(id, item.task);
  }

  bool ack(std::uint64_t id) {
    auto it = owner_.find(id);
    if (it == owner_.end()) return false;
    auto& rq = queues_.at(it->second);
    rq.leased.erase(id);
    ++rq.acked;
    owner_.erase(it);
    return true;
  }

  std::size_t sweep(std::int64_t now) {
    std::size_t n = 0;
    for (auto& [name, rq] : queues_) {
      for (auto it = rq.leased.begin(); it != rq.leased.end();) {
        if (now >= it->second.deadline) {
          rq.pending.push_back(it->second.item);
          owner_.erase(it->first);
          it = rq.leased.erase(it);
          ++rq.redelivered;
          ++n;
        } else {
          ++it;
        }
      }
    }
    return n;
  }

  std::size_t purge(const std::string& q, const std::string& job) {
    auto& rq = queues_.at(q);
    std::size_t n = 0;
    for (auto it = rq.pending.begin(); it != rq.pending.end();) {
      if (job.empty() || it->task.job_id == job) {
        it = rq.pending.erase(it);
        ++n;
      } else {
        ++it;
      }
    }
    for (auto it = rq.leased.begin(); it != rq.leased.end();) {
      if (job.empty() || it->second.item.task.job_id == job) {
        owner_.erase(it->first);
        it = rq.leased.erase(it);
        ++n;
      } else {
        ++it;
      }
    }
    rq.purged += n;
    return n;
  }

  const RefQueue& queue(const std::string& q) const { return queues_.at(q); }
  std::vector<std::uint64_t> live_leases() const {
    std::vector<std::uint64_t> out;
    for (auto& [id, q] : owner_) out.push_back(id);
    return out;
  }

 private:
  std::map<std::string, RefQueue> queues_;
  std::map<std::uint64_t, std::string> owner_;
  std::uint64_t seq_ = 0;
  std::uint64_t lease_ = 1;
};

struct PropertyOutcome {
  bool ok = true;
  std::string failure;
  std::uint64_t ops = 0, fetches = 0, acks = 0, late_acks = 0, redeliveries = 0, purges = 0;
};

// Drives a Broker and the reference model with the same random operation
// stream and checks, after every operation: identical results (priority
// determinism, lease ids, delivery counts), single-lease (a task identity is
// never leased twice at once), conservation (published = pending + leased +
// acked + purged) and redelivery on expiry.
inline PropertyOutcome run_broker_property(std::uint64_t seed, std::uint64_t ops) {
  PropertyOutcome out;
  auto clock = std::make_shared<ManualClock>();
  Broker broker(clock);
  RefBroker ref;
  Rng rng(seed, 77);
  const std::vector<std::string> names{"InitialQueue", "MapResultsQueue", "q2"};
  std::uint64_t serial = 0;
  std::map<std::uint64_t, std::uint64_t> leased_identity;  // lease id -> task serial
  std::vector<std::uint64_t> dead_leases;

  auto fail = [&](const std::string& what) {
    if (out.ok) {
      out.ok = false;
      std::ostringstream ss;
      ss << "op " << out.ops << ": " << what;
      out.failure = ss.str();
    }
  };
  auto serial_of = [](const TaskEnvelope& t) {
    return std::stoull(std::string(t.payload.begin(), t.payload.end()));
  };

  for (; out.ops < ops && out.ok; ++out.ops) {
    const std::string& q = names[rng.below(names.size())];
    const std::uint64_t dice = rng.below(100);
    try {
      if (!ref.has(q) || dice < 2) {
        bool threw = false;
        try {
          broker.create_queue(q);
        } catch (const Error& e) {
          threw = e.code() == ErrorCode::QueueExists;
          if (!threw) fail("create_queue threw " + std::string(to_string(e.code())));
        }
        if (ref.create(q) == threw) fail("create_queue disagreement");
        continue;
      }
      if (dice < 40) {
        TaskEnvelope t;
        t.task_id = rng.below(24);
        t.job_id = rng.below(4) == 0 ? "other" : "job";
        t.kind = rng.below(2) ? TaskKind::map() : TaskKind::reduce();
        t.required_model_version = rng.below(6);
        t.max_duration_ms = 1 + rng.below(60);
        t.payload = to_bytes(std::to_string(serial++));
        broker.publish(q, t);
        ref.publish(q, t);
      } else if (dice < 70) {
        const auto got = broker.fetch(q, "w");
        const auto want = ref.fetch(q, clock->now_ms());
        ++out.fetches;
        if (got.has_value() != want.has_value()) {
          fail("fetch emptiness disagreement");
        } else if (got) {
          if (got->lease_id != want->first || !(got->task == want->second)) {
            fail("fetch returned a different task than the priority oracle");
          }
          if (got->deadline != got->issued_at + static_cast<std::int64_t>(got->task.max_duration_ms)) {
            fail("deadline != issued_at + max_duration_ms");
          }
          const std::uint64_t id = serial_of(got->task);
          for (auto& [lid, sid] : leased_identity) {
            if (sid == id) fail("task leased twice at once");
          }
          leased_identity[got->lease_id] = id;
        }
      } else if (dice < 85) {
        const auto live = ref.live_leases();
        std::uint64_t id;
        if (!live.empty() && rng.below(4) != 0) {
          id = live[rng.below(live.size())];
        } else if (!dead_leases.empty()) {
          id = dead_leases[rng.below(dead_leases.size())];
          ++out.late_acks;
        } else {
          id = 1'000'000'000ULL + rng.below(10);
        }
        bool broker_ok = true;
        try {
          broker.ack(id);
        } catch (const Error& e) {
          broker_ok = false;
          if (e.code() != ErrorCode::UnknownLease) fail("ack threw " + std::string(to_string(e.code())));
        }
        if (broker_ok != ref.ack(id)) fail("ack disagreement");
        if (broker_ok) ++out.acks;
        leased_identity.erase(id);
        dead_leases.push_back(id);
      } else if (dice < 98) {
        clock->advance(static_cast<std::int64_t>(rng.below(25)));
        const auto before = ref.live_leases();
        const std::size_t a = broker.sweep_expired();
        const std::size_t b = ref.sweep(clock->now_ms());
        if (a != b) fail("sweep count disagreement");
        out.redeliveries += a;
        const auto after = ref.live_leases();
        for (auto id : before) {
          if (!std::binary_search(after.begin(), after.end(), id)) {
            leased_identity.erase(id);
            dead_leases.push_back(id);
          }
        }
      } else {
        const std::string job = rng.below(2) ? "other" : "";
        const auto before = ref.live_leases();
        if (broker.purge(q, job) != ref.purge(q, job)) fail("purge disagreement");
        ++out.purges;
        const auto after = ref.live_leases();
        for (auto id : before) {
          if (!std::binary_search(after.begin(), after.end(), id)) {
            leased_identity.erase(id);
            dead_leases.push_back(id);
          }
        }
      }
    } catch (const Error& e) {
      fail(std::string("unexpected error ") + e.what());
    }

    for (const std::string& name : names) {
      if (!ref.has(name)) continue;
      const QueueStats s = broker.stats(name);
      const RefQueue& rq = ref.queue(name);
      if (s.pending != rq.pending.size() || s.leased != rq.leased.size()) fail("depth disagreement");
      if (s.published != rq.published || s.acked != rq.acked || s.purged != rq.purged ||
          s.redelivered != rq.redelivered) {
        fail("counter disagreement");
      }
      if (s.published != s.pending + s.leased + s.acked + s.purged) fail("conservation violated");
      const QueueDepth d = broker.depth(name);
      if (d.pending != s.pending || d.leased != s.leased) fail("depth/stats disagreement");
    }
  }
  return out;
}

}  // namespace vc::testing
