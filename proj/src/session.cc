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

#include "vc/session.h"

#include <algorithm>
#include <chrono>
#include <thread>

#include "vc/errors.h"

namespace vc {

namespace {

constexpr std::int64_t kKillCheckSliceMs = 50;

}  // namespace

FaultySession::FaultySession(std::unique_ptr<Session> inner, LatencyModel latency,
                             std::shared_ptr<KillSwitch> kill)
    : inner_(std::move(inner)),
      latency_(latency),
      kill_(kill ? std::move(kill) : std::make_shared<KillSwitch>()),
      rng_(latency.seed, 0x1a7e) {}

void FaultySession::check_alive() const {
  if (kill_->killed()) throw Error(ErrorCode::WorkerKilled);
}

void FaultySession::delay() {
  if (latency_.none()) return;
  std::int64_t ms = latency_.min_ms;
  if (latency_.max_ms > latency_.min_ms) {
    std::lock_guard lock(rng_mu_);
    ms += static_cast<std::int64_t>(
        rng_.below(static_cast<std::uint64_t>(latency_.max_ms - latency_.min_ms + 1)));
  }
  if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

template <typename F>
auto FaultySession::call(F&& f) -> decltype(f()) {
  check_alive();
  delay();
  check_alive();
  if constexpr (std::is_void_v<decltype(f())>) {
    f();
    check_alive();
  } else {
    auto result = f();
    check_alive();
    return result;
  }
}

void FaultySession::create_queue(const std::string& queue) {
  call([&] { inner_->create_queue(queue); });
}

void FaultySession::publish(const std::string& queue, const TaskEnvelope& task) {
  call([&] { inner_->publish(queue, task); });
}

std::optional<Lease> FaultySession::fetch(const std::string& queue,
                                          const std::string& worker_id) {
  return call([&] { return inner_->fetch(queue, worker_id); });
}

void FaultySession::ack(LeaseId lease_id) {
  call([&] { inner_->ack(lease_id); });
}

QueueDepth FaultySession::depth(const std::string& queue) {
  return call([&] { return inner_->depth(queue); });
}

std::size_t FaultySession::purge(const std::string& queue, const std::string& job_id) {
  return call([&] { return inner_->purge(queue, job_id); });
}

void FaultySession::put_plain(const std::string& key, const Bytes& payload) {
  call([&] { inner_->put_plain(key, payload); });
}

Bytes FaultySession::get_plain(const std::string& key) {
  return call([&] { return inner_->get_plain(key); });
}

bool FaultySession::put_versioned(const std::string& key, std::uint64_t version,
                                  const Bytes& payload) {
  return call([&] { return inner_->put_versioned(key, version, payload); });
}

VersionedValue FaultySession::get_versioned(const std::string& key) {
  return call([&] { return inner_->get_versioned(key); });
}

std::optional<VersionedValue> FaultySession::wait_for_version(
    const std::string& key, std::uint64_t min_version, std::int64_t timeout_ms) {
  if (timeout_ms <= 0) {
    throw Error(ErrorCode::InvalidArgument, "timeout_ms must be > 0");
  }
  // Waited in slices so a kill lands while the worker is parked.
  return call([&]() -> std::optional<VersionedValue> {
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                            deadline - std::chrono::steady_clock::now())
                            .count();
      if (left <= 0) return std::nullopt;
      auto got = inner_->wait_for_version(key, min_version,
                                          std::min(left, kKillCheckSliceMs));
      if (got) return got;
      check_alive();
    }
  });
}

}  // namespace vc
