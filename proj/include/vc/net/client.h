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

#include <memory>
#include <mutex>

#include "json.hpp"
#include "vc/net/protocol.h"
#include "vc/session.h"

namespace vc::net {

// One blocking request/response stream to a coordinator. Transport failures
// surface as Error(ConnectionLost); {"err": ...} replies are rethrown as
// Error with the named code.
class Connection {
 public:
  explicit Connection(Endpoint endpoint);
  ~Connection();

  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  // Returns the "ok" value.
  nlohmann::json request(const nlohmann::json& req);
  void reconnect();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct RemoteOptions {
  // Remote wait_for_version polls get_versioned at this period instead of
  // parking on the server.
  std::int64_t wait_poll_ms = 100;
  bool server_side_wait = false;
};

// Session over TCP. The broker and the datastore may live behind different
// endpoints; each gets its own connection.
class RemoteSession final : public Session {
 public:
  RemoteSession(Endpoint broker, Endpoint store, RemoteOptions options = {});

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
  void reconnect() override;

 private:
  Connection broker_;
  Connection store_;
  RemoteOptions options_;
};

}  // namespace vc::net
