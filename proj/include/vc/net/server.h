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

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "vc/broker.h"
#include "vc/datastore.h"

namespace vc::net {

struct ServerOptions {
  std::string bind = "127.0.0.1";
  std::uint16_t tcp_port = 0;  // 0 picks an ephemeral port
  bool enable_websocket = false;
  std::uint16_t ws_port = 0;
  std::int64_t sweep_interval_ms = 100;  // <= 0 disables the lease sweeper
};

// Serves a broker and/or a datastore over newline-delimited JSON on TCP and,
// optionally, over WebSocket text messages (one frame per message). One
// thread per connection; responses go out in request order.
class CoordinatorServer {
 public:
  CoordinatorServer(Broker* broker, DataStore* store, ServerOptions options);
  ~CoordinatorServer();

  CoordinatorServer(const CoordinatorServer&) = delete;
  CoordinatorServer& operator=(const CoordinatorServer&) = delete;

  void start();
  void stop();

  std::uint16_t tcp_port() const;
  std::uint16_t ws_port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vc::net
