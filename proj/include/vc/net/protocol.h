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
#include <string>
#include <string_view>

#include "json.hpp"
#include "vc/broker.h"
#include "vc/datastore.h"

// Framed-JSON protocol shared by the TCP and WebSocket listeners. Each
// request is one JSON object carrying an "op" field; each response is
// {"ok": <value>} or {"err": "<ErrorCode>", "detail": "..."}.
//
//   create_queue  {queue}                               -> true
//   publish       {queue, task}                         -> true
//   fetch         {queue, worker_id}                    -> lease | null
//   ack           {lease_id}                            -> true
//   depth         {queue}                               -> {pending, leased}
//   purge         {queue, job_id?}                      -> removed count
//   put_plain     {key, payload_b64}                    -> true
//   get_plain     {key}                                 -> {payload_b64}
//   put_versioned {key, expected_new_version, payload_b64} -> true
//   get_versioned {key}                                 -> {version, payload_b64}
//   wait_for_version {key, min_version, timeout_ms}     -> {version, payload_b64}
//   ping          {}                                    -> "pong"
//
// A lease is {lease_id, queue, worker_id, issued_at, deadline, task}.
namespace vc::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  // "host:port" or ":port".
  static Endpoint parse(std::string_view text);
  std::string str() const;
  bool operator==(const Endpoint&) const = default;
};

nlohmann::json lease_to_json(const Lease& lease);
Lease lease_from_json(const nlohmann::json& j);

// broker or store may be null; their ops then answer Unsupported.
nlohmann::json handle_request(const nlohmann::json& request, Broker* broker,
                              DataStore* store);

// Parses one frame (a trailing newline is tolerated) and returns the
// serialized response without a newline.
std::string handle_frame(std::string_view frame, Broker* broker, DataStore* store);

}  // namespace vc::net
