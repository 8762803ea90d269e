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

#include "vc/net/protocol.h"

#include <charconv>

#include "vc/errors.h"

namespace vc::net {

using nlohmann::json;

Endpoint Endpoint::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::InvalidArgument, "endpoint needs host:port");
  }
  Endpoint ep;
  if (colon > 0) ep.host = std::string(text.substr(0, colon));
  const std::string_view port = text.substr(colon + 1);
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc() || ptr != port.data() + port.size() || value > 65535) {
    throw Error(ErrorCode::InvalidArgument, "bad port in '" + std::string(text) + "'");
  }
  ep.port = static_cast<std::uint16_t>(value);
  return ep;
}

std::string Endpoint::str() const { return host + ":" + std::to_string(port); }

json lease_to_json(const Lease& lease) {
  return json{{"lease_id", lease.lease_id},   {"queue", lease.queue},
              {"worker_id", lease.worker_id}, {"issued_at", lease.issued_at},
              {"deadline", lease.deadline},   {"task", envelope_to_json(lease.task)}};
}

Lease lease_from_json(const json& j) {
  try {
    Lease lease;
    lease.lease_id = j.at("lease_id").get<LeaseId>();
    lease.queue = j.at("queue").get<std::string>();
    lease.worker_id = j.at("worker_id").get<std::string>();
    lease.issued_at = j.at("issued_at").get<std::int64_t>();
    lease.deadline = j.at("deadline").get<std::int64_t>();
    lease.task = envelope_from_json(j.at("task"));
    return lease;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRequest, e.what());
  }
}

namespace {

json ok(json value) { return json{{"ok", std::move(value)}}; }

json err(ErrorCode code, const std::string& detail = {}) {
  json j{{"err", std::string(to_string(code))}};
  if (!detail.empty()) j["detail"] = detail;
  return j;
}

json versioned_to_json(const VersionedValue& v) {
  return json{{"version", v.version}, {"payload_b64", base64_encode(v.payload)}};
}

Broker& need_broker(Broker* broker) {
  if (broker == nullptr) throw Error(ErrorCode::Unsupported, "no broker on this endpoint");
  return *broker;
}

DataStore& need_store(DataStore* store) {
  if (store == nullptr) throw Error(ErrorCode::Unsupported, "no datastore on this endpoint");
  return *store;
}

json dispatch(const json& req, Broker* broker, DataStore* store) {
  const std::string op = req.at("op").get<std::string>();
  if (op == "ping") return ok("pong");
  if (op == "create_queue") {
    need_broker(broker).create_queue(req.at("queue").get<std::string>());
    return ok(true);
  }
  if (op == "publish") {
    need_broker(broker).publish(req.at("queue").get<std::string>(),
                                envelope_from_json(req.at("task")));
    return ok(true);
  }
  if (op == "fetch") {
    auto lease = need_broker(broker).fetch(req.at("queue").get<std::string>(),
                                           req.at("worker_id").get<std::string>());
    return ok(lease ? lease_to_json(*lease) : json(nullptr));
  }
  if (op == "ack") {
    need_broker(broker).ack(req.at("lease_id").get<LeaseId>());
    return ok(true);
  }
  if (op == "depth") {
    const QueueDepth d = need_broker(broker).depth(req.at("queue").get<std::string>());
    return ok(json{{"pending", d.pending}, {"leased", d.leased}});
  }
  if (op == "purge") {
    const std::string job = req.value("job_id", std::string());
    return ok(need_broker(broker).purge(req.at("queue").get<std::string>(), job));
  }
  if (op == "put_plain") {
    need_store(store).put_plain(req.at("key").get<std::string>(),
                                base64_decode(req.at("payload_b64").get<std::string>()));
    return ok(true);
  }
  if (op == "get_plain") {
    return ok(json{{"payload_b64",
                    base64_encode(need_store(store).get_plain(req.at("key").get<std::string>()))}});
  }
  if (op == "put_versioned") {
    const bool accepted = need_store(store).put_versioned(
        req.at("key").get<std::string>(), req.at("expected_new_version").get<std::uint64_t>(),
        base64_decode(req.at("payload_b64").get<std::string>()));
    return accepted ? ok(true) : err(ErrorCode::VersionConflict);
  }
  if (op == "get_versioned") {
    return ok(versioned_to_json(need_store(store).get_versioned(req.at("key").get<std::string>())));
  }
  if (op == "wait_for_version") {
    auto got = need_store(store).wait_for_version(req.at("key").get<std::string>(),
                                                  req.at("min_version").get<std::uint64_t>(),
                                                  req.at("timeout_ms").get<std::int64_t>());
    return got ? ok(versioned_to_json(*got)) : err(ErrorCode::Timeout);
  }
  return err(ErrorCode::MalformedRequest, "unknown op '" + op + "'");
}

}  // namespace

json handle_request(const json& request, Broker* broker, DataStore* store) {
  if (!request.is_object() || !request.contains("op") || !request["op"].is_string()) {
    return err(ErrorCode::MalformedRequest, "request must be an object with an op");
  }
  try {
    return dispatch(request, broker, store);
  } catch (const Error& e) {
    return err(e.code(), e.what());
  } catch (const json::exception& e) {
    return err(ErrorCode::MalformedRequest, e.what());
  }
}

std::string handle_frame(std::string_view frame, Broker* broker, DataStore* store) {
  while (!frame.empty() && (frame.back() == '\n' || frame.back() == '\r')) {
    frame.remove_suffix(1);
  }
  json request = json::parse(frame, nullptr, /*allow_exceptions=*/false);
  if (request.is_discarded()) {
    return err(ErrorCode::MalformedRequest, "frame is not JSON").dump();
  }
  return handle_request(request, broker, store).dump();
}

}  // namespace vc::net
