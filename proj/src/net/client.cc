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

#include "vc/net/client.h"

#include <boost/asio.hpp>
#include <chrono>
#include <thread>

#include "vc/errors.h"

namespace vc::net {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using nlohmann::json;

struct Connection::Impl {
  Endpoint endpoint;
  asio::io_context io;
  std::unique_ptr<tcp::socket> socket;
  asio::streambuf buf;
  std::mutex mu;

  void connect() {
    socket.reset();
    buf.consume(buf.size());
    try {
      tcp::resolver resolver(io);
      auto results = resolver.resolve(endpoint.host, std::to_string(endpoint.port));
      auto s = std::make_unique<tcp::socket>(io);
      asio::connect(*s, results);
      s->set_option(tcp::no_delay(true));
      socket = std::move(s);
    } catch (const boost::system::system_error& e) {
      throw Error(ErrorCode::ConnectionLost, endpoint.str() + ": " + e.what());
    }
  }
};

Connection::Connection(Endpoint endpoint) : impl_(std::make_unique<Impl>()) {
  impl_->endpoint = std::move(endpoint);
  impl_->connect();
}

Connection::~Connection() = default;

void Connection::reconnect() {
  std::lock_guard lock(impl_->mu);
  impl_->connect();
}

json Connection::request(const json& req) {
  std::lock_guard lock(impl_->mu);
  Impl& s = *impl_;
  if (!s.socket) throw Error(ErrorCode::ConnectionLost, "not connected");
  std::string line = req.dump();
  line.push_back('\n');
  boost::system::error_code ec;
  asio::write(*s.socket, asio::buffer(line), ec);
  std::size_t n = 0;
  if (!ec) n = asio::read_until(*s.socket, s.buf, '\n', ec);
  if (ec) {
    s.socket.reset();
    throw Error(ErrorCode::ConnectionLost, s.endpoint.str() + ": " + ec.message());
  }
  const std::string reply(asio::buffers_begin(s.buf.data()),
                          asio::buffers_begin(s.buf.data()) + static_cast<std::ptrdiff_t>(n));
  s.buf.consume(n);

  json resp = json::parse(reply, nullptr, false);
  if (resp.is_discarded() || !resp.is_object()) {
    throw Error(ErrorCode::MalformedRequest, "unparseable reply");
  }
  if (auto it = resp.find("err"); it != resp.end()) {
    const std::string name = it->is_string() ? it->get<std::string>() : "";
    const auto code = error_code_from_string(name).value_or(ErrorCode::MalformedRequest);
    throw Error(code, resp.value("detail", name));
  }
  auto it = resp.find("ok");
  if (it == resp.end()) throw Error(ErrorCode::MalformedRequest, "reply without ok");
  return *it;
}

namespace {

VersionedValue versioned_from_json(const json& j) {
  return VersionedValue{j.at("version").get<std::uint64_t>(),
                        base64_decode(j.at("payload_b64").get<std::string>())};
}

}  // namespace

RemoteSession::RemoteSession(Endpoint broker, Endpoint store, RemoteOptions options)
    : broker_(std::move(broker)), store_(std::move(store)), options_(options) {}

void RemoteSession::create_queue(const std::string& queue) {
  broker_.request({{"op", "create_queue"}, {"queue", queue}});
}

void RemoteSession::publish(const std::string& queue, const TaskEnvelope& task) {
  broker_.request({{"op", "publish"}, {"queue", queue}, {"task", envelope_to_json(task)}});
}

std::optional<Lease> RemoteSession::fetch(const std::string& queue,
                                          const std::string& worker_id) {
  const json r =
      broker_.request({{"op", "fetch"}, {"queue", queue}, {"worker_id", worker_id}});
  if (r.is_null()) return std::nullopt;
  return lease_from_json(r);
}

void RemoteSession::ack(LeaseId lease_id) {
  broker_.request({{"op", "ack"}, {"lease_id", lease_id}});
}

QueueDepth RemoteSession::depth(const std::string& queue) {
  const json r = broker_.request({{"op", "depth"}, {"queue", queue}});
  return QueueDepth{r.at("pending").get<std::size_t>(), r.at("leased").get<std::size_t>()};
}

std::size_t RemoteSession::purge(const std::string& queue, const std::string& job_id) {
  return broker_.request({{"op", "purge"}, {"queue", queue}, {"job_id", job_id}})
      .get<std::size_t>();
}

void RemoteSession::put_plain(const std::string& key, const Bytes& payload) {
  store_.request({{"op", "put_plain"}, {"key", key}, {"payload_b64", base64_encode(payload)}});
}

Bytes RemoteSession::get_plain(const std::string& key) {
  const json r = store_.request({{"op", "get_plain"}, {"key", key}});
  return base64_decode(r.at("payload_b64").get<std::string>());
}

bool RemoteSession::put_versioned(const std::string& key, std::uint64_t version,
                                  const Bytes& payload) {
  try {
    store_.request({{"op", "put_versioned"},
                    {"key", key},
                    {"expected_new_version", version},
                    {"payload_b64", base64_encode(payload)}});
    return true;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::VersionConflict) return false;
    throw;
  }
}

VersionedValue RemoteSession::get_versioned(const std::string& key) {
  return versioned_from_json(store_.request({{"op", "get_versioned"}, {"key", key}}));
}

std::optional<VersionedValue> RemoteSession::wait_for_version(const std::string& key,
                                                              std::uint64_t min_version,
                                                              std::int64_t timeout_ms) {
  if (timeout_ms <= 0) throw Error(ErrorCode::InvalidArgument, "timeout_ms must be > 0");
  if (options_.server_side_wait) {
    try {
      return versioned_from_json(store_.request({{"op", "wait_for_version"},
                                                 {"key", key},
                                                 {"min_version", min_version},
                                                 {"timeout_ms", timeout_ms}}));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Timeout) return std::nullopt;
      throw;
    }
  }
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  for (;;) {
    try {
      VersionedValue v = get_versioned(key);
      if (v.version >= min_version) return v;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoSuchKey) throw;
    }
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) return std::nullopt;
    std::this_thread::sleep_for(
        std::min<std::chrono::steady_clock::duration>(
            std::chrono::milliseconds(options_.wait_poll_ms), deadline - now));
  }
}

void RemoteSession::reconnect() {
  broker_.reconnect();
  store_.reconnect();
}

}  // namespace vc::net
