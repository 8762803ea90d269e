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

#include "vc/net/server.h"

#include <sys/socket.h>

#include <atomic>
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "vc/errors.h"
#include "vc/net/protocol.h"

namespace vc::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = boost::beast::websocket;
using tcp = asio::ip::tcp;

namespace {

constexpr std::size_t kMaxFrameBytes = 256u << 20;

}  // namespace

struct CoordinatorServer::Impl {
  Broker* broker;
  DataStore* store;
  ServerOptions options;

  asio::io_context io;
  std::unique_ptr<tcp::acceptor> tcp_acceptor;
  std::unique_ptr<tcp::acceptor> ws_acceptor;
  std::thread tcp_thread;
  std::thread ws_thread;
  std::unique_ptr<SweepLoop> sweeper;
  std::atomic<bool> stopping{false};
  bool started = false;
  std::uint16_t bound_tcp = 0;
  std::uint16_t bound_ws = 0;

  std::mutex mu;
  std::vector<std::thread> connections;
  std::set<int> live_fds;

  Impl(Broker* b, DataStore* s, ServerOptions o)
      : broker(b), store(s), options(std::move(o)) {}

  std::unique_ptr<tcp::acceptor> listen(std::uint16_t port) {
    const tcp::endpoint ep(asio::ip::make_address(options.bind), port);
    auto acc = std::make_unique<tcp::acceptor>(io);
    acc->open(ep.protocol());
    acc->set_option(asio::socket_base::reuse_address(true));
    acc->bind(ep);
    acc->listen();
    return acc;
  }

  void track(int fd) {
    std::lock_guard lock(mu);
    live_fds.insert(fd);
  }

  // Must run before the socket closes, so stop() never touches a reused fd.
  void untrack(int fd) {
    std::lock_guard lock(mu);
    live_fds.erase(fd);
  }

  void serve_tcp(tcp::socket sock) {
    const int fd = sock.native_handle();
    boost::system::error_code ec;
    asio::streambuf buf(kMaxFrameBytes);
    while (!stopping) {
      const std::size_t n = asio::read_until(sock, buf, '\n', ec);
      if (ec) break;
      std::string line(asio::buffers_begin(buf.data()),
                       asio::buffers_begin(buf.data()) + static_cast<std::ptrdiff_t>(n));
      buf.consume(n);
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      std::string response = handle_frame(line, broker, store);
      response.push_back('\n');
      asio::write(sock, asio::buffer(response), ec);
      if (ec) break;
    }
    untrack(fd);
  }

  void serve_ws(tcp::socket sock) {
    const int fd = sock.native_handle();
    websocket::stream<tcp::socket> ws(std::move(sock));
    ws.read_message_max(kMaxFrameBytes);
    boost::system::error_code ec;
    ws.accept(ec);
    while (!ec && !stopping) {
      beast::flat_buffer buf;
      ws.read(buf, ec);
      if (ec) break;
      const std::string response =
          handle_frame(beast::buffers_to_string(buf.data()), broker, store);
      ws.text(true);
      ws.write(asio::buffer(response), ec);
    }
    untrack(fd);
  }

  void accept_loop(tcp::acceptor& acceptor, bool websocket_mode) {
    while (!stopping) {
      tcp::socket sock(io);
      boost::system::error_code ec;
      acceptor.accept(sock, ec);
      if (stopping) break;
      if (ec) continue;
      sock.set_option(tcp::no_delay(true), ec);
      track(sock.native_handle());
      std::lock_guard lock(mu);
      connections.emplace_back([this, s = std::move(sock), websocket_mode]() mutable {
        if (websocket_mode) {
          serve_ws(std::move(s));
        } else {
          serve_tcp(std::move(s));
        }
      });
    }
  }
};

CoordinatorServer::CoordinatorServer(Broker* broker, DataStore* store,
                                     ServerOptions options)
    : impl_(std::make_unique<Impl>(broker, store, std::move(options))) {}

CoordinatorServer::~CoordinatorServer() { stop(); }

void CoordinatorServer::start() {
  Impl& s = *impl_;
  if (s.started) return;
  s.tcp_acceptor = s.listen(s.options.tcp_port);
  s.bound_tcp = s.tcp_acceptor->local_endpoint().port();
  if (s.options.enable_websocket) {
    s.ws_acceptor = s.listen(s.options.ws_port);
    s.bound_ws = s.ws_acceptor->local_endpoint().port();
  }
  s.started = true;
  if (s.broker != nullptr && s.options.sweep_interval_ms > 0) {
    s.sweeper = std::make_unique<SweepLoop>(*s.broker, s.options.sweep_interval_ms);
  }
  s.tcp_thread = std::thread([&s] { s.accept_loop(*s.tcp_acceptor, false); });
  if (s.ws_acceptor) {
    s.ws_thread = std::thread([&s] { s.accept_loop(*s.ws_acceptor, true); });
  }
}

void CoordinatorServer::stop() {
  Impl& s = *impl_;
  if (!s.started || s.stopping.exchange(true)) return;
  // shutdown() on a listening socket wakes a blocked accept() on Linux.
  ::shutdown(s.tcp_acceptor->native_handle(), SHUT_RDWR);
  if (s.ws_acceptor) ::shutdown(s.ws_acceptor->native_handle(), SHUT_RDWR);
  if (s.tcp_thread.joinable()) s.tcp_thread.join();
  if (s.ws_thread.joinable()) s.ws_thread.join();
  {
    std::lock_guard lock(s.mu);
    for (int fd : s.live_fds) ::shutdown(fd, SHUT_RDWR);
  }
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(s.mu);
    threads.swap(s.connections);
  }
  for (auto& t : threads) t.join();
  s.sweeper.reset();
  boost::system::error_code ec;
  s.tcp_acceptor->close(ec);
  if (s.ws_acceptor) s.ws_acceptor->close(ec);
}

std::uint16_t CoordinatorServer::tcp_port() const { return impl_->bound_tcp; }

std::uint16_t CoordinatorServer::ws_port() const { return impl_->bound_ws; }

}  // namespace vc::net
