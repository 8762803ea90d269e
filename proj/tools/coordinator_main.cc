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

#include <csignal>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "vc/net/server.h"

namespace {

std::atomic<bool> g_stop{false};

void on_term(int) { g_stop.store(true); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Queue server and data server over framed JSON"};
  vc::net::ServerOptions opts;
  opts.tcp_port = 7400;
  int ws_port = -1;
  std::string role = "both";
  app.add_option("--bind", opts.bind, "Listen address");
  app.add_option("--tcp-port", opts.tcp_port, "TCP port (0: ephemeral)");
  app.add_option("--ws-port", ws_port, "WebSocket port (omit to disable, 0: ephemeral)");
  app.add_option("--role", role, "both, broker or store")
      ->check(CLI::IsMember({"both", "broker", "store"}));
  app.add_option("--sweep-ms", opts.sweep_interval_ms, "Lease sweep period");
  CLI11_PARSE(app, argc, argv);

  if (ws_port >= 0) {
    opts.enable_websocket = true;
    opts.ws_port = static_cast<std::uint16_t>(ws_port);
  }
  vc::Broker broker(std::make_shared<vc::SteadyClock>());
  vc::DataStore store;
  vc::net::CoordinatorServer server(role == "store" ? nullptr : &broker,
                                    role == "broker" ? nullptr : &store, opts);
  std::signal(SIGTERM, on_term);
  std::signal(SIGINT, on_term);
  try {
    server.start();
  } catch (const std::exception& e) {
    std::cerr << "coordinator: " << e.what() << "\n";
    return 1;
  }
  std::cout << "tcp " << server.tcp_port();
  if (opts.enable_websocket) std::cout << " ws " << server.ws_port();
  std::cout << std::endl;
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}
