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
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "vc/errors.h"
#include "vc/net/client.h"
#include "vc/worker.h"

namespace {

std::atomic<bool> g_stop{false};

void on_term(int) { g_stop.store(true); }

vc::LatencyModel parse_latency(const std::string& text, std::uint64_t seed) {
  vc::LatencyModel m;
  m.seed = seed;
  const auto dots = text.find("..");
  m.min_ms = std::stoll(text.substr(0, dots));
  m.max_ms = dots == std::string::npos ? m.min_ms : std::stoll(text.substr(dots + 2));
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volunteer worker: fetch, execute, ack"};
  vc::WorkerConfig wc;
  std::string queues = std::string(vc::kInitialQueue);
  std::string events_out, latency = "0";
  double max_seconds = 0;
  std::int64_t origin_epoch_ms = 0;
  std::uint64_t latency_seed = 0;
  int threads = 1;
  app.add_option("--id", wc.worker_id, "Worker id")->required();
  app.add_option("--broker", wc.broker, "Broker host:port");
  app.add_option("--store", wc.store, "Datastore host:port");
  app.add_option("--queues", queues, "Comma-separated queues, polled in order");
  app.add_option("--max-tasks", wc.max_tasks, "Exit after this many tasks (0: no limit)");
  app.add_option("--max-seconds", max_seconds, "Exit after this much wall time (0: no limit)");
  app.add_option("--events-out", events_out, "Append task events to this CSV");
  app.add_option("--job", wc.job_id, "Exit once this job has finished");
  app.add_option("--backoff-ms", wc.poll_backoff_ms, "Sleep when every queue is empty");
  app.add_option("--latency-ms", latency, "Added delay per message, N or A..B");
  app.add_option("--latency-seed", latency_seed, "Seed of the latency draw");
  app.add_option("--origin-epoch-ms", origin_epoch_ms, "Event timestamps relative to this Unix time");
  app.add_option("--threads", threads, "Compute threads per task");
  CLI11_PARSE(app, argc, argv);

  wc.queues.clear();
  std::stringstream ss(queues);
  for (std::string q; std::getline(ss, q, ',');) {
    if (!q.empty()) wc.queues.push_back(q);
  }
  wc.max_wall_ms = static_cast<std::int64_t>(max_seconds * 1000);

  std::signal(SIGTERM, on_term);
  std::signal(SIGINT, on_term);

  try {
    wc.validate();
    std::unique_ptr<vc::Session> remote;
    for (int attempt = 0;; ++attempt) {
      try {
        remote = std::make_unique<vc::net::RemoteSession>(vc::net::Endpoint::parse(wc.broker),
                                                          vc::net::Endpoint::parse(wc.store));
        break;
      } catch (const vc::Error& e) {
        if (e.code() != vc::ErrorCode::ConnectionLost || attempt >= wc.max_reconnects) throw;
        std::this_thread::sleep_for(std::chrono::milliseconds(wc.reconnect_backoff_ms << std::min(attempt, 5)));
      }
    }
    vc::FaultySession session(std::move(remote), parse_latency(latency, latency_seed),
                              std::make_shared<vc::KillSwitch>());

    vc::train::TrainingHandlers training({threads});
    vc::train::HandlerTable table;
    training.install(table);
    table[vc::TaskKind::custom(std::string(vc::train::kLinearSoftmaxKind)).str()] =
        vc::train::run_linear_softmax;

    vc::WorkerControl ctl;
    ctl.stop = &g_stop;
    if (origin_epoch_ms > 0) {
      const auto now_epoch = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::system_clock::now().time_since_epoch())
                                 .count();
      ctl.origin = std::chrono::steady_clock::now() -
                   std::chrono::milliseconds(now_epoch - origin_epoch_ms);
    }
    std::ofstream events;
    if (!events_out.empty()) {
      events.open(events_out, std::ios::trunc);
      vc::write_events_csv(events, {});
      events.flush();
      ctl.on_event = [&](const vc::RunEvent& e) {
        vc::write_events_csv(events, {e}, false);
        events.flush();
      };
    }
    const vc::WorkerReport rep = vc::run_worker(wc, session, table, ctl);
    std::cerr << wc.worker_id << ": " << rep.tasks_done << " done, " << rep.tasks_failed
              << " failed, exit " << vc::to_string(rep.exit) << "\n";
    return rep.exit == vc::ExitReason::ConnectionLost ? 2 : 0;
  } catch (const std::exception& e) {
    std::cerr << "worker: " << e.what() << "\n";
    return 1;
  }
}
