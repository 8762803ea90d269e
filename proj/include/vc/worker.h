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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "vc/session.h"
#include "vc/train/handlers.h"

namespace vc {

struct WorkerConfig {
  std::string worker_id;
  std::string broker = "127.0.0.1:7400";
  std::string store = "127.0.0.1:7400";
  std::vector<std::string> queues{std::string(kInitialQueue)};
  std::int64_t poll_backoff_ms = 50;
  std::uint64_t max_tasks = 0;      // 0: unlimited
  std::int64_t max_wall_ms = 0;     // 0: unlimited
  // When set, the worker exits once this job's model reaches its last
  // version and every polled queue is empty.
  std::string job_id;
  // ConnectionLost retries: backoff doubles from the first value up to the
  // cap; the worker gives up after max_reconnects consecutive failures.
  std::int64_t reconnect_backoff_ms = 50;
  std::int64_t reconnect_backoff_cap_ms = 2000;
  int max_reconnects = 10;

  // Throws Error(InvalidArgument).
  void validate() const;
};

enum class TaskOutcome { Ok, Failed };

struct RunEvent {
  std::string worker_id;
  std::uint64_t task_id = 0;
  std::string kind;
  std::int64_t t_start = 0;  // ms since the run's origin
  std::int64_t t_end = 0;
  TaskOutcome outcome = TaskOutcome::Ok;
  std::uint32_t delivery_count = 0;

  bool operator==(const RunEvent&) const = default;
};

enum class ExitReason { JobComplete, MaxTasks, MaxWallTime, Stopped, Killed, ConnectionLost };

std::string_view to_string(ExitReason r);

struct WorkerReport {
  std::string worker_id;
  std::uint64_t tasks_done = 0;
  std::uint64_t tasks_failed = 0;
  ExitReason exit = ExitReason::Stopped;
  std::vector<RunEvent> events;
  std::int64_t t_join = 0;
  std::int64_t t_leave = 0;
};

struct WorkerControl {
  // Event timestamps are measured from here.
  std::chrono::steady_clock::time_point origin = std::chrono::steady_clock::now();
  // Clean leave: finish the task in hand, then exit.
  const std::atomic<bool>* stop = nullptr;
  // Called as each event is recorded, e.g. to stream it to disk.
  std::function<void(const RunEvent&)> on_event;
};

// fetch -> execute -> ack, one task at a time. A handler that throws leaves
// its task unacknowledged; an Error(WorkerKilled) from the session ends the
// loop immediately.
WorkerReport run_worker(const WorkerConfig& config, Session& session,
                        const train::HandlerTable& handlers, WorkerControl control = {});

// True iff the job's model version equals its planned step count.
bool detect_job_complete(Session& session, const std::string& job_id);

// Columns: worker_id,task_id,kind,t_start_ms,t_end_ms,outcome,delivery_count.
void write_events_csv(std::ostream& out, const std::vector<RunEvent>& events,
                      bool header = true);
std::vector<RunEvent> read_events_csv(std::istream& in);

}  // namespace vc
