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

#include "vc/worker.h"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "vc/errors.h"
#include "vc/train/plan.h"

namespace vc {

using Steady = std::chrono::steady_clock;

void WorkerConfig::validate() const {
  if (worker_id.empty()) throw Error(ErrorCode::InvalidArgument, "empty worker id");
  if (worker_id.find_first_of(",\n") != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "worker id may not contain ',' or newlines");
  }
  if (queues.empty()) throw Error(ErrorCode::InvalidArgument, "no queues to poll");
  if (poll_backoff_ms <= 0) throw Error(ErrorCode::InvalidArgument, "poll backoff must be > 0");
  if (reconnect_backoff_ms <= 0 || max_reconnects < 0) {
    throw Error(ErrorCode::InvalidArgument, "reconnect policy");
  }
}

std::string_view to_string(ExitReason r) {
  switch (r) {
    case ExitReason::JobComplete: return "job_complete";
    case ExitReason::MaxTasks: return "max_tasks";
    case ExitReason::MaxWallTime: return "max_wall_time";
    case ExitReason::Stopped: return "stopped";
    case ExitReason::Killed: return "killed";
    case ExitReason::ConnectionLost: return "connection_lost";
  }
  return "unknown";
}

bool detect_job_complete(Session& session, const std::string& job_id) {
  try {
    const train::JobMeta meta = train::read_job_meta(session, job_id);
    return session.get_versioned(train::JobKeys::model(job_id)).version == meta.total_steps;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoSuchKey) return false;
    throw;
  }
}

namespace {

std::int64_t since(Steady::time_point origin) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Steady::now() - origin).count();
}

}  // namespace

WorkerReport run_worker(const WorkerConfig& config, Session& session,
                        const train::HandlerTable& handlers, WorkerControl control) {
  config.validate();
  WorkerReport rep;
  rep.worker_id = config.worker_id;
  rep.t_join = since(control.origin);
  const auto started = Steady::now();
  int failures = 0;

  auto finish = [&](ExitReason why) {
    rep.exit = why;
    rep.t_leave = since(control.origin);
    return rep;
  };

  while (true) {
    if (control.stop && control.stop->load()) return finish(ExitReason::Stopped);
    if (config.max_tasks && rep.tasks_done + rep.tasks_failed >= config.max_tasks) {
      return finish(ExitReason::MaxTasks);
    }
    if (config.max_wall_ms > 0 && Steady::now() - started >= std::chrono::milliseconds(config.max_wall_ms)) {
      return finish(ExitReason::MaxWallTime);
    }
    try {
      std::optional<Lease> lease;
      for (const std::string& q : config.queues) {
        if ((lease = session.fetch(q, config.worker_id))) break;
      }
      failures = 0;
      if (!lease) {
        if (!config.job_id.empty() && detect_job_complete(session, config.job_id)) {
          return finish(ExitReason::JobComplete);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(config.poll_backoff_ms));
        continue;
      }

      RunEvent ev{config.worker_id, lease->task.task_id, lease->task.kind.str(),
                  since(control.origin), 0, TaskOutcome::Failed, lease->task.delivery_count};
      const train::TaskContext ctx{
          config.worker_id,
          Steady::now() + std::chrono::milliseconds(lease->task.max_duration_ms)};
      auto record = [&](TaskOutcome o) {
        ev.outcome = o;
        ev.t_end = since(control.origin);
        rep.events.push_back(ev);
        if (control.on_event) control.on_event(ev);
        (o == TaskOutcome::Ok ? rep.tasks_done : rep.tasks_failed)++;
      };

      const auto h = handlers.find(lease->task.kind.str());
      if (h == handlers.end()) {
        record(TaskOutcome::Failed);
        continue;
      }
      try {
        h->second(session, lease->task, ctx);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::WorkerKilled) throw;
        record(TaskOutcome::Failed);
        if (e.code() == ErrorCode::ConnectionLost) throw;
        continue;
      } catch (const std::exception&) {
        record(TaskOutcome::Failed);
        continue;
      }
      try {
        session.ack(lease->lease_id);
        record(TaskOutcome::Ok);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UnknownLease) throw;
        // The lease ran out while we worked; the broker has redelivered it.
        record(TaskOutcome::Failed);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::WorkerKilled) return finish(ExitReason::Killed);
      if (e.code() != ErrorCode::ConnectionLost) throw;
      if (++failures > config.max_reconnects) return finish(ExitReason::ConnectionLost);
      const std::int64_t wait =
          std::min(config.reconnect_backoff_cap_ms,
                   config.reconnect_backoff_ms << std::min(failures - 1, 20));
      std::this_thread::sleep_for(std::chrono::milliseconds(wait));
      try {
        session.reconnect();
      } catch (const Error& re) {
        if (re.code() == ErrorCode::WorkerKilled) return finish(ExitReason::Killed);
        if (re.code() != ErrorCode::ConnectionLost) throw;
      }
    }
  }
}

void write_events_csv(std::ostream& out, const std::vector<RunEvent>& events, bool header) {
  if (header) out << "worker_id,task_id,kind,t_start_ms,t_end_ms,outcome,delivery_count\n";
  for (const RunEvent& e : events) {
    out << e.worker_id << ',' << e.task_id << ',' << e.kind << ',' << e.t_start << ','
        << e.t_end << ',' << (e.outcome == TaskOutcome::Ok ? "ok" : "failed") << ','
        << e.delivery_count << '\n';
  }
}

std::vector<RunEvent> read_events_csv(std::istream& in) {
  std::vector<RunEvent> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw Error(ErrorCode::MalformedEvents, "bad event row: " + line);
    try {
      RunEvent e;
      e.worker_id = f[0];
      e.task_id = std::stoull(f[1]);
      e.kind = f[2];
      e.t_start = std::stoll(f[3]);
      e.t_end = std::stoll(f[4]);
      if (f[5] != "ok" && f[5] != "failed") throw std::invalid_argument("outcome");
      e.outcome = f[5] == "ok" ? TaskOutcome::Ok : TaskOutcome::Failed;
      e.delivery_count = static_cast<std::uint32_t>(std::stoul(f[6]));
      out.push_back(std::move(e));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::MalformedEvents, "bad event row: " + line);
    }
  }
  return out;
}

}  // namespace vc
