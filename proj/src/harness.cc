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

#include "vc/harness.h"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <set>
#include <thread>
#include <tuple>

#include "vc/errors.h"
#include "vc/net/server.h"
#include "vc/rng.h"
#include "vc/train/handlers.h"
#include "vc/train/plan.h"

extern char** environ;

namespace vc::harness {

using Clock = std::chrono::steady_clock;

void ChurnSchedule::validate() const {
  std::set<std::string> ids;
  for (const ChurnEntry& e : entries) {
    if (e.worker_id.empty() || !ids.insert(e.worker_id).second) {
      throw Error(ErrorCode::InvalidArgument, "worker ids must be unique and non-empty");
    }
    if (e.join_at_ms < 0 || (e.leave_at_ms && *e.leave_at_ms <= e.join_at_ms)) {
      throw Error(ErrorCode::InvalidArgument, "join_at must precede leave_at");
    }
  }
}

ChurnSchedule ChurnSchedule::sync_start(int n) { return async_start(n, 0); }

ChurnSchedule ChurnSchedule::async_start(int n, std::int64_t stagger_ms) {
  ChurnSchedule s;
  for (int i = 0; i < n; ++i) {
    s.entries.push_back({"w" + std::to_string(i), i * stagger_ms, std::nullopt, LeaveMode::Clean});
  }
  return s;
}

ChurnSchedule ChurnSchedule::with_kills(int victims, std::int64_t from_ms, std::int64_t to_ms,
                                        std::uint64_t seed) const {
  if (victims < 0 || static_cast<std::size_t>(victims) > entries.size() || to_ms <= from_ms) {
    throw Error(ErrorCode::InvalidArgument, "kill plan");
  }
  ChurnSchedule s = *this;
  Rng rng(seed, 0x6b11);
  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Partial Fisher-Yates: the first `victims` slots are the chosen workers.
  for (std::size_t i = 0; i < static_cast<std::size_t>(victims); ++i) {
    std::swap(order[i], order[i + rng.below(order.size() - i)]);
  }
  for (int v = 0; v < victims; ++v) {
    ChurnEntry& e = s.entries[order[static_cast<std::size_t>(v)]];
    const std::int64_t lo = std::max(from_ms, e.join_at_ms + 1);
    e.leave_at_ms = lo + static_cast<std::int64_t>(
                             rng.below(static_cast<std::uint64_t>(std::max<std::int64_t>(1, to_ms - lo))));
    e.leave_mode = LeaveMode::Kill;
  }
  return s;
}

std::string_view to_string(StartMode m) { return m == StartMode::Sync ? "sync" : "async"; }

namespace {

std::int64_t since(Clock::time_point origin) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - origin).count();
}

std::int64_t epoch_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// One fleet member, thread or process.
struct Member {
  ChurnEntry entry;
  bool joined = false;
  bool left = false;
  std::int64_t joined_at = 0;
  // thread mode
  std::unique_ptr<std::atomic<bool>> stop = std::make_unique<std::atomic<bool>>(false);
  std::shared_ptr<KillSwitch> kill = std::make_shared<KillSwitch>();
  std::thread thread;
  WorkerReport report;
  // process mode
  pid_t pid = -1;
  std::string events_path;
};

pid_t spawn(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  for (const std::string& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  pid_t pid = -1;
  if (posix_spawn(&pid, argv[0], nullptr, nullptr, argv.data(), environ) != 0) {
    throw Error(ErrorCode::InvalidArgument, "cannot spawn " + args[0]);
  }
  return pid;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentOptions& options) {
  options.churn.validate();
  const train::JobSpec& spec = options.job;
  const std::string model_key = train::JobKeys::model(spec.job_id);

  Broker broker(std::make_shared<SteadyClock>());
  DataStore store;
  LocalSession initiator(broker, store);

  ExperimentResult res;
  res.tasks_published =
      train::plan_job(initiator, spec, options.corpus, train::initial_params(spec.training, options.corpus));
  const std::uint64_t total_steps = spec.training.total_steps();

  const bool subprocess = !options.worker_binary.empty();
  std::unique_ptr<SweepLoop> sweep;
  std::unique_ptr<net::CoordinatorServer> server;
  if (subprocess) {
    net::ServerOptions so;
    so.sweep_interval_ms = options.sweep_interval_ms;
    server = std::make_unique<net::CoordinatorServer>(&broker, &store, so);
    server->start();
  } else {
    sweep = std::make_unique<SweepLoop>(broker, options.sweep_interval_ms);
  }

  train::TrainingHandlers training({options.compute_threads});
  train::HandlerTable table;
  training.install(table);
  table[TaskKind::custom(std::string(train::kLinearSoftmaxKind)).str()] = train::run_linear_softmax;

  std::vector<Member> fleet(options.churn.entries.size());
  for (std::size_t i = 0; i < fleet.size(); ++i) fleet[i].entry = options.churn.entries[i];

  const auto origin = Clock::now();
  const std::int64_t origin_epoch = epoch_ms();

  auto join = [&](std::size_t i) {
    Member& m = fleet[i];
    m.joined = true;
    m.joined_at = since(origin);
    WorkerConfig wc;
    wc.worker_id = m.entry.worker_id;
    wc.queues = {spec.initial_queue};
    wc.poll_backoff_ms = options.poll_backoff_ms;
    wc.job_id = spec.job_id;
    LatencyModel lat = options.latency;
    lat.seed = options.latency.seed * 1000003ULL + i;
    if (!subprocess) {
      m.thread = std::thread([&, wc, lat, i] {
        Member& self = fleet[i];
        FaultySession session(std::make_unique<LocalSession>(broker, store), lat, self.kill);
        WorkerControl ctl;
        ctl.origin = origin;
        ctl.stop = self.stop.get();
        self.report = run_worker(wc, session, table, ctl);
      });
      return;
    }
    const std::string ep = "127.0.0.1:" + std::to_string(server->tcp_port());
    m.events_path = options.scratch_dir + "/events-" + spec.job_id + "-" + m.entry.worker_id + "-" +
                    std::to_string(origin_epoch) + ".csv";
    m.pid = spawn({options.worker_binary, "--id", wc.worker_id, "--broker", ep, "--store", ep,
                   "--queues", spec.initial_queue, "--job", spec.job_id, "--events-out",
                   m.events_path, "--origin-epoch-ms", std::to_string(origin_epoch),
                   "--backoff-ms", std::to_string(wc.poll_backoff_ms), "--latency-ms",
                   std::to_string(lat.min_ms) + ".." + std::to_string(lat.max_ms),
                   "--latency-seed", std::to_string(lat.seed), "--threads",
                   std::to_string(options.compute_threads)});
  };

  auto leave = [&](Member& m, LeaveMode mode) {
    if (!m.joined || m.left) return;
    m.left = true;
    if (subprocess) {
      ::kill(m.pid, mode == LeaveMode::Kill ? SIGKILL : SIGTERM);
    } else if (mode == LeaveMode::Kill) {
      m.kill->kill();
    } else {
      m.stop->store(true);
    }
  };

  auto shutdown = [&] {
    for (Member& m : fleet) {
      if (!m.joined) continue;
      if (!m.left) leave(m, LeaveMode::Clean);
      if (m.thread.joinable()) m.thread.join();
      if (m.pid > 0) {
        int status = 0;
        ::waitpid(m.pid, &status, 0);
      }
    }
  };

  std::uint64_t last_version = 0;
  auto last_progress = Clock::now();
  try {
    while (true) {
      const std::int64_t now = since(origin);
      for (std::size_t i = 0; i < fleet.size(); ++i) {
        Member& m = fleet[i];
        if (!m.joined && now >= m.entry.join_at_ms) join(i);
        if (m.joined && m.entry.leave_at_ms && now >= *m.entry.leave_at_ms) leave(m, m.entry.leave_mode);
      }
      const std::uint64_t v = store.current_version(model_key).value_or(0);
      if (v >= total_steps) break;
      if (v != last_version) {
        last_version = v;
        last_progress = Clock::now();
      } else if (Clock::now() - last_progress > std::chrono::milliseconds(options.stall_window_ms)) {
        throw Error(ErrorCode::ExperimentStalled,
                    "model stuck at version " + std::to_string(v) + " of " + std::to_string(total_steps));
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  } catch (...) {
    for (Member& m : fleet) leave(m, LeaveMode::Kill);
    shutdown();
    throw;
  }
  shutdown();
  if (server) server->stop();
  sweep.reset();

  std::int64_t first_start = std::numeric_limits<std::int64_t>::max();
  for (Member& m : fleet) {
    if (!m.joined) continue;
    first_start = std::min(first_start, m.joined_at);
    if (subprocess) {
      std::ifstream in(m.events_path);
      if (in) {
        for (RunEvent& e : read_events_csv(in)) res.events.push_back(std::move(e));
      }
      std::remove(m.events_path.c_str());
      WorkerReport r;
      r.worker_id = m.entry.worker_id;
      r.t_join = m.joined_at;
      res.reports.push_back(r);
    } else {
      for (const RunEvent& e : m.report.events) res.events.push_back(e);
      res.reports.push_back(std::move(m.report));
    }
  }
  std::sort(res.events.begin(), res.events.end(), [](const RunEvent& a, const RunEvent& b) {
    return std::tie(a.t_start, a.worker_id) < std::tie(b.t_start, b.worker_id);
  });

  std::int64_t last_ack = first_start;
  std::map<std::pair<std::string, std::uint64_t>, std::uint64_t> done;
  for (const RunEvent& e : res.events) {
    if (e.outcome != TaskOutcome::Ok) continue;
    last_ack = std::max(last_ack, e.t_end);
    ++done[{e.kind, e.task_id}];
  }
  ScalingRow& row = res.row;
  row.workers = static_cast<int>(fleet.size());
  row.runtime_ms = fleet.empty() ? 0 : last_ack - first_start;
  for (const auto& [key, count] : done) {
    if (key.first == "map") ++row.map_tasks;
    if (key.first == "reduce") ++row.reduce_tasks;
    row.reexecutions += count - 1;
  }

  res.final_model = nn::decode_model(store.get_versioned(model_key).payload);
  res.trace = train::read_loss_trace(initiator, spec.job_id);
  row.final_loss = train::final_loss(res.trace);
  res.initial_depth_after = broker.depth(spec.initial_queue);
  res.results_depth_after = broker.depth(spec.results_queue);
  train::teardown_job(initiator, spec);
  return res;
}

double time_sequential(const train::JobSpec& job, const std::string& corpus,
                       train::TrainResult* out) {
  const auto t0 = Clock::now();
  train::TrainResult r =
      train::sequential_train(job.training, corpus, train::initial_params(job.training, corpus), 1);
  const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  if (out) *out = std::move(r);
  return ms;
}

ScalingReport scaling_suite(const ExperimentOptions& base, const std::vector<int>& worker_counts,
                            const std::vector<StartMode>& modes, std::int64_t async_stagger_ms,
                            double sequential_ms) {
  ScalingReport rep;
  for (StartMode mode : modes) {
    const std::size_t first = rep.rows.size();
    for (int n : worker_counts) {
      ExperimentOptions opt = base;
      opt.churn = mode == StartMode::Sync ? ChurnSchedule::sync_start(n)
                                          : ChurnSchedule::async_start(n, async_stagger_ms);
      ExperimentResult r = run_experiment(opt);
      r.row.mode = std::string(to_string(mode));
      rep.rows.push_back(r.row);
      rep.events.push_back(std::move(r.events));
    }
    double t1 = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = first; i < rep.rows.size(); ++i) {
      if (rep.rows[i].workers == 1) t1 = static_cast<double>(rep.rows[i].runtime_ms);
    }
    for (std::size_t i = first; i < rep.rows.size(); ++i) {
      ScalingRow& r = rep.rows[i];
      const double tn = static_cast<double>(std::max<std::int64_t>(1, r.runtime_ms));
      r.relative_speedup = t1 / tn;
      r.efficiency = r.relative_speedup / r.workers;
      r.absolute_speedup = sequential_ms > 0 ? sequential_ms / tn
                                             : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return rep;
}

TimelineSummary summarize_timeline(
    const std::vector<RunEvent>& events,
    const std::map<std::string, std::pair<std::int64_t, std::int64_t>>& lifetimes) {
  std::map<std::string, std::vector<const RunEvent*>> by_worker;
  for (const RunEvent& e : events) {
    if (e.worker_id.empty()) throw Error(ErrorCode::MalformedEvents, "event without worker id");
    if (e.t_start > e.t_end) {
      throw Error(ErrorCode::MalformedEvents, "t_start after t_end in " + e.worker_id);
    }
    by_worker[e.worker_id].push_back(&e);
  }
  for (const auto& [id, span] : lifetimes) {
    if (span.first > span.second) throw Error(ErrorCode::MalformedEvents, "lifetime of " + id);
    by_worker[id];
  }

  TimelineSummary s;
  std::int64_t busy_total = 0, life_total = 0;
  for (auto& [id, evs] : by_worker) {
    std::sort(evs.begin(), evs.end(),
              [](const RunEvent* a, const RunEvent* b) {
                return std::tie(a->t_start, a->t_end) < std::tie(b->t_start, b->t_end);
              });
    WorkerUtilization w;
    w.worker_id = id;
    for (std::size_t i = 0; i < evs.size(); ++i) {
      if (i > 0 && evs[i]->t_start < evs[i - 1]->t_end) {
        throw Error(ErrorCode::MalformedEvents, "overlapping events in " + id);
      }
      w.busy_ms += evs[i]->t_end - evs[i]->t_start;
      ++w.per_kind[evs[i]->kind];
      ++s.per_kind[evs[i]->kind];
    }
    w.tasks = evs.size();
    if (auto it = lifetimes.find(id); it != lifetimes.end()) {
      w.lifetime_ms = it->second.second - it->second.first;
      if (!evs.empty() && (evs.front()->t_start < it->second.first ||
                           evs.back()->t_end > it->second.second)) {
        throw Error(ErrorCode::MalformedEvents, "event outside the lifetime of " + id);
      }
    } else if (!evs.empty()) {
      std::int64_t end = 0;
      for (const RunEvent* e : evs) end = std::max(end, e->t_end);
      w.lifetime_ms = end - evs.front()->t_start;
    }
    w.utilization = w.lifetime_ms > 0 ? static_cast<double>(w.busy_ms) / w.lifetime_ms : 0.0;
    w.idle_fraction = 1.0 - w.utilization;
    busy_total += w.busy_ms;
    life_total += w.lifetime_ms;
    s.workers.push_back(std::move(w));
  }
  s.overall_utilization = life_total > 0 ? static_cast<double>(busy_total) / life_total : 0.0;
  return s;
}

void write_report_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
  out << "mode,workers,runtime_ms,relative_speedup,efficiency,absolute_speedup,final_loss,"
         "map_tasks,reduce_tasks,reexecutions\n";
  out << std::setprecision(17);
  for (const ScalingRow& r : rows) {
    out << r.mode << ',' << r.workers << ',' << r.runtime_ms << ',' << r.relative_speedup << ','
        << r.efficiency << ',' << r.absolute_speedup << ',' << r.final_loss << ',' << r.map_tasks
        << ',' << r.reduce_tasks << ',' << r.reexecutions << '\n';
  }
}

void write_timeline_csv(std::ostream& out, const TimelineSummary& summary) {
  out << "worker_id,tasks,busy_ms,lifetime_ms,utilization,idle_fraction,map,reduce\n";
  for (const WorkerUtilization& w : summary.workers) {
    auto count = [&](const char* k) {
      auto it = w.per_kind.find(k);
      return it == w.per_kind.end() ? 0 : it->second;
    };
    out << w.worker_id << ',' << w.tasks << ',' << w.busy_ms << ',' << w.lifetime_ms << ','
        << w.utilization << ',' << w.idle_fraction << ',' << count("map") << ','
        << count("reduce") << '\n';
  }
}

}  // namespace vc::harness
