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
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vc/nn/codec.h"
#include "vc/session.h"
#include "vc/train/config.h"
#include "vc/train/sequential.h"
#include "vc/worker.h"

namespace vc::harness {

enum class LeaveMode { Clean, Kill };

struct ChurnEntry {
  std::string worker_id;
  std::int64_t join_at_ms = 0;
  std::optional<std::int64_t> leave_at_ms;
  LeaveMode leave_mode = LeaveMode::Clean;
};

struct ChurnSchedule {
  std::vector<ChurnEntry> entries;

  // Throws Error(InvalidArgument) on duplicate ids or leave_at <= join_at.
  void validate() const;

  // n workers "w0".."w{n-1}" present from the start.
  static ChurnSchedule sync_start(int n);
  // Worker i joins at i * stagger_ms.
  static ChurnSchedule async_start(int n, std::int64_t stagger_ms);
  // Kills `victims` distinct workers of the schedule at seeded uniform times
  // in [from_ms, to_ms).
  ChurnSchedule with_kills(int victims, std::int64_t from_ms, std::int64_t to_ms,
                           std::uint64_t seed) const;
};

enum class StartMode { Sync, Async };
std::string_view to_string(StartMode m);

struct ExperimentOptions {
  train::JobSpec job;
  std::string corpus;
  ChurnSchedule churn;
  LatencyModel latency;
  std::int64_t sweep_interval_ms = 20;
  std::int64_t poll_backoff_ms = 50;
  int compute_threads = 1;
  // ExperimentStalled when the model version does not move for this long.
  std::int64_t stall_window_ms = 60'000;
  // Subprocess mode: spawn this worker binary per churn entry against an
  // in-process TCP coordinator. Empty means thread-per-worker.
  std::string worker_binary;
  std::string scratch_dir = "/tmp";
};

struct ScalingRow {
  std::string mode;
  int workers = 0;
  std::int64_t runtime_ms = 0;
  double relative_speedup = 0.0;
  double efficiency = 0.0;
  double absolute_speedup = 0.0;
  double final_loss = 0.0;
  std::uint64_t map_tasks = 0;     // distinct map task ids completed
  std::uint64_t reduce_tasks = 0;  // distinct reduce task ids completed
  std::uint64_t reexecutions = 0;  // completions beyond the first per task id
};

struct ExperimentResult {
  ScalingRow row;
  std::vector<RunEvent> events;
  std::vector<WorkerReport> reports;
  nn::ModelRecord final_model;
  std::vector<train::LossPoint> trace;
  std::uint64_t tasks_published = 0;
  QueueDepth initial_depth_after;
  QueueDepth results_depth_after;
};

// Plans the job on a fresh broker and datastore, runs the fleet per the
// churn schedule, waits for the last model version, stops the fleet and
// measures T from the first worker start to the last acknowledged task.
ExperimentResult run_experiment(const ExperimentOptions& options);

struct ScalingReport {
  std::vector<ScalingRow> rows;
  std::vector<std::vector<RunEvent>> events;  // parallel to rows
};

// One experiment per (mode, n). S(n) is measured against the n = 1 row of
// the same mode (NaN when absent), A(n) against sequential_ms when > 0.
ScalingReport scaling_suite(const ExperimentOptions& base, const std::vector<int>& worker_counts,
                            const std::vector<StartMode>& modes, std::int64_t async_stagger_ms,
                            double sequential_ms);

// Wall time of sequential_train on the job, single compute thread.
double time_sequential(const train::JobSpec& job, const std::string& corpus,
                       train::TrainResult* out = nullptr);

struct WorkerUtilization {
  std::string worker_id;
  std::uint64_t tasks = 0;
  std::int64_t busy_ms = 0;
  std::int64_t lifetime_ms = 0;
  double utilization = 0.0;
  double idle_fraction = 1.0;
  std::map<std::string, std::uint64_t> per_kind;
};

struct TimelineSummary {
  std::vector<WorkerUtilization> workers;  // sorted by worker_id
  std::map<std::string, std::uint64_t> per_kind;
  double overall_utilization = 0.0;  // total busy over total lifetime
};

// Lifetime per worker defaults to the span from its first task start to its
// last task end; pass explicit (join, leave) spans to count idle time outside
// that. Throws Error(MalformedEvents) on t_start > t_end, an empty worker id
// or overlapping events of one worker.
TimelineSummary summarize_timeline(
    const std::vector<RunEvent>& events,
    const std::map<std::string, std::pair<std::int64_t, std::int64_t>>& lifetimes = {});

// Columns: mode,workers,runtime_ms,relative_speedup,efficiency,
// absolute_speedup,final_loss,map_tasks,reduce_tasks,reexecutions.
void write_report_csv(std::ostream& out, const std::vector<ScalingRow>& rows);

// Columns: worker_id,tasks,busy_ms,lifetime_ms,utilization,idle_fraction,
// map,reduce.
void write_timeline_csv(std::ostream& out, const TimelineSummary& summary);

}  // namespace vc::harness
