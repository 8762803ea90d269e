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

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "vc/job_model.h"
#include "vc/session.h"
#include "vc/train/dataset.h"
#include "vc/train/plan.h"
#include "vc/train/sequential.h"

namespace vc::train {

// What a handler knows about the lease it is working under.
struct TaskContext {
  std::string worker_id;
  // Local estimate of the lease deadline; work past it is wasted because
  // the broker will already have handed the task to someone else.
  std::chrono::steady_clock::time_point deadline;
};

// Returning normally means "ack the task"; throwing means "leave it to
// expire". The worker owns the ack.
using Handler =
    std::function<void(Session&, const TaskEnvelope&, const TaskContext&)>;

// Keyed by TaskKind::str().
using HandlerTable = std::map<std::string, Handler>;

inline constexpr std::string_view kMapResultKind = "map-result";
inline constexpr std::string_view kLinearSoftmaxKind = "linear-softmax-grad";

struct HandlerOptions {
  int compute_threads = 1;  // OpenMP threads inside one map task
  // Reduce checks whether another reduce already advanced the model at
  // this period while it waits for results.
  std::int64_t reduce_version_check_ms = 50;
};

// Task id of the result envelope a map publishes for one delivery of a map
// task. Redeliveries get distinct ids, so duplicates stay distinguishable in
// the broker.
std::uint64_t result_task_id(std::uint64_t map_task_id, std::uint32_t delivery_count);

// The map and reduce handlers of the training job. Job data (corpus, sample
// table, metadata) is fetched from the datastore on first use and cached per
// job id; the model is always read fresh at the version the task pins.
class TrainingHandlers {
 public:
  explicit TrainingHandlers(HandlerOptions options = {});

  void run_map(Session& session, const TaskEnvelope& task, const TaskContext& ctx);
  void run_reduce(Session& session, const TaskEnvelope& task, const TaskContext& ctx);

  // Registers map and reduce. The object must outlive the table.
  void install(HandlerTable& table);

 private:
  struct JobData {
    JobMeta meta;
    std::string corpus;
    Dataset data;
    nn::ModelConfig model;
  };

  std::shared_ptr<const JobData> job_data(Session& session, const std::string& job_id);

  HandlerOptions options_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const JobData>> jobs_;
};

// Per-step loss records written by the reduces, in step order. Missing
// steps raise Error(NoSuchKey).
std::vector<LossPoint> read_loss_trace(Session& session, const std::string& job_id);

// The demo handler shared with the browser client. The payload is JSON
//   {"classes": C, "dim": D, "weights": [C*D], "bias": [C],
//    "features": [[D] ...], "labels": [...], "result_key": "..."}
// and the handler stores {"grad_weights": [C*D], "grad_bias": [C],
// "loss_sum": x, "count": n} under result_key: the summed softmax
// cross-entropy gradient of the linear model.
void run_linear_softmax(Session& session, const TaskEnvelope& task, const TaskContext& ctx);
nlohmann::json linear_softmax_gradient(const nlohmann::json& payload);

}  // namespace vc::train
