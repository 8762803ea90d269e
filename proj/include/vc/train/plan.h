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
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vc/job_model.h"
#include "vc/nn/model.h"
#include "vc/session.h"
#include "vc/train/config.h"

namespace vc::train {

struct TrainingStepPlan {
  std::uint64_t step = 0;
  std::uint64_t required_model_version = 0;
  // minibatches[j] holds the m global sample indices of mini-batch j.
  std::vector<std::vector<std::uint64_t>> minibatches;
};

std::vector<TrainingStepPlan> plan_steps(const TrainingConfig& config);

// Task ids are dense and 1-based: step k owns k*(K+1)+1 .. k*(K+1)+K for its
// maps and k*(K+1)+K+1 for its reduce, so within one model version every map
// sorts ahead of the reduce.
std::uint64_t map_task_id(const TrainingConfig& config, std::uint64_t step, std::uint32_t j);
std::uint64_t reduce_task_id(const TrainingConfig& config, std::uint64_t step);

struct MapPayload {
  std::uint64_t step = 0;
  std::uint32_t minibatch_index = 0;
};
struct ReducePayload {
  std::uint64_t step = 0;
};

Bytes encode_map_payload(const MapPayload& p);
MapPayload decode_map_payload(const Bytes& b);
Bytes encode_reduce_payload(const ReducePayload& p);
ReducePayload decode_reduce_payload(const Bytes& b);

// Every task of the job in publish order: for each step, its K maps then its
// reduce.
std::vector<TaskEnvelope> plan_tasks(const JobSpec& spec);

struct JobMeta {
  JobSpec spec;
  std::uint64_t total_steps = 0;
  int vocab_size = 0;
  std::int64_t planned_at_ms = 0;
};

nlohmann::json to_json(const JobMeta& meta);
JobMeta job_meta_from_json(const nlohmann::json& j);
JobMeta read_job_meta(Session& session, const std::string& job_id);

// Initial parameters for a job: init_params over the corpus vocabulary with
// the config's init seed.
nn::ModelParams initial_params(const TrainingConfig& config, std::string_view corpus);

// Stores corpus, sample table, metadata and model version 0, then publishes
// every task to the job's initial queue. Queues that already exist are
// reused. Bad input raises its own error (CorpusTooShort, InvalidArgument,
// ShapeMismatch); failures while storing or publishing are rethrown as
// Error(JobInitFailed). Returns the number of tasks published.
std::size_t plan_job(Session& session, const JobSpec& spec, std::string_view corpus,
                     const nn::ModelParams& initial);

// Removes a job's leftover tasks and result messages from both queues.
void teardown_job(Session& session, const JobSpec& spec);

}  // namespace vc::train
