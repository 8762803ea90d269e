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

#include "json.hpp"
#include "vc/nn/model.h"
#include "vc/nn/rmsprop.h"

namespace vc::train {

// Defaults reproduce the reference experiment: batches of 128 split into 16
// mini-batches of 8, 2048 examples per epoch, 5 epochs, learning rate 0.1,
// windows of 40 characters, two stacked LSTM layers of 50 units.
struct TrainingConfig {
  std::uint32_t batch_size = 128;
  std::uint32_t minibatch_size = 8;
  std::uint32_t minibatches_to_accumulate = 16;
  std::uint64_t examples_per_epoch = 2048;
  std::uint32_t epochs = 5;
  double learning_rate = 0.1;
  double rho = 0.9;
  double epsilon = 1e-7;
  int hidden_units = 50;
  int num_layers = 2;
  int sample_length = 40;
  std::string corpus_key = "corpus";
  std::uint64_t shuffle_seed = 1;
  std::uint64_t init_seed = 7;

  // Execution knobs. They change timing, never the numbers.
  std::uint64_t map_max_duration_ms = 30'000;
  std::uint64_t reduce_max_duration_ms = 30'000;
  std::int64_t simulated_map_delay_ms = 0;
  std::int64_t result_poll_ms = 2;

  // Throws Error(InvalidArgument).
  void validate() const;

  std::uint64_t steps_per_epoch() const { return examples_per_epoch / batch_size; }
  std::uint64_t total_steps() const { return steps_per_epoch() * epochs; }
  std::uint64_t total_examples() const { return examples_per_epoch * epochs; }

  nn::ModelConfig model_config(int vocab_size) const;
  nn::RmspropHyper hyper() const { return {learning_rate, rho, epsilon}; }
};

nlohmann::json to_json(const TrainingConfig& c);
// Missing fields keep their defaults; unknown fields are ignored.
TrainingConfig training_config_from_json(const nlohmann::json& j);

struct JobSpec {
  std::string job_id = "job";
  std::string initial_queue = "InitialQueue";
  std::string results_queue = "MapResultsQueue";
  TrainingConfig training;
};

nlohmann::json to_json(const JobSpec& spec);
JobSpec job_spec_from_json(const nlohmann::json& j);

// Where a job keeps its state in the datastore.
struct JobKeys {
  static std::string corpus(const JobSpec& spec) {
    return spec.job_id + "/" + spec.training.corpus_key;
  }
  static std::string samples(const std::string& job) { return job + "/samples"; }
  static std::string meta(const std::string& job) { return job + "/meta"; }
  static std::string model(const std::string& job) { return job + "/model"; }
  static std::string loss(const std::string& job, std::uint64_t step) {
    return job + "/loss/" + std::to_string(step);
  }
};

// The job config file: every TrainingConfig field at top level, plus
// job_id, corpus_path, and optional broker/store endpoints.
struct JobFile {
  JobSpec spec;
  std::string corpus_path;
  std::string broker = "127.0.0.1:7400";
  std::string store = "127.0.0.1:7400";
};

JobFile load_job_file(const std::string& path);
JobFile job_file_from_json(const nlohmann::json& j);

std::string read_file(const std::string& path);

}  // namespace vc::train
