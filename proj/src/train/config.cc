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

#include "vc/train/config.h"

#include <fstream>
#include <sstream>

#include "vc/errors.h"

namespace vc::train {

using nlohmann::json;

void TrainingConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (batch_size == 0 || minibatch_size == 0 || minibatches_to_accumulate == 0) {
    fail("batch sizes must be positive");
  }
  if (static_cast<std::uint64_t>(minibatch_size) * minibatches_to_accumulate != batch_size) {
    fail("minibatches_to_accumulate * minibatch_size must equal batch_size");
  }
  if (examples_per_epoch == 0 || examples_per_epoch % batch_size != 0) {
    fail("examples_per_epoch must be a positive multiple of batch_size");
  }
  if (hidden_units < 1 || num_layers < 1 || sample_length < 1) fail("model dimensions");
  if (!(learning_rate > 0.0) || !(rho >= 0.0 && rho < 1.0) || !(epsilon > 0.0)) {
    fail("optimizer hyperparameters");
  }
  if (map_max_duration_ms == 0 || reduce_max_duration_ms == 0) fail("task max duration");
  if (result_poll_ms <= 0) fail("result_poll_ms");
}

nn::ModelConfig TrainingConfig::model_config(int vocab_size) const {
  nn::ModelConfig m{vocab_size, hidden_units, num_layers, sample_length};
  m.validate();
  return m;
}

json to_json(const TrainingConfig& c) {
  return json{{"batch_size", c.batch_size},
              {"minibatch_size", c.minibatch_size},
              {"minibatches_to_accumulate", c.minibatches_to_accumulate},
              {"examples_per_epoch", c.examples_per_epoch},
              {"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"rho", c.rho},
              {"epsilon", c.epsilon},
              {"hidden_units", c.hidden_units},
              {"num_layers", c.num_layers},
              {"sample_length", c.sample_length},
              {"corpus_key", c.corpus_key},
              {"shuffle_seed", c.shuffle_seed},
              {"init_seed", c.init_seed},
              {"map_max_duration_ms", c.map_max_duration_ms},
              {"reduce_max_duration_ms", c.reduce_max_duration_ms},
              {"simulated_map_delay_ms", c.simulated_map_delay_ms},
              {"result_poll_ms", c.result_poll_ms}};
}

namespace {

template <typename T>
void read(const json& j, const char* name, T& out) {
  if (auto it = j.find(name); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, std::string(name) + ": " + e.what());
    }
  }
}

}  // namespace

TrainingConfig training_config_from_json(const json& j) {
  TrainingConfig c;
  read(j, "batch_size", c.batch_size);
  read(j, "minibatch_size", c.minibatch_size);
  read(j, "minibatches_to_accumulate", c.minibatches_to_accumulate);
  read(j, "examples_per_epoch", c.examples_per_epoch);
  read(j, "epochs", c.epochs);
  read(j, "learning_rate", c.learning_rate);
  read(j, "rho", c.rho);
  read(j, "epsilon", c.epsilon);
  read(j, "hidden_units", c.hidden_units);
  read(j, "num_layers", c.num_layers);
  read(j, "sample_length", c.sample_length);
  read(j, "corpus_key", c.corpus_key);
  read(j, "shuffle_seed", c.shuffle_seed);
  read(j, "init_seed", c.init_seed);
  read(j, "map_max_duration_ms", c.map_max_duration_ms);
  read(j, "reduce_max_duration_ms", c.reduce_max_duration_ms);
  read(j, "simulated_map_delay_ms", c.simulated_map_delay_ms);
  read(j, "result_poll_ms", c.result_poll_ms);
  return c;
}

json to_json(const JobSpec& spec) {
  json j = to_json(spec.training);
  j["job_id"] = spec.job_id;
  j["initial_queue"] = spec.initial_queue;
  j["results_queue"] = spec.results_queue;
  return j;
}

JobSpec job_spec_from_json(const json& j) {
  JobSpec spec;
  spec.training = training_config_from_json(j);
  read(j, "job_id", spec.job_id);
  read(j, "initial_queue", spec.initial_queue);
  read(j, "results_queue", spec.results_queue);
  return spec;
}

JobFile job_file_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "job file must be an object");
  JobFile f;
  f.spec = job_spec_from_json(j);
  read(j, "corpus_path", f.corpus_path);
  read(j, "broker", f.broker);
  read(j, "store", f.store);
  return f;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

JobFile load_job_file(const std::string& path) {
  const json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, path + " is not JSON");
  JobFile f = job_file_from_json(j);
  // Relative corpus paths resolve against the config file's directory.
  if (!f.corpus_path.empty() && f.corpus_path.front() != '/') {
    const auto slash = path.rfind('/');
    if (slash != std::string::npos) f.corpus_path = path.substr(0, slash + 1) + f.corpus_path;
  }
  return f;
}

}  // namespace vc::train
