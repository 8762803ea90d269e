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

#include "vc/train/plan.h"

#include <chrono>

#include "vc/errors.h"
#include "vc/nn/codec.h"
#include "vc/train/dataset.h"

namespace vc::train {

using nlohmann::json;

std::vector<TrainingStepPlan> plan_steps(const TrainingConfig& config) {
  config.validate();
  const std::uint64_t B = config.batch_size;
  const std::uint64_t m = config.minibatch_size;
  std::vector<TrainingStepPlan> plans;
  plans.reserve(config.total_steps());
  for (std::uint64_t k = 0; k < config.total_steps(); ++k) {
    TrainingStepPlan p;
    p.step = k;
    p.required_model_version = k;
    p.minibatches.resize(config.minibatches_to_accumulate);
    for (std::uint64_t j = 0; j < config.minibatches_to_accumulate; ++j) {
      for (std::uint64_t i = 0; i < m; ++i) p.minibatches[j].push_back(k * B + j * m + i);
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

std::uint64_t map_task_id(const TrainingConfig& config, std::uint64_t step, std::uint32_t j) {
  return step * (config.minibatches_to_accumulate + 1ULL) + j + 1;
}

std::uint64_t reduce_task_id(const TrainingConfig& config, std::uint64_t step) {
  return step * (config.minibatches_to_accumulate + 1ULL) + config.minibatches_to_accumulate + 1;
}

namespace {

json parse_payload(const Bytes& b) {
  json j = json::parse(b.begin(), b.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("step") ||
      !j["step"].is_number_unsigned()) {
    throw Error(ErrorCode::MalformedEnvelope, "task payload");
  }
  return j;
}

Bytes dump(const json& j) { return to_bytes(j.dump()); }

}  // namespace

Bytes encode_map_payload(const MapPayload& p) {
  return dump(json{{"step", p.step}, {"minibatch_index", p.minibatch_index}});
}

MapPayload decode_map_payload(const Bytes& b) {
  const json j = parse_payload(b);
  if (!j.contains("minibatch_index") || !j["minibatch_index"].is_number_unsigned()) {
    throw Error(ErrorCode::MalformedEnvelope, "map payload without minibatch_index");
  }
  return {j["step"].get<std::uint64_t>(), j["minibatch_index"].get<std::uint32_t>()};
}

Bytes encode_reduce_payload(const ReducePayload& p) { return dump(json{{"step", p.step}}); }

ReducePayload decode_reduce_payload(const Bytes& b) {
  return {parse_payload(b)["step"].get<std::uint64_t>()};
}

std::vector<TaskEnvelope> plan_tasks(const JobSpec& spec) {
  const TrainingConfig& c = spec.training;
  std::vector<TaskEnvelope> tasks;
  for (const TrainingStepPlan& p : plan_steps(c)) {
    for (std::uint32_t j = 0; j < c.minibatches_to_accumulate; ++j) {
      TaskEnvelope t;
      t.task_id = map_task_id(c, p.step, j);
      t.job_id = spec.job_id;
      t.kind = TaskKind::map();
      t.payload = encode_map_payload({p.step, j});
      t.required_model_version = p.required_model_version;
      t.max_duration_ms = c.map_max_duration_ms;
      tasks.push_back(std::move(t));
    }
    TaskEnvelope r;
    r.task_id = reduce_task_id(c, p.step);
    r.job_id = spec.job_id;
    r.kind = TaskKind::reduce();
    r.payload = encode_reduce_payload({p.step});
    r.required_model_version = p.required_model_version;
    r.max_duration_ms = c.reduce_max_duration_ms;
    tasks.push_back(std::move(r));
  }
  return tasks;
}

json to_json(const JobMeta& meta) {
  return json{{"spec", to_json(meta.spec)},
              {"total_steps", meta.total_steps},
              {"vocab_size", meta.vocab_size},
              {"planned_at_ms", meta.planned_at_ms}};
}

JobMeta job_meta_from_json(const json& j) {
  try {
    JobMeta m;
    m.spec = job_spec_from_json(j.at("spec"));
    m.total_steps = j.at("total_steps").get<std::uint64_t>();
    m.vocab_size = j.at("vocab_size").get<int>();
    m.planned_at_ms = j.value("planned_at_ms", std::int64_t{0});
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedEnvelope, std::string("job meta: ") + e.what());
  }
}

JobMeta read_job_meta(Session& session, const std::string& job_id) {
  const Bytes raw = session.get_plain(JobKeys::meta(job_id));
  const json j = json::parse(raw.begin(), raw.end(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::MalformedEnvelope, "job meta is not JSON");
  return job_meta_from_json(j);
}

nn::ModelParams initial_params(const TrainingConfig& config, std::string_view corpus) {
  const Vocab v = build_vocab(corpus);
  return nn::init_params(config.model_config(v.size()), config.init_seed);
}

std::size_t plan_job(Session& session, const JobSpec& spec, std::string_view corpus,
                     const nn::ModelParams& initial) {
  const TrainingConfig& c = spec.training;
  c.validate();
  if (spec.job_id.empty()) throw Error(ErrorCode::InvalidArgument, "empty job_id");
  const Dataset data = build_dataset(corpus, c);
  const nn::ModelConfig model = c.model_config(data.vocab.size());
  if (initial.config != model || initial.values.size() != nn::parameter_count(model)) {
    throw Error(ErrorCode::ShapeMismatch, "initial params do not match the corpus/config");
  }
  const std::vector<TaskEnvelope> tasks = plan_tasks(spec);

  try {
    for (const std::string& q : {spec.initial_queue, spec.results_queue}) {
      try {
        session.create_queue(q);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::QueueExists) throw;
      }
    }
    session.put_plain(JobKeys::corpus(spec), to_bytes(corpus));
    session.put_plain(JobKeys::samples(spec.job_id), encode_starts(data.starts));
    JobMeta meta{spec, c.total_steps(), data.vocab.size(),
                 std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::system_clock::now().time_since_epoch())
                     .count()};
    session.put_plain(JobKeys::meta(spec.job_id), to_bytes(to_json(meta).dump()));
    if (!session.put_versioned(JobKeys::model(spec.job_id), 0,
                               nn::encode_model(initial, nn::fresh_optimizer(model, c.hyper())))) {
      throw Error(ErrorCode::VersionConflict, "model already exists for job " + spec.job_id);
    }
    for (const TaskEnvelope& t : tasks) session.publish(spec.initial_queue, t);
  } catch (const Error& e) {
    throw Error(ErrorCode::JobInitFailed, e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::JobInitFailed, e.what());
  }
  return tasks.size();
}

void teardown_job(Session& session, const JobSpec& spec) {
  session.purge(spec.initial_queue, spec.job_id);
  session.purge(spec.results_queue, spec.job_id);
}

}  // namespace vc::train
