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

#include "vc/train/handlers.h"

#include <algorithm>
#include <cmath>
#include <optional>
#include <thread>

#include "vc/errors.h"
#include "vc/nn/batch_gradient.h"
#include "vc/nn/codec.h"

namespace vc::train {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::uint64_t result_task_id(std::uint64_t map_task_id, std::uint32_t delivery_count) {
  return (1ULL << 52) | (map_task_id << 12) | std::min<std::uint64_t>(delivery_count, 4095);
}

namespace {

std::int64_t remaining_ms(const TaskContext& ctx) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(ctx.deadline - Clock::now())
      .count();
}

void sleep_ms(std::int64_t ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

std::optional<VersionedValue> wait_model(Session& session, const std::string& job,
                                         std::uint64_t version, const TaskContext& ctx) {
  const std::int64_t left = remaining_ms(ctx);
  if (left <= 0) return std::nullopt;
  return session.wait_for_version(JobKeys::model(job), version, left);
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::int64_t epoch_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

TrainingHandlers::TrainingHandlers(HandlerOptions options) : options_(options) {}

std::shared_ptr<const TrainingHandlers::JobData> TrainingHandlers::job_data(
    Session& session, const std::string& job_id) {
  {
    std::lock_guard lock(mu_);
    if (auto it = jobs_.find(job_id); it != jobs_.end()) return it->second;
  }
  auto jd = std::make_shared<JobData>();
  jd->meta = read_job_meta(session, job_id);
  jd->corpus = to_text(session.get_plain(JobKeys::corpus(jd->meta.spec)));
  jd->data.vocab = build_vocab(jd->corpus);
  jd->data.sample_length = jd->meta.spec.training.sample_length;
  jd->data.starts = decode_starts(session.get_plain(JobKeys::samples(job_id)));
  if (jd->data.vocab.size() != jd->meta.vocab_size ||
      jd->data.starts.size() != jd->meta.spec.training.total_examples()) {
    throw Error(ErrorCode::ShapeMismatch, "job data disagrees with its metadata");
  }
  jd->model = jd->meta.spec.training.model_config(jd->meta.vocab_size);
  std::lock_guard lock(mu_);
  return jobs_.emplace(job_id, std::move(jd)).first->second;
}

void TrainingHandlers::run_map(Session& session, const TaskEnvelope& task,
                               const TaskContext& ctx) {
  const MapPayload p = decode_map_payload(task.payload);
  if (p.step != task.required_model_version) {
    throw Error(ErrorCode::MalformedEnvelope, "map step and required version disagree");
  }
  const auto jd = job_data(session, task.job_id);
  const TrainingConfig& c = jd->meta.spec.training;
  if (p.minibatch_index >= c.minibatches_to_accumulate) {
    throw Error(ErrorCode::MalformedEnvelope, "minibatch_index out of range");
  }

  const auto current = wait_model(session, task.job_id, p.step, ctx);
  if (!current) throw Error(ErrorCode::Timeout, "model version " + std::to_string(p.step));
  // The step is already reduced; nothing left to contribute.
  if (current->version > p.step) return;

  const nn::ModelRecord rec = nn::decode_model(current->payload);
  if (rec.params.config != jd->model) throw Error(ErrorCode::ShapeMismatch, "stored model");
  sleep_ms(c.simulated_map_delay_ms);

  const std::uint64_t first =
      p.step * c.batch_size + static_cast<std::uint64_t>(p.minibatch_index) * c.minibatch_size;
  const auto batch = gather_samples(jd->corpus, jd->data, first, c.minibatch_size);
  const nn::BatchGradient g = nn::batch_gradient(rec.params, batch, options_.compute_threads);
  if (!all_finite(g.grad.values) || !std::isfinite(g.loss_sum)) {
    throw Error(ErrorCode::TaskFailed, "non-finite gradient");
  }

  GradientResultMsg msg{task.job_id, p.step, p.minibatch_index, nn::encode_gradient(g.grad),
                        g.loss_sum, c.minibatch_size};
  TaskEnvelope out;
  out.task_id = result_task_id(task.task_id, task.delivery_count);
  out.job_id = task.job_id;
  out.kind = TaskKind::custom(std::string(kMapResultKind));
  out.payload = encode_result(msg);
  out.required_model_version = p.step;
  out.max_duration_ms = c.reduce_max_duration_ms;
  session.publish(jd->meta.spec.results_queue, out);
}

void TrainingHandlers::run_reduce(Session& session, const TaskEnvelope& task,
                                  const TaskContext& ctx) {
  const std::uint64_t k = decode_reduce_payload(task.payload).step;
  if (k != task.required_model_version) {
    throw Error(ErrorCode::MalformedEnvelope, "reduce step and required version disagree");
  }
  const auto jd = job_data(session, task.job_id);
  const TrainingConfig& c = jd->meta.spec.training;
  const std::string& results = jd->meta.spec.results_queue;
  const std::string model_key = JobKeys::model(task.job_id);
  const std::uint32_t K = c.minibatches_to_accumulate;

  const auto current = wait_model(session, task.job_id, k, ctx);
  if (!current) throw Error(ErrorCode::Timeout, "model version " + std::to_string(k));
  if (current->version > k) return;

  struct Held {
    Lease lease;
    GradientResultMsg msg;
  };
  std::vector<std::optional<Held>> slots(K);
  std::uint32_t filled = 0;
  // Results this reduce cannot use (another job's, or a later step's) stay
  // leased until it exits; republishing them at once would put them right
  // back at the head of the queue.
  std::vector<Lease> parked;

  auto give_back = [&](const Lease& l) {
    session.publish(results, l.task);
    try {
      session.ack(l.lease_id);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnknownLease) throw;
    }
  };
  auto release_parked = [&] {
    for (const Lease& l : parked) give_back(l);
    parked.clear();
  };
  auto release = [&] {
    for (auto& h : slots) {
      if (h) give_back(h->lease);
    }
    release_parked();
  };
  auto advanced = [&] {
    return session.wait_for_version(model_key, k + 1, 1).has_value();
  };
  auto last_check = Clock::now();

  while (filled < K) {
    if (Clock::now() >= ctx.deadline) {
      release();
      throw Error(ErrorCode::Timeout, "results for step " + std::to_string(k));
    }
    if (Clock::now() - last_check >= std::chrono::milliseconds(options_.reduce_version_check_ms)) {
      last_check = Clock::now();
      if (advanced()) {
        release();
        return;
      }
    }
    auto lease = session.fetch(results, ctx.worker_id);
    if (!lease) {
      sleep_ms(c.result_poll_ms);
      continue;
    }
    if (lease->task.job_id != task.job_id) {
      parked.push_back(std::move(*lease));
      continue;
    }
    std::optional<GradientResultMsg> msg;
    try {
      msg = decode_result(lease->task.payload);
    } catch (const Error&) {
    }
    if (!msg || msg->job_id != task.job_id || msg->model_version < k ||
        (msg->model_version == k && (msg->minibatch_index >= K || slots[msg->minibatch_index]))) {
      // Malformed, stale (its step is already reduced) or a duplicate.
      session.ack(lease->lease_id);
      continue;
    }
    if (msg->model_version > k) {
      // Only computable once k+1 exists, so this step is done elsewhere.
      parked.push_back(std::move(*lease));
      if (advanced()) {
        release();
        return;
      }
      continue;
    }
    slots[msg->minibatch_index] = Held{std::move(*lease), std::move(*msg)};
    ++filled;
  }

  nn::ModelRecord rec = nn::decode_model(current->payload);
  nn::Gradients acc = nn::zero_gradients(jd->model);
  double loss_sum = 0.0;
  for (std::uint32_t j = 0; j < K; ++j) {
    const nn::Gradients part = nn::decode_gradient(slots[j]->msg.gradient, jd->model);
    for (std::size_t i = 0; i < acc.values.size(); ++i) acc.values[i] += part.values[i];
    loss_sum += slots[j]->msg.loss_sum;
  }
  nn::rmsprop_step(rec.params, rec.optimizer, acc, c.batch_size);

  const json loss{{"step", k},
                  {"epoch", k / c.steps_per_epoch()},
                  {"loss", loss_sum / static_cast<double>(c.batch_size)},
                  {"model_version", k + 1},
                  {"wall_ms", epoch_ms() - jd->meta.planned_at_ms}};
  session.put_plain(JobKeys::loss(task.job_id, k), to_bytes(loss.dump()));
  // A false return means a concurrent reduce of the same step won; its
  // update is identical, so this one is simply dropped.
  session.put_versioned(model_key, k + 1, nn::encode_model(rec.params, rec.optimizer));

  for (auto& h : slots) {
    try {
      session.ack(h->lease.lease_id);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnknownLease) throw;
    }
  }
  release_parked();
}

void TrainingHandlers::install(HandlerTable& table) {
  table[TaskKind::map().str()] = [this](Session& s, const TaskEnvelope& t,
                                        const TaskContext& ctx) { run_map(s, t, ctx); };
  table[TaskKind::reduce().str()] = [this](Session& s, const TaskEnvelope& t,
                                           const TaskContext& ctx) { run_reduce(s, t, ctx); };
}

std::vector<LossPoint> read_loss_trace(Session& session, const std::string& job_id) {
  const JobMeta meta = read_job_meta(session, job_id);
  std::vector<LossPoint> out;
  out.reserve(meta.total_steps);
  for (std::uint64_t k = 0; k < meta.total_steps; ++k) {
    const Bytes raw = session.get_plain(JobKeys::loss(job_id, k));
    const json j = json::parse(raw.begin(), raw.end(), nullptr, false);
    try {
      out.push_back(LossPoint{j.at("step").get<std::uint64_t>(), j.at("epoch").get<std::uint64_t>(),
                              j.at("loss").get<double>(), j.at("model_version").get<std::uint64_t>(),
                              j.at("wall_ms").get<std::int64_t>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedEnvelope, std::string("loss record: ") + e.what());
    }
  }
  return out;
}

json linear_softmax_gradient(const json& payload) {
  try {
    const auto C = payload.at("classes").get<std::size_t>();
    const auto D = payload.at("dim").get<std::size_t>();
    const auto W = payload.at("weights").get<std::vector<double>>();
    const auto b = payload.at("bias").get<std::vector<double>>();
    const auto X = payload.at("features").get<std::vector<std::vector<double>>>();
    const auto y = payload.at("labels").get<std::vector<std::size_t>>();
    if (C == 0 || W.size() != C * D || b.size() != C || X.size() != y.size()) {
      throw Error(ErrorCode::ShapeMismatch, "linear softmax payload");
    }
    std::vector<double> gW(C * D, 0.0), gb(C, 0.0), z(C);
    double loss_sum = 0.0;
    for (std::size_t n = 0; n < X.size(); ++n) {
      if (X[n].size() != D) throw Error(ErrorCode::ShapeMismatch, "feature row");
      if (y[n] >= C) throw Error(ErrorCode::IndexOutOfRange, "label");
      double zmax = -INFINITY;
      for (std::size_t c = 0; c < C; ++c) {
        z[c] = b[c];
        for (std::size_t d = 0; d < D; ++d) z[c] += W[c * D + d] * X[n][d];
        zmax = std::max(zmax, z[c]);
      }
      double sum = 0.0;
      for (std::size_t c = 0; c < C; ++c) sum += std::exp(z[c] - zmax);
      loss_sum += zmax + std::log(sum) - z[y[n]];
      for (std::size_t c = 0; c < C; ++c) {
        const double delta = std::exp(z[c] - zmax) / sum - (c == y[n] ? 1.0 : 0.0);
        gb[c] += delta;
        for (std::size_t d = 0; d < D; ++d) gW[c * D + d] += delta * X[n][d];
      }
    }
    return json{{"grad_weights", gW}, {"grad_bias", gb}, {"loss_sum", loss_sum},
                {"count", X.size()}};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedEnvelope, std::string("linear softmax payload: ") + e.what());
  }
}

void run_linear_softmax(Session& session, const TaskEnvelope& task, const TaskContext&) {
  const json payload = json::parse(task.payload.begin(), task.payload.end(), nullptr, false);
  if (payload.is_discarded() || !payload.contains("result_key") ||
      !payload["result_key"].is_string()) {
    throw Error(ErrorCode::MalformedEnvelope, "linear softmax payload");
  }
  const json result = linear_softmax_gradient(payload);
  session.put_plain(payload["result_key"].get<std::string>(), to_bytes(result.dump()));
}

}  // namespace vc::train
