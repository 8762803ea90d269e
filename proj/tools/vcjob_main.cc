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

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "vc/errors.h"
#include "vc/net/client.h"
#include "vc/rng.h"
#include "vc/train/handlers.h"
#include "vc/train/plan.h"
#include "vc/train/sequential.h"
#include "vc/worker.h"

using namespace vc;

namespace {

std::unique_ptr<Session> connect(const train::JobFile& f) {
  return std::make_unique<net::RemoteSession>(net::Endpoint::parse(f.broker),
                                              net::Endpoint::parse(f.store));
}

int cmd_plan(const train::JobFile& f) {
  auto s = connect(f);
  const std::string corpus = train::read_file(f.corpus_path);
  const std::size_t n =
      train::plan_job(*s, f.spec, corpus, train::initial_params(f.spec.training, corpus));
  std::cout << "job " << f.spec.job_id << ": " << f.spec.training.total_steps() << " steps, "
            << n << " tasks published\n";
  return 0;
}

int cmd_status(const train::JobFile& f, const std::string& loss_out) {
  auto s = connect(f);
  const train::JobMeta meta = train::read_job_meta(*s, f.spec.job_id);
  const std::uint64_t v = s->get_versioned(train::JobKeys::model(f.spec.job_id)).version;
  const QueueDepth d = s->depth(meta.spec.initial_queue);
  std::cout << "model version " << v << " of " << meta.total_steps << ", pending "
            << d.pending << ", leased " << d.leased << "\n";
  if (!loss_out.empty() && detect_job_complete(*s, f.spec.job_id)) {
    std::ofstream out(loss_out);
    const auto trace = train::read_loss_trace(*s, f.spec.job_id);
    train::write_loss_csv(out, trace);
    std::cout << "final loss " << train::final_loss(trace) << "\n";
  }
  return 0;
}

int cmd_sequential(const train::JobFile& f, const std::string& out_path, int threads) {
  const std::string corpus = train::read_file(f.corpus_path);
  const auto r = train::sequential_train(f.spec.training, corpus,
                                         train::initial_params(f.spec.training, corpus), threads);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    train::write_loss_csv(out, r.trace);
  } else {
    train::write_loss_csv(std::cout, r.trace);
  }
  std::cerr << "final loss " << train::final_loss(r.trace) << "\n";
  return 0;
}

int cmd_demo_custom(const train::JobFile& f, int tasks, std::uint64_t seed) {
  auto s = connect(f);
  try {
    s->create_queue(f.spec.initial_queue);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::QueueExists) throw;
  }
  Rng rng(seed);
  const int C = 3, D = 4, N = 8;
  for (int t = 0; t < tasks; ++t) {
    nlohmann::json p;
    std::vector<double> w(C * D), b(C);
    for (double& x : w) x = rng.uniform(-1, 1);
    for (double& x : b) x = rng.uniform(-1, 1);
    std::vector<std::vector<double>> X(N, std::vector<double>(D));
    std::vector<int> y(N);
    for (int n = 0; n < N; ++n) {
      for (double& x : X[n]) x = rng.uniform(-1, 1);
      y[n] = static_cast<int>(rng.below(C));
    }
    p["classes"] = C;
    p["dim"] = D;
    p["weights"] = w;
    p["bias"] = b;
    p["features"] = X;
    p["labels"] = y;
    p["result_key"] = f.spec.job_id + "/custom/" + std::to_string(t + 1);
    TaskEnvelope env;
    env.task_id = static_cast<std::uint64_t>(t + 1);
    env.job_id = f.spec.job_id;
    env.kind = TaskKind::custom(std::string(train::kLinearSoftmaxKind));
    env.payload = to_bytes(p.dump());
    env.max_duration_ms = f.spec.training.map_max_duration_ms;
    s->publish(f.spec.initial_queue, env);
  }
  std::cout << tasks << " " << train::kLinearSoftmaxKind << " tasks published\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plan, inspect and run training jobs"};
  app.require_subcommand(1);
  std::string config_path, out_path;
  int threads = 0, tasks = 100;
  std::uint64_t seed = 1;

  auto* plan = app.add_subcommand("plan", "Store job data and publish every task");
  auto* status = app.add_subcommand("status", "Show progress; write the loss trace once done");
  auto* seq = app.add_subcommand("sequential", "Train without the broker (the baseline)");
  auto* demo = app.add_subcommand("demo-custom", "Publish linear-softmax demo tasks");
  for (auto* sub : {plan, status, seq, demo}) {
    sub->add_option("--config", config_path, "Job config JSON")->required();
  }
  status->add_option("--loss-out", out_path, "Loss CSV path");
  seq->add_option("--out", out_path, "Loss CSV path (default stdout)");
  seq->add_option("--threads", threads, "OpenMP threads (0: default)");
  demo->add_option("--tasks", tasks, "Number of tasks");
  demo->add_option("--seed", seed, "Data seed");
  CLI11_PARSE(app, argc, argv);

  try {
    const train::JobFile f = train::load_job_file(config_path);
    if (*plan) return cmd_plan(f);
    if (*status) return cmd_status(f, out_path);
    if (*seq) return cmd_sequential(f, out_path, threads);
    if (*demo) return cmd_demo_custom(f, tasks, seed);
  } catch (const std::exception& e) {
    std::cerr << "vcjob: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
