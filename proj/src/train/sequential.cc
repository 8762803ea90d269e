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

#include "vc/train/sequential.h"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "vc/errors.h"
#include "vc/nn/batch_gradient.h"
#include "vc/train/dataset.h"

namespace vc::train {

TrainResult sequential_train(const TrainingConfig& config, std::string_view corpus,
                             nn::ModelParams initial, int threads) {
  config.validate();
  const Dataset data = build_dataset(corpus, config);
  const nn::ModelConfig model = config.model_config(data.vocab.size());
  if (initial.config != model || initial.values.size() != nn::parameter_count(model)) {
    throw Error(ErrorCode::ShapeMismatch, "initial params do not match the corpus/config");
  }

  TrainResult out{std::move(initial), nn::fresh_optimizer(model, config.hyper()), {}};
  const std::uint64_t B = config.batch_size;
  const std::uint64_t m = config.minibatch_size;
  const auto start = std::chrono::steady_clock::now();

  for (std::uint64_t k = 0; k < config.total_steps(); ++k) {
    nn::Gradients acc = nn::zero_gradients(model);
    double loss_sum = 0.0;
    for (std::uint64_t j = 0; j < config.minibatches_to_accumulate; ++j) {
      const auto batch = gather_samples(corpus, data, k * B + j * m, m);
      const nn::BatchGradient part = nn::batch_gradient(out.params, batch, threads);
      for (std::size_t p = 0; p < acc.values.size(); ++p) acc.values[p] += part.grad.values[p];
      loss_sum += part.loss_sum;
    }
    nn::rmsprop_step(out.params, out.optimizer, acc, B);
    const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    out.trace.push_back(LossPoint{k, k / config.steps_per_epoch(),
                                  loss_sum / static_cast<double>(B), k + 1, wall});
  }
  return out;
}

double final_loss(const std::vector<LossPoint>& trace) {
  if (trace.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::uint64_t last_epoch = trace.back().epoch;
  double sum = 0.0;
  std::size_t n = 0;
  for (const LossPoint& p : trace) {
    if (p.epoch == last_epoch) {
      sum += p.loss;
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

void write_loss_csv(std::ostream& out, const std::vector<LossPoint>& trace) {
  out << "step,epoch,loss,model_version,wall_ms\n";
  out << std::setprecision(17);
  for (const LossPoint& p : trace) {
    out << p.step << ',' << p.epoch << ',' << p.loss << ',' << p.model_version << ','
        << p.wall_ms << '\n';
  }
}

}  // namespace vc::train
