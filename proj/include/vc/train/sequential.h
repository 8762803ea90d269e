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
#include <string_view>
#include <vector>

#include "vc/nn/model.h"
#include "vc/nn/rmsprop.h"
#include "vc/train/config.h"

namespace vc::train {

struct LossPoint {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  double loss = 0.0;  // mean over the step's batch
  std::uint64_t model_version = 0;  // version produced by the step
  std::int64_t wall_ms = 0;

  bool operator==(const LossPoint&) const = default;
};

struct TrainResult {
  nn::ModelParams params;
  nn::OptimizerState optimizer;
  std::vector<LossPoint> trace;
};

// Plain mini-batch training at batch size B, no broker involved. The batch
// gradient is accumulated mini-batch by mini-batch in ascending order, the
// same grouping a reduce task uses, which is what makes the distributed run
// reproduce it bit for bit.
TrainResult sequential_train(const TrainingConfig& config, std::string_view corpus,
                             nn::ModelParams initial, int threads = 0);

// Mean of the per-step losses in the last epoch (the epoch loss a training
// loop would report). NaN for an empty trace.
double final_loss(const std::vector<LossPoint>& trace);

// Columns: step,epoch,loss,model_version,wall_ms.
void write_loss_csv(std::ostream& out, const std::vector<LossPoint>& trace);

}  // namespace vc::train
