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

#include <cstddef>
#include <vector>

#include "vc/nn/model.h"

namespace vc::nn {

struct RmspropHyper {
  double learning_rate = 0.1;
  double rho = 0.9;
  double epsilon = 1e-7;

  bool operator==(const RmspropHyper&) const = default;
};

struct OptimizerState {
  RmspropHyper hyper;
  std::vector<double> cache;  // running mean of squared gradients, >= 0

  bool operator==(const OptimizerState&) const = default;
};

OptimizerState fresh_optimizer(const ModelConfig& config, RmspropHyper hyper = {});

// With g = grad / effective_batch:
//   cache <- rho * cache + (1 - rho) * g^2
//   param <- param - lr * g / (sqrt(cache) + eps)
// Throws Error(ShapeMismatch) on length disagreement, InvalidArgument when
// effective_batch is zero.
void rmsprop_step(ModelParams& params, OptimizerState& state,
                  const Gradients& grad, std::size_t effective_batch);

}  // namespace vc::nn
