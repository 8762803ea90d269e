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

#include "vc/nn/rmsprop.h"

#include <cmath>

#include "vc/errors.h"

namespace vc::nn {

OptimizerState fresh_optimizer(const ModelConfig& config, RmspropHyper hyper) {
  return OptimizerState{hyper, std::vector<double>(parameter_count(config), 0.0)};
}

void rmsprop_step(ModelParams& params, OptimizerState& state,
                  const Gradients& grad, std::size_t effective_batch) {
  if (effective_batch == 0) {
    throw Error(ErrorCode::InvalidArgument, "effective_batch must be > 0");
  }
  const std::size_t n = params.values.size();
  if (grad.values.size() != n || state.cache.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "rmsprop operands");
  }
  const double batch = static_cast<double>(effective_batch);
  const auto [lr, rho, eps] = state.hyper;
  for (std::size_t j = 0; j < n; ++j) {
    const double g = grad.values[j] / batch;
    state.cache[j] = rho * state.cache[j] + (1.0 - rho) * g * g;
    params.values[j] -= lr * g / (std::sqrt(state.cache[j]) + eps);
  }
}

}  // namespace vc::nn
