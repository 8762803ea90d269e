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

#include <span>
#include <vector>

#include "vc/nn/lstm.h"

namespace vc::nn {

struct BatchGradient {
  Gradients grad;  // SUM over samples
  double loss_sum = 0.0;
  std::vector<double> per_sample_loss;
};

// Fused forward + backward over a batch. Samples are processed in parallel
// with OpenMP; the per-sample gradients are then summed per parameter in
// ascending sample order, so the result is bit-identical to
// batch_gradient_serial for every thread count. threads <= 0 uses the
// OpenMP default.
BatchGradient batch_gradient(const ModelParams& params,
                             std::span<const Sample> batch, int threads = 0);

// Single-threaded reference kept for tests and the benchmark.
BatchGradient batch_gradient_serial(const ModelParams& params,
                                    std::span<const Sample> batch);

}  // namespace vc::nn
