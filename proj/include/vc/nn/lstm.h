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

#include "vc/nn/model.h"

namespace vc::nn {

// A window of character indices and the index of the character after it.
struct Sample {
  std::vector<int> input;
  int target = 0;
};

// Activations of one stacked LSTM layer over the window, row t per step.
struct LayerTrace {
  std::vector<double> gates;      // [L, 4H] post-activation i, f, g, o
  std::vector<double> cell;       // [L, H]
  std::vector<double> tanh_cell;  // [L, H]
  std::vector<double> hidden;     // [L, H]
};

struct SampleTrace {
  std::vector<LayerTrace> layers;
  std::vector<double> logits;  // [V], read from the last step's top hidden state
};

struct ForwardResult {
  Tensor logits;  // [N, V]
  std::vector<SampleTrace> traces;
};

struct LossResult {
  double mean = 0.0;
  std::vector<double> per_sample;
};

struct BackwardResult {
  Gradients grad;  // summed over the batch
  double loss_sum = 0.0;
};

// Throws Error(ShapeMismatch) when the sample does not fit the config.
void check_sample(const ModelConfig& config, const Sample& sample);

SampleTrace forward_sample(const ModelParams& params, const Sample& sample);

// Writes d(loss)/d(params) for one sample into grad (overwritten, not
// accumulated) and returns the sample's cross-entropy.
double backward_sample(const ModelParams& params, const Sample& sample,
                       const SampleTrace& trace, std::span<double> grad);

ForwardResult forward(const ModelParams& params, std::span<const Sample> batch);

Tensor softmax(const Tensor& logits);

// Categorical cross-entropy, mean over rows. Throws Error(IndexOutOfRange).
LossResult loss(const Tensor& logits, std::span<const int> targets);

// Per-sample gradients added in ascending sample order.
BackwardResult backward(const ModelParams& params, std::span<const Sample> batch,
                        const ForwardResult& cache);

}  // namespace vc::nn
