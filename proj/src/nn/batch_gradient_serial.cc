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

#include "vc/nn/batch_gradient.h"

#include "vc/errors.h"

namespace vc::nn {

BatchGradient batch_gradient_serial(const ModelParams& params,
                                    std::span<const Sample> batch) {
  if (batch.empty()) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  BatchGradient out{zero_gradients(params.config), 0.0, {}};
  std::vector<double> one(out.grad.values.size());
  for (const Sample& s : batch) {
    const SampleTrace trace = forward_sample(params, s);
    out.per_sample_loss.push_back(backward_sample(params, s, trace, one));
    for (std::size_t j = 0; j < one.size(); ++j) out.grad.values[j] += one[j];
  }
  for (double l : out.per_sample_loss) out.loss_sum += l;
  return out;
}

}  // namespace vc::nn
