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

#include <omp.h>

#include <exception>

#include "vc/errors.h"

namespace vc::nn {

BatchGradient batch_gradient(const ModelParams& params,
                             std::span<const Sample> batch, int threads) {
  if (batch.empty()) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  for (const Sample& s : batch) check_sample(params.config, s);

  const std::size_t P = parameter_count(params.config);
  const auto N = static_cast<std::ptrdiff_t>(batch.size());
  const int team = threads > 0 ? threads : omp_get_max_threads();

  // One row of P per sample; rows are independent so the loop has no
  // shared writes.
  std::vector<double> rows(batch.size() * P);
  std::vector<double> losses(batch.size());
  std::exception_ptr failure;

#pragma omp parallel for num_threads(team) schedule(static)
  for (std::ptrdiff_t n = 0; n < N; ++n) {
    try {
      const auto i = static_cast<std::size_t>(n);
      const SampleTrace trace = forward_sample(params, batch[i]);
      losses[i] = backward_sample(
          params, batch[i], trace, std::span<double>(rows).subspan(i * P, P));
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  BatchGradient out{zero_gradients(params.config), 0.0, std::move(losses)};
  double* acc = out.grad.values.data();
  const double* src = rows.data();
  const auto PP = static_cast<std::ptrdiff_t>(P);

#pragma omp parallel for num_threads(team) schedule(static)
  for (std::ptrdiff_t j = 0; j < PP; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      s += src[i * P + static_cast<std::size_t>(j)];
    }
    acc[j] = s;
  }
  for (double l : out.per_sample_loss) out.loss_sum += l;
  return out;
}

}  // namespace vc::nn
