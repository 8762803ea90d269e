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

#include <omp.h>

#include <chrono>
#include <iostream>

#include "CLI11.hpp"
#include "vc/nn/batch_gradient.h"
#include "vc/rng.h"

using namespace vc;

int main(int argc, char** argv) {
  CLI::App app{"Batch gradient: serial reference vs OpenMP kernel"};
  int vocab = 60, hidden = 50, layers = 2, length = 40, batch = 128, reps = 3;
  std::vector<int> threads{1, 2, 4};
  app.add_option("--vocab", vocab);
  app.add_option("--hidden", hidden);
  app.add_option("--layers", layers);
  app.add_option("--length", length);
  app.add_option("--batch", batch);
  app.add_option("--reps", reps);
  app.add_option("--threads", threads)->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const nn::ModelConfig cfg{vocab, hidden, layers, length};
  const nn::ModelParams params = nn::init_params(cfg, 7);
  Rng rng(3);
  std::vector<nn::Sample> samples(static_cast<std::size_t>(batch));
  for (auto& s : samples) {
    for (int t = 0; t < length; ++t) s.input.push_back(static_cast<int>(rng.below(vocab)));
    s.target = static_cast<int>(rng.below(vocab));
  }

  auto time = [&](auto&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      f();
      best = std::min(best, std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - t0).count());
    }
    return best;
  };

  nn::BatchGradient ref;
  const double serial = time([&] { ref = nn::batch_gradient_serial(params, samples); });
  std::cout << "kernel,threads,best_ms,speedup,identical\n";
  std::cout << "serial,1," << serial << ",1,1\n";
  for (int t : threads) {
    nn::BatchGradient got;
    const double ms = time([&] { got = nn::batch_gradient(params, samples, t); });
    std::cout << "openmp," << t << ',' << ms << ',' << serial / ms << ','
              << (got.grad == ref.grad && got.loss_sum == ref.loss_sum) << "\n";
  }
  std::cerr << "omp_get_max_threads " << omp_get_max_threads() << "\n";
  return 0;
}
