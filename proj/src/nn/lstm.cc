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

#include "vc/nn/lstm.h"

#include <algorithm>
#include <cmath>

#include "vc/errors.h"

namespace vc::nn {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Stable log-sum-exp with log1p on the non-maximal terms, so a dominant
// logit yields a loss that underflows cleanly to zero.
double log_sum_exp(std::span<const double> z) {
  std::size_t arg = 0;
  for (std::size_t v = 1; v < z.size(); ++v) {
    if (z[v] > z[arg]) arg = v;
  }
  double rest = 0.0;
  for (std::size_t v = 0; v < z.size(); ++v) {
    if (v != arg) rest += std::exp(z[v] - z[arg]);
  }
  return z[arg] + std::log1p(rest);
}

void softmax_row(std::span<const double> z, std::span<double> p) {
  const double lse = log_sum_exp(z);
  for (std::size_t v = 0; v < z.size(); ++v) p[v] = std::exp(z[v] - lse);
}

}  // namespace

void check_sample(const ModelConfig& config, const Sample& sample) {
  if (sample.input.size() != static_cast<std::size_t>(config.sample_length)) {
    throw Error(ErrorCode::ShapeMismatch, "sample length");
  }
  for (int c : sample.input) {
    if (c < 0 || c >= config.vocab_size) {
      throw Error(ErrorCode::ShapeMismatch, "input index outside vocabulary");
    }
  }
  if (sample.target < 0 || sample.target >= config.vocab_size) {
    throw Error(ErrorCode::ShapeMismatch, "target outside vocabulary");
  }
}

SampleTrace forward_sample(const ModelParams& params, const Sample& sample) {
  const ModelConfig& cfg = params.config;
  check_sample(cfg, sample);
  const ParamLayout layout(cfg);
  if (params.values.size() != layout.size()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter vector length");
  }
  const auto H = static_cast<std::size_t>(cfg.hidden_units);
  const auto V = static_cast<std::size_t>(cfg.vocab_size);
  const auto L = static_cast<std::size_t>(cfg.sample_length);
  const std::size_t G = 4 * H;
  const double* w = params.values.data();

  SampleTrace trace;
  trace.layers.resize(static_cast<std::size_t>(cfg.num_layers));
  std::vector<double> z(G);

  for (int l = 0; l < cfg.num_layers; ++l) {
    const LayerSlots& slot = layout.layer(l);
    LayerTrace& lt = trace.layers[static_cast<std::size_t>(l)];
    lt.gates.assign(L * G, 0.0);
    lt.cell.assign(L * H, 0.0);
    lt.tanh_cell.assign(L * H, 0.0);
    lt.hidden.assign(L * H, 0.0);
    const LayerTrace* below = l > 0 ? &trace.layers[static_cast<std::size_t>(l) - 1] : nullptr;
    const double* kernel = w + slot.kernel;
    const double* recurrent = w + slot.recurrent;
    const double* bias = w + slot.bias;

    for (std::size_t t = 0; t < L; ++t) {
      std::copy(bias, bias + G, z.begin());
      if (below == nullptr) {
        const double* row = kernel + static_cast<std::size_t>(sample.input[t]) * G;
        for (std::size_t j = 0; j < G; ++j) z[j] += row[j];
      } else {
        const double* x = below->hidden.data() + t * H;
        for (std::size_t k = 0; k < H; ++k) {
          const double xk = x[k];
          const double* row = kernel + k * G;
          for (std::size_t j = 0; j < G; ++j) z[j] += xk * row[j];
        }
      }
      if (t > 0) {
        const double* h_prev = lt.hidden.data() + (t - 1) * H;
        for (std::size_t k = 0; k < H; ++k) {
          const double hk = h_prev[k];
          const double* row = recurrent + k * G;
          for (std::size_t j = 0; j < G; ++j) z[j] += hk * row[j];
        }
      }
      double* gates = lt.gates.data() + t * G;
      for (std::size_t k = 0; k < H; ++k) {
        gates[k] = sigmoid(z[k]);
        gates[H + k] = sigmoid(z[H + k]);
        gates[2 * H + k] = std::tanh(z[2 * H + k]);
        gates[3 * H + k] = sigmoid(z[3 * H + k]);
      }
      for (std::size_t k = 0; k < H; ++k) {
        const double c_prev = t > 0 ? lt.cell[(t - 1) * H + k] : 0.0;
        const double c = gates[H + k] * c_prev + gates[k] * gates[2 * H + k];
        const double tc = std::tanh(c);
        lt.cell[t * H + k] = c;
        lt.tanh_cell[t * H + k] = tc;
        lt.hidden[t * H + k] = gates[3 * H + k] * tc;
      }
    }
  }

  const double* h_top = trace.layers.back().hidden.data() + (L - 1) * H;
  const double* dense = w + layout.dense_kernel();
  trace.logits.assign(w + layout.dense_bias(), w + layout.dense_bias() + V);
  for (std::size_t k = 0; k < H; ++k) {
    const double hk = h_top[k];
    const double* row = dense + k * V;
    for (std::size_t v = 0; v < V; ++v) trace.logits[v] += hk * row[v];
  }
  return trace;
}

double backward_sample(const ModelParams& params, const Sample& sample,
                       const SampleTrace& trace, std::span<double> grad) {
  const ModelConfig& cfg = params.config;
  check_sample(cfg, sample);
  const ParamLayout layout(cfg);
  if (grad.size() != layout.size() ||
      trace.layers.size() != static_cast<std::size_t>(cfg.num_layers) ||
      trace.logits.size() != static_cast<std::size_t>(cfg.vocab_size)) {
    throw Error(ErrorCode::ShapeMismatch, "backward buffers");
  }
  const auto H = static_cast<std::size_t>(cfg.hidden_units);
  const auto V = static_cast<std::size_t>(cfg.vocab_size);
  const auto L = static_cast<std::size_t>(cfg.sample_length);
  const std::size_t G = 4 * H;
  const double* w = params.values.data();
  std::fill(grad.begin(), grad.end(), 0.0);

  // Output layer: d(loss)/d(logits) = softmax - onehot.
  std::vector<double> dlogits(V);
  softmax_row(trace.logits, dlogits);
  const double loss = log_sum_exp(trace.logits) -
                      trace.logits[static_cast<std::size_t>(sample.target)];
  dlogits[static_cast<std::size_t>(sample.target)] -= 1.0;

  const double* h_top = trace.layers.back().hidden.data() + (L - 1) * H;
  const double* dense = w + layout.dense_kernel();
  double* g_dense = grad.data() + layout.dense_kernel();
  double* g_dense_bias = grad.data() + layout.dense_bias();
  for (std::size_t v = 0; v < V; ++v) g_dense_bias[v] = dlogits[v];
  // External gradient arriving at each layer's hidden state, [L, H].
  std::vector<double> dh_ext(L * H, 0.0);
  for (std::size_t k = 0; k < H; ++k) {
    double acc = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      g_dense[k * V + v] = h_top[k] * dlogits[v];
      acc += dense[k * V + v] * dlogits[v];
    }
    dh_ext[(L - 1) * H + k] = acc;
  }

  std::vector<double> dh_next(H), dc_next(H), dz(G), dx;
  for (int l = cfg.num_layers - 1; l >= 0; --l) {
    const LayerSlots& slot = layout.layer(l);
    const LayerTrace& lt = trace.layers[static_cast<std::size_t>(l)];
    const LayerTrace* below = l > 0 ? &trace.layers[static_cast<std::size_t>(l) - 1] : nullptr;
    const double* kernel = w + slot.kernel;
    const double* recurrent = w + slot.recurrent;
    double* g_kernel = grad.data() + slot.kernel;
    double* g_recurrent = grad.data() + slot.recurrent;
    double* g_bias = grad.data() + slot.bias;
    if (below != nullptr) dx.assign(L * H, 0.0);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    std::fill(dc_next.begin(), dc_next.end(), 0.0);

    for (std::size_t step = L; step-- > 0;) {
      const double* gates = lt.gates.data() + step * G;
      for (std::size_t k = 0; k < H; ++k) {
        const double i = gates[k];
        const double f = gates[H + k];
        const double g = gates[2 * H + k];
        const double o = gates[3 * H + k];
        const double tc = lt.tanh_cell[step * H + k];
        const double c_prev = step > 0 ? lt.cell[(step - 1) * H + k] : 0.0;
        const double dhk = dh_ext[step * H + k] + dh_next[k];
        const double dc = dc_next[k] + dhk * o * (1.0 - tc * tc);
        dz[k] = dc * g * i * (1.0 - i);
        dz[H + k] = dc * c_prev * f * (1.0 - f);
        dz[2 * H + k] = dc * i * (1.0 - g * g);
        dz[3 * H + k] = dhk * tc * o * (1.0 - o);
        dc_next[k] = dc * f;
      }
      for (std::size_t j = 0; j < G; ++j) g_bias[j] += dz[j];

      if (below == nullptr) {
        double* row = g_kernel + static_cast<std::size_t>(sample.input[step]) * G;
        for (std::size_t j = 0; j < G; ++j) row[j] += dz[j];
      } else {
        const double* x = below->hidden.data() + step * H;
        for (std::size_t k = 0; k < H; ++k) {
          double* row = g_kernel + k * G;
          const double* wrow = kernel + k * G;
          double acc = 0.0;
          for (std::size_t j = 0; j < G; ++j) {
            row[j] += x[k] * dz[j];
            acc += wrow[j] * dz[j];
          }
          dx[step * H + k] = acc;
        }
      }

      for (std::size_t k = 0; k < H; ++k) {
        const double* urow = recurrent + k * G;
        double acc = 0.0;
        for (std::size_t j = 0; j < G; ++j) acc += urow[j] * dz[j];
        dh_next[k] = acc;
      }
      if (step > 0) {
        const double* h_prev = lt.hidden.data() + (step - 1) * H;
        for (std::size_t k = 0; k < H; ++k) {
          double* row = g_recurrent + k * G;
          for (std::size_t j = 0; j < G; ++j) row[j] += h_prev[k] * dz[j];
        }
      }
    }
    if (below != nullptr) dh_ext.swap(dx);
  }
  return loss;
}

ForwardResult forward(const ModelParams& params, std::span<const Sample> batch) {
  if (batch.empty()) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  const auto V = static_cast<std::size_t>(params.config.vocab_size);
  ForwardResult out;
  out.logits = Tensor::zeros({batch.size(), V});
  out.traces.reserve(batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    out.traces.push_back(forward_sample(params, batch[n]));
    std::copy(out.traces.back().logits.begin(), out.traces.back().logits.end(),
              out.logits.row(n).begin());
  }
  return out;
}

Tensor softmax(const Tensor& logits) {
  Tensor p = Tensor::zeros(logits.shape);
  for (std::size_t r = 0; r < logits.rows(); ++r) softmax_row(logits.row(r), p.row(r));
  return p;
}

LossResult loss(const Tensor& logits, std::span<const int> targets) {
  if (targets.size() != logits.rows()) {
    throw Error(ErrorCode::IndexOutOfRange, "one target per logit row");
  }
  LossResult out;
  out.per_sample.reserve(targets.size());
  double sum = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= logits.cols()) {
      throw Error(ErrorCode::IndexOutOfRange, "target " + std::to_string(t));
    }
    const auto z = logits.row(r);
    out.per_sample.push_back(log_sum_exp(z) - z[static_cast<std::size_t>(t)]);
    sum += out.per_sample.back();
  }
  out.mean = targets.empty() ? 0.0 : sum / static_cast<double>(targets.size());
  return out;
}

BackwardResult backward(const ModelParams& params, std::span<const Sample> batch,
                        const ForwardResult& cache) {
  if (cache.traces.size() != batch.size()) {
    throw Error(ErrorCode::ShapeMismatch, "cache does not match batch");
  }
  BackwardResult out{zero_gradients(params.config), 0.0};
  std::vector<double> one(out.grad.values.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    out.loss_sum += backward_sample(params, batch[n], cache.traces[n], one);
    for (std::size_t j = 0; j < one.size(); ++j) out.grad.values[j] += one[j];
  }
  return out;
}

}  // namespace vc::nn
