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

#include "vc/nn/model.h"

#include <boost/crc.hpp>

#include <cmath>
#include <numeric>

#include "vc/errors.h"
#include "vc/rng.h"

namespace vc::nn {

void ModelConfig::validate() const {
  if (vocab_size < 2) throw Error(ErrorCode::InvalidArgument, "vocab_size < 2");
  if (hidden_units < 1) throw Error(ErrorCode::InvalidArgument, "hidden_units < 1");
  if (num_layers < 1) throw Error(ErrorCode::InvalidArgument, "num_layers < 1");
  if (sample_length < 1) {
    throw Error(ErrorCode::InvalidArgument, "sample_length < 1");
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(),
                                        std::size_t{1}, std::multiplies<>());
  return Tensor{std::move(shape), std::vector<double>(n, 0.0)};
}

ParamLayout::ParamLayout(const ModelConfig& config) : config_(config) {
  config.validate();
  const auto H = static_cast<std::size_t>(config.hidden_units);
  const auto V = static_cast<std::size_t>(config.vocab_size);
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    const std::size_t n = std::accumulate(shape.begin(), shape.end(),
                                          std::size_t{1}, std::multiplies<>());
    segments_.push_back(Segment{std::move(name), std::move(shape), offset, n});
    offset += n;
    return segments_.back().offset;
  };
  for (int l = 0; l < config.num_layers; ++l) {
    LayerSlots slots;
    slots.in_dim = l == 0 ? config.vocab_size : config.hidden_units;
    const std::string prefix = "lstm" + std::to_string(l) + ".";
    slots.kernel = add(prefix + "kernel", {static_cast<std::size_t>(slots.in_dim), 4 * H});
    slots.recurrent = add(prefix + "recurrent_kernel", {H, 4 * H});
    slots.bias = add(prefix + "bias", {4 * H});
    layers_.push_back(slots);
  }
  dense_kernel_ = add("dense.kernel", {H, V});
  dense_bias_ = add("dense.bias", {V});
  size_ = offset;
}

std::uint32_t ParamLayout::checksum() const {
  std::string table;
  for (const Segment& s : segments_) {
    table += s.name;
    for (std::size_t d : s.shape) table += ":" + std::to_string(d);
    table += "@" + std::to_string(s.offset) + ";";
  }
  boost::crc_32_type crc;
  crc.process_bytes(table.data(), table.size());
  return crc.checksum();
}

std::size_t parameter_count(const ModelConfig& config) {
  return ParamLayout(config).size();
}

Gradients zero_gradients(const ModelConfig& config) {
  return Gradients{config, std::vector<double>(parameter_count(config), 0.0)};
}

std::vector<double> flatten(const ModelParams& params) { return params.values; }
std::vector<double> flatten(const Gradients& grads) { return grads.values; }

ModelParams unflatten_params(std::vector<double> values, const ModelConfig& config) {
  if (values.size() != parameter_count(config)) {
    throw Error(ErrorCode::LengthMismatch,
                "expected " + std::to_string(parameter_count(config)) +
                    " values, got " + std::to_string(values.size()));
  }
  return ModelParams{config, std::move(values)};
}

Gradients unflatten_gradients(std::vector<double> values, const ModelConfig& config) {
  if (values.size() != parameter_count(config)) {
    throw Error(ErrorCode::LengthMismatch,
                "expected " + std::to_string(parameter_count(config)) +
                    " values, got " + std::to_string(values.size()));
  }
  return Gradients{config, std::move(values)};
}

std::vector<std::pair<std::string, Tensor>> named_tensors(const ModelParams& params) {
  const ParamLayout layout(params.config);
  if (params.values.size() != layout.size()) {
    throw Error(ErrorCode::LengthMismatch, "parameter vector");
  }
  std::vector<std::pair<std::string, Tensor>> out;
  for (const Segment& s : layout.segments()) {
    auto begin = params.values.begin() + static_cast<std::ptrdiff_t>(s.offset);
    out.emplace_back(s.name,
                     Tensor{s.shape, std::vector<double>(
                                         begin, begin + static_cast<std::ptrdiff_t>(s.size))});
  }
  return out;
}

namespace {

void glorot_fill(std::span<double> dst, std::size_t fan_in, std::size_t fan_out,
                 Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& w : dst) w = rng.uniform(-limit, limit);
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  const ParamLayout layout(config);
  ModelParams params{config, std::vector<double>(layout.size(), 0.0)};
  std::span<double> all(params.values);
  const auto H = static_cast<std::size_t>(config.hidden_units);
  const auto V = static_cast<std::size_t>(config.vocab_size);

  for (int l = 0; l < config.num_layers; ++l) {
    const LayerSlots& s = layout.layer(l);
    const auto in = static_cast<std::size_t>(s.in_dim);
    Rng kernel_rng(seed, 2 * static_cast<std::uint64_t>(l));
    glorot_fill(all.subspan(s.kernel, in * 4 * H), in, 4 * H, kernel_rng);
    Rng recurrent_rng(seed, 2 * static_cast<std::uint64_t>(l) + 1);
    glorot_fill(all.subspan(s.recurrent, H * 4 * H), H, 4 * H, recurrent_rng);
    for (std::size_t k = 0; k < H; ++k) all[s.bias + H + k] = 1.0;
  }
  Rng dense_rng(seed, 1u << 20);
  glorot_fill(all.subspan(layout.dense_kernel(), H * V), H, V, dense_rng);
  return params;
}

}  // namespace vc::nn
