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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vc::nn {

struct ModelConfig {
  int vocab_size = 2;
  int hidden_units = 50;
  int num_layers = 2;
  int sample_length = 40;

  // Throws Error(InvalidArgument).
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Row-major dense array.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  static Tensor zeros(std::vector<std::size_t> shape);
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data).subspan(r * cols(), cols());
  }
  std::span<double> row(std::size_t r) {
    return std::span<double>(data).subspan(r * cols(), cols());
  }
};

struct LayerSlots {
  int in_dim = 0;
  std::size_t kernel = 0;     // [in_dim, 4H]
  std::size_t recurrent = 0;  // [H, 4H]
  std::size_t bias = 0;       // [4H]
};

struct Segment {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Fixed order of every parameter in the flat vector: for each LSTM layer its
// kernel, recurrent kernel and bias, then the dense kernel and bias. Inside
// the 4H columns the gate blocks are input, forget, cell, output.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::size_t size() const { return size_; }
  const LayerSlots& layer(int l) const { return layers_[static_cast<std::size_t>(l)]; }
  std::size_t dense_kernel() const { return dense_kernel_; }  // [H, V]
  std::size_t dense_bias() const { return dense_bias_; }      // [V]
  const std::vector<Segment>& segments() const { return segments_; }

  // CRC-32 over the textual layout table; part of the model header.
  std::uint32_t checksum() const;

 private:
  ModelConfig config_;
  std::vector<LayerSlots> layers_;
  std::vector<Segment> segments_;
  std::size_t dense_kernel_ = 0;
  std::size_t dense_bias_ = 0;
  std::size_t size_ = 0;
};

std::size_t parameter_count(const ModelConfig& config);

struct ModelParams {
  ModelConfig config;
  std::vector<double> values;

  bool operator==(const ModelParams&) const = default;
};

struct Gradients {
  ModelConfig config;
  std::vector<double> values;

  bool operator==(const Gradients&) const = default;
};

Gradients zero_gradients(const ModelConfig& config);

std::vector<double> flatten(const ModelParams& params);
std::vector<double> flatten(const Gradients& grads);
// Throw Error(LengthMismatch) when the vector does not fit the layout.
ModelParams unflatten_params(std::vector<double> values, const ModelConfig& config);
Gradients unflatten_gradients(std::vector<double> values, const ModelConfig& config);

// Copies each layout segment into its own tensor, in layout order.
std::vector<std::pair<std::string, Tensor>> named_tensors(const ModelParams& params);

// Glorot-uniform kernels, zero biases except a forget-gate bias of 1.0.
// Each tensor draws from its own stream keyed by layer index.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

}  // namespace vc::nn
