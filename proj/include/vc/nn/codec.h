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

#include "vc/job_model.h"
#include "vc/nn/model.h"
#include "vc/nn/rmsprop.h"

namespace vc::nn {

// Model record layout, all integers and reals little-endian:
//
//   char[4]  magic "VCM1"
//   u32      vocab_size, hidden_units, num_layers, sample_length
//   u64      parameter count P
//   u32      layout checksum (ParamLayout::checksum)
//   f64      learning_rate, rho, epsilon
//   f64[P]   parameters in layout order
//   f64[P]   rmsprop cache
//
// This is the payload of the versioned model record and, base64-encoded,
// what crosses the wire.
struct ModelRecord {
  ModelParams params;
  OptimizerState optimizer;

  bool operator==(const ModelRecord&) const = default;
};

Bytes encode_model(const ModelParams& params, const OptimizerState& optimizer);
// Throws Error(LengthMismatch) on truncation or a header that disagrees
// with the body.
ModelRecord decode_model(const Bytes& bytes);

// Bare f64[P] little-endian.
Bytes encode_gradient(const Gradients& grad);
Gradients decode_gradient(const Bytes& bytes, const ModelConfig& config);

}  // namespace vc::nn
