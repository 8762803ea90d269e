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

#include "vc/nn/codec.h"

#include <bit>
#include <cstring>

#include "vc/errors.h"

namespace vc::nn {

namespace {

constexpr char kMagic[4] = {'V', 'C', 'M', '1'};

template <typename U>
void put_le(Bytes& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void put_f64(Bytes& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(const Bytes& b) : b_(b) {}

  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<U>(b_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(U);
    return v;
  }

  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }

  void f64s(std::vector<double>& out, std::size_t n) {
    need(n * 8);
    out.resize(n);
    for (double& v : out) v = f64();
  }

  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw Error(ErrorCode::LengthMismatch, "truncated record");
  }

  bool done() const { return pos_ == b_.size(); }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  const Bytes& b_;
  std::size_t pos_ = 0;
};

}  // namespace

Bytes encode_model(const ModelParams& params, const OptimizerState& optimizer) {
  const ParamLayout layout(params.config);
  if (params.values.size() != layout.size() ||
      optimizer.cache.size() != layout.size()) {
    throw Error(ErrorCode::LengthMismatch, "model or cache length");
  }
  Bytes out;
  out.reserve(4 + 16 + 8 + 4 + 24 + 16 * layout.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_le(out, static_cast<std::uint32_t>(params.config.vocab_size));
  put_le(out, static_cast<std::uint32_t>(params.config.hidden_units));
  put_le(out, static_cast<std::uint32_t>(params.config.num_layers));
  put_le(out, static_cast<std::uint32_t>(params.config.sample_length));
  put_le(out, static_cast<std::uint64_t>(layout.size()));
  put_le(out, layout.checksum());
  put_f64(out, optimizer.hyper.learning_rate);
  put_f64(out, optimizer.hyper.rho);
  put_f64(out, optimizer.hyper.epsilon);
  for (double v : params.values) put_f64(out, v);
  for (double v : optimizer.cache) put_f64(out, v);
  return out;
}

ModelRecord decode_model(const Bytes& bytes) {
  Reader r(bytes);
  r.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::LengthMismatch, "bad model magic");
  }
  r.skip(4);
  ModelConfig cfg;
  cfg.vocab_size = static_cast<int>(r.le<std::uint32_t>());
  cfg.hidden_units = static_cast<int>(r.le<std::uint32_t>());
  cfg.num_layers = static_cast<int>(r.le<std::uint32_t>());
  cfg.sample_length = static_cast<int>(r.le<std::uint32_t>());
  const auto count = r.le<std::uint64_t>();
  const auto checksum = r.le<std::uint32_t>();
  try {
    cfg.validate();
  } catch (const Error&) {
    throw Error(ErrorCode::LengthMismatch, "bad model header");
  }
  const ParamLayout layout(cfg);
  if (count != layout.size() || checksum != layout.checksum()) {
    throw Error(ErrorCode::LengthMismatch, "model header disagrees with layout");
  }
  ModelRecord rec;
  rec.params.config = cfg;
  rec.optimizer.hyper.learning_rate = r.f64();
  rec.optimizer.hyper.rho = r.f64();
  rec.optimizer.hyper.epsilon = r.f64();
  r.f64s(rec.params.values, layout.size());
  r.f64s(rec.optimizer.cache, layout.size());
  if (!r.done()) throw Error(ErrorCode::LengthMismatch, "trailing bytes");
  return rec;
}

Bytes encode_gradient(const Gradients& grad) {
  Bytes out;
  out.reserve(grad.values.size() * 8);
  for (double v : grad.values) put_f64(out, v);
  return out;
}

Gradients decode_gradient(const Bytes& bytes, const ModelConfig& config) {
  const std::size_t n = parameter_count(config);
  if (bytes.size() != n * 8) {
    throw Error(ErrorCode::LengthMismatch, "gradient length");
  }
  Reader r(bytes);
  Gradients g{config, {}};
  r.f64s(g.values, n);
  return g;
}

}  // namespace vc::nn
