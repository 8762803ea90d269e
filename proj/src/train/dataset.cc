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

#include "vc/train/dataset.h"

#include "vc/errors.h"
#include "vc/rng.h"

namespace vc::train {

Vocab build_vocab(std::string_view corpus) {
  std::array<bool, 256> seen{};
  for (char c : corpus) seen[static_cast<unsigned char>(c)] = true;
  Vocab v;
  v.index.fill(-1);
  for (int b = 0; b < 256; ++b) {
    if (!seen[static_cast<std::size_t>(b)]) continue;
    v.index[static_cast<std::size_t>(b)] = static_cast<int>(v.symbols.size());
    v.symbols.push_back(static_cast<unsigned char>(b));
  }
  return v;
}

Dataset build_dataset(std::string_view corpus, const TrainingConfig& config) {
  const auto L = static_cast<std::uint64_t>(config.sample_length);
  if (config.sample_length < 1 || corpus.size() <= L + 1) {
    throw Error(ErrorCode::CorpusTooShort,
                std::to_string(corpus.size()) + " bytes for windows of " +
                    std::to_string(config.sample_length));
  }
  Dataset d;
  d.vocab = build_vocab(corpus);
  d.sample_length = config.sample_length;
  // Valid starts are 0 ..= size - L - 1 so the target byte exists.
  const std::uint64_t range = corpus.size() - L;
  Rng rng(config.shuffle_seed, 0xda7a);
  d.starts.resize(config.total_examples());
  for (auto& s : d.starts) s = rng.below(range);
  return d;
}

nn::Sample make_sample(std::string_view corpus, const Vocab& vocab, std::uint64_t start,
                       int sample_length) {
  const auto L = static_cast<std::uint64_t>(sample_length);
  if (start + L >= corpus.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "window past end of corpus");
  }
  auto idx = [&](std::uint64_t pos) {
    const int i = vocab.index[static_cast<unsigned char>(corpus[pos])];
    if (i < 0) throw Error(ErrorCode::IndexOutOfRange, "byte outside vocabulary");
    return i;
  };
  nn::Sample s;
  s.input.reserve(L);
  for (std::uint64_t t = 0; t < L; ++t) s.input.push_back(idx(start + t));
  s.target = idx(start + L);
  return s;
}

std::vector<nn::Sample> gather_samples(std::string_view corpus, const Dataset& data,
                                       std::uint64_t first, std::uint64_t count) {
  if (first + count > data.starts.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "sample range past the table");
  }
  std::vector<nn::Sample> out;
  out.reserve(count);
  for (std::uint64_t i = first; i < first + count; ++i) {
    out.push_back(make_sample(corpus, data.vocab, data.starts[i], data.sample_length));
  }
  return out;
}

Bytes encode_starts(const std::vector<std::uint64_t>& starts) {
  Bytes out;
  out.reserve(starts.size() * 8);
  for (std::uint64_t s : starts) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(s >> (8 * i)));
  }
  return out;
}

std::vector<std::uint64_t> decode_starts(const Bytes& bytes) {
  if (bytes.size() % 8 != 0) throw Error(ErrorCode::LengthMismatch, "sample table");
  std::vector<std::uint64_t> out(bytes.size() / 8);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[k * 8 + i]) << (8 * i);
    out[k] = v;
  }
  return out;
}

}  // namespace vc::train
