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

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "vc/job_model.h"
#include "vc/nn/lstm.h"
#include "vc/train/config.h"

namespace vc::train {

// Sorted distinct bytes of the corpus.
struct Vocab {
  std::vector<unsigned char> symbols;
  std::array<int, 256> index{};  // -1 for bytes not in the corpus

  int size() const { return static_cast<int>(symbols.size()); }
};

Vocab build_vocab(std::string_view corpus);

// Window start offsets for every example of every epoch. Example i is the
// window [starts[i], starts[i] + L) and its target is the byte at
// starts[i] + L. Offsets are seeded-uniform over the valid range.
struct Dataset {
  Vocab vocab;
  std::vector<std::uint64_t> starts;
  int sample_length = 0;
};

// Throws Error(CorpusTooShort) unless corpus.size() > L + 1.
Dataset build_dataset(std::string_view corpus, const TrainingConfig& config);

nn::Sample make_sample(std::string_view corpus, const Vocab& vocab, std::uint64_t start,
                       int sample_length);

// Examples [first, first + count) of the table.
std::vector<nn::Sample> gather_samples(std::string_view corpus, const Dataset& data,
                                       std::uint64_t first, std::uint64_t count);

Bytes encode_starts(const std::vector<std::uint64_t>& starts);
std::vector<std::uint64_t> decode_starts(const Bytes& bytes);

}  // namespace vc::train
