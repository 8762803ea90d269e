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

#include <memory>
#include <string>

#include "vc/broker.h"
#include "vc/datastore.h"
#include "vc/session.h"
#include "vc/train/config.h"
#include "vc/train/plan.h"

namespace vc::testing {

// Deterministic text with a small alphabet, long enough for every test job.
inline std::string test_corpus(std::size_t n = 4000) {
  static const char* words[] = {"the ", "quick ", "brown ", "fox ", "jumps ", "over ",
                                "a ", "lazy ", "dog. ", "and ", "then ", "naps.\n"};
  std::string out;
  std::uint64_t x = 12345;
  while (out.size() < n) {
    x = x * 6364136223846793005ULL + 1442695040888963407ULL;
    out += words[(x >> 33) % 12];
  }
  out.resize(n);
  return out;
}

inline train::JobSpec small_job(std::string id = "job") {
  train::JobSpec spec;
  spec.job_id = std::move(id);
  auto& c = spec.training;
  c.batch_size = 8;
  c.minibatch_size = 2;
  c.minibatches_to_accumulate = 4;
  c.examples_per_epoch = 16;
  c.epochs = 2;
  c.hidden_units = 4;
  c.sample_length = 6;
  c.map_max_duration_ms = 5000;
  c.reduce_max_duration_ms = 5000;
  return spec;
}

struct LocalStack {
  Broker broker;
  DataStore store;
  LocalSession session{broker, store};
};

}  // namespace vc::testing
