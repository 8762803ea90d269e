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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace vc {

using Bytes = std::vector<std::uint8_t>;

Bytes to_bytes(std::string_view s);
std::string to_text(const Bytes& b);

std::string base64_encode(const Bytes& data);
// Throws Error(MalformedEnvelope) on characters outside the alphabet or bad
// padding.
Bytes base64_decode(std::string_view text);

inline constexpr std::int64_t kDefaultVisibilityTimeoutMs = 30'000;

inline constexpr std::string_view kInitialQueue = "InitialQueue";
inline constexpr std::string_view kMapResultsQueue = "MapResultsQueue";

// Map and Reduce are the training task kinds; Custom carries a handler name
// so the broker never needs to know task semantics.
class TaskKind {
 public:
  enum class Tag { Map, Reduce, Custom };

  static TaskKind map() { return TaskKind(Tag::Map, {}); }
  static TaskKind reduce() { return TaskKind(Tag::Reduce, {}); }
  static TaskKind custom(std::string handler);

  // "map", "reduce" or "custom:<handler>".
  static TaskKind parse(std::string_view text);
  std::string str() const;

  Tag tag() const { return tag_; }
  const std::string& handler() const { return handler_; }

  bool operator==(const TaskKind&) const = default;

 private:
  TaskKind(Tag tag, std::string handler)
      : tag_(tag), handler_(std::move(handler)) {}

  Tag tag_ = Tag::Map;
  std::string handler_;
};

struct TaskEnvelope {
  std::uint64_t task_id = 0;
  std::string job_id;
  TaskKind kind = TaskKind::map();
  Bytes payload;
  std::uint64_t required_model_version = 0;
  std::uint32_t delivery_count = 0;
  std::uint64_t max_duration_ms = kDefaultVisibilityTimeoutMs;

  bool operator==(const TaskEnvelope&) const = default;
};

// Throws Error(MalformedEnvelope) when an invariant does not hold.
void validate(const TaskEnvelope& t);

nlohmann::json envelope_to_json(const TaskEnvelope& t);
TaskEnvelope envelope_from_json(const nlohmann::json& j);

// One JSON object per envelope, keys sorted, no trailing newline.
Bytes encode_envelope(const TaskEnvelope& t);
TaskEnvelope decode_envelope(const Bytes& b);

struct GradientResultMsg {
  std::string job_id;
  std::uint64_t model_version = 0;
  std::uint32_t minibatch_index = 0;
  Bytes gradient;
  double loss_sum = 0.0;
  std::uint32_t example_count = 0;

  bool operator==(const GradientResultMsg&) const = default;
};

Bytes encode_result(const GradientResultMsg& m);
GradientResultMsg decode_result(const Bytes& b);

}  // namespace vc
