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

#include "vc/errors.h"

#include <array>
#include <utility>

namespace vc {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 20> kNames{{
    {ErrorCode::QueueExists, "QueueExists"},
    {ErrorCode::NoSuchQueue, "NoSuchQueue"},
    {ErrorCode::UnknownLease, "UnknownLease"},
    {ErrorCode::NoSuchKey, "NoSuchKey"},
    {ErrorCode::VersionConflict, "VersionConflict"},
    {ErrorCode::Timeout, "Timeout"},
    {ErrorCode::MalformedEnvelope, "MalformedEnvelope"},
    {ErrorCode::MalformedRequest, "MalformedRequest"},
    {ErrorCode::Unsupported, "Unsupported"},
    {ErrorCode::InvalidArgument, "InvalidArgument"},
    {ErrorCode::ShapeMismatch, "ShapeMismatch"},
    {ErrorCode::LengthMismatch, "LengthMismatch"},
    {ErrorCode::IndexOutOfRange, "IndexOutOfRange"},
    {ErrorCode::CorpusTooShort, "CorpusTooShort"},
    {ErrorCode::JobInitFailed, "JobInitFailed"},
    {ErrorCode::TaskFailed, "TaskFailed"},
    {ErrorCode::ConnectionLost, "ConnectionLost"},
    {ErrorCode::WorkerKilled, "WorkerKilled"},
    {ErrorCode::ExperimentStalled, "ExperimentStalled"},
    {ErrorCode::MalformedEvents, "MalformedEvents"},
}};

std::string compose(ErrorCode code, const std::string& detail) {
  std::string msg(to_string(code));
  if (!detail.empty()) {
    msg += ": ";
    msg += detail;
  }
  return msg;
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return std::nullopt;
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(compose(code, detail)), code_(code) {}

}  // namespace vc
