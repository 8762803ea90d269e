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

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vc {

// Every failure that can cross a module or wire boundary. The names double
// as the "err" strings of the framed-JSON protocol.
enum class ErrorCode {
  QueueExists,
  NoSuchQueue,
  UnknownLease,
  NoSuchKey,
  VersionConflict,
  Timeout,
  MalformedEnvelope,
  MalformedRequest,
  Unsupported,
  InvalidArgument,
  ShapeMismatch,
  LengthMismatch,
  IndexOutOfRange,
  CorpusTooShort,
  JobInitFailed,
  TaskFailed,
  ConnectionLost,
  WorkerKilled,
  ExperimentStalled,
  MalformedEvents,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> error_code_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  explicit Error(ErrorCode code, const std::string& detail = {});

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vc
