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

#include "vc/job_model.h"

#include <openssl/evp.h>

#include <cmath>
#include <limits>

#include "vc/errors.h"

namespace vc {

using nlohmann::json;

Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::string to_text(const Bytes& b) { return std::string(b.begin(), b.end()); }

std::string base64_encode(const Bytes& data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  if (data.empty()) return out;
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                data.data(), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.empty()) return {};
  if (text.size() % 4 != 0) {
    throw Error(ErrorCode::MalformedEnvelope, "base64 length");
  }
  std::size_t padding = 0;
  if (text.back() == '=') ++padding;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++padding;
  for (std::size_t i = 0; i + padding < text.size(); ++i) {
    const char c = text[i];
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                    (c >= '0' && c <= '9') || c == '+' || c == '/';
    if (!ok) throw Error(ErrorCode::MalformedEnvelope, "base64 alphabet");
  }
  Bytes out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(
      out.data(), reinterpret_cast<const unsigned char*>(text.data()),
      static_cast<int>(text.size()));
  if (n < 0 || static_cast<std::size_t>(n) < padding) {
    throw Error(ErrorCode::MalformedEnvelope, "base64 decode");
  }
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

TaskKind TaskKind::custom(std::string handler) {
  if (handler.empty()) {
    throw Error(ErrorCode::InvalidArgument, "custom task kind needs a name");
  }
  return TaskKind(Tag::Custom, std::move(handler));
}

TaskKind TaskKind::parse(std::string_view text) {
  if (text == "map") return map();
  if (text == "reduce") return reduce();
  constexpr std::string_view prefix = "custom:";
  if (text.starts_with(prefix) && text.size() > prefix.size()) {
    return custom(std::string(text.substr(prefix.size())));
  }
  throw Error(ErrorCode::MalformedEnvelope,
              "unknown task kind '" + std::string(text) + "'");
}

std::string TaskKind::str() const {
  switch (tag_) {
    case Tag::Map:
      return "map";
    case Tag::Reduce:
      return "reduce";
    case Tag::Custom:
      return "custom:" + handler_;
  }
  return "map";
}

void validate(const TaskEnvelope& t) {
  if (t.job_id.empty()) throw Error(ErrorCode::MalformedEnvelope, "job_id");
  if (t.max_duration_ms == 0) {
    throw Error(ErrorCode::MalformedEnvelope, "max_duration_ms must be > 0");
  }
}

namespace {

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) {
    throw Error(ErrorCode::MalformedEnvelope,
                std::string("missing field ") + name);
  }
  return *it;
}

std::uint64_t unsigned_field(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_number_unsigned()) {
    throw Error(ErrorCode::MalformedEnvelope,
                std::string("field ") + name + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::uint32_t u32_field(const json& j, const char* name) {
  const std::uint64_t v = unsigned_field(j, name);
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::MalformedEnvelope,
                std::string("field ") + name + " out of range");
  }
  return static_cast<std::uint32_t>(v);
}

const std::string& string_field(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_string()) {
    throw Error(ErrorCode::MalformedEnvelope,
                std::string("field ") + name + " must be a string");
  }
  return v.get_ref<const std::string&>();
}

json parse_object(const Bytes& b) {
  json j = json::parse(b.begin(), b.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::MalformedEnvelope, "not a JSON object");
  }
  return j;
}

Bytes dump(const json& j) { return to_bytes(j.dump()); }

}  // namespace

json envelope_to_json(const TaskEnvelope& t) {
  return json{{"task_id", t.task_id},
              {"job_id", t.job_id},
              {"kind", t.kind.str()},
              {"payload_b64", base64_encode(t.payload)},
              {"required_model_version", t.required_model_version},
              {"delivery_count", t.delivery_count},
              {"max_duration_ms", t.max_duration_ms}};
}

TaskEnvelope envelope_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::MalformedEnvelope, "not an object");
  TaskEnvelope t;
  t.task_id = unsigned_field(j, "task_id");
  t.job_id = string_field(j, "job_id");
  t.kind = TaskKind::parse(string_field(j, "kind"));
  t.payload = base64_decode(string_field(j, "payload_b64"));
  t.required_model_version = unsigned_field(j, "required_model_version");
  t.delivery_count = u32_field(j, "delivery_count");
  t.max_duration_ms = j.contains("max_duration_ms")
                          ? unsigned_field(j, "max_duration_ms")
                          : static_cast<std::uint64_t>(kDefaultVisibilityTimeoutMs);
  validate(t);
  return t;
}

Bytes encode_envelope(const TaskEnvelope& t) { return dump(envelope_to_json(t)); }

TaskEnvelope decode_envelope(const Bytes& b) {
  return envelope_from_json(parse_object(b));
}

Bytes encode_result(const GradientResultMsg& m) {
  return dump(json{{"job_id", m.job_id},
                   {"model_version", m.model_version},
                   {"minibatch_index", m.minibatch_index},
                   {"gradient_b64", base64_encode(m.gradient)},
                   {"loss_sum", m.loss_sum},
                   {"example_count", m.example_count}});
}

GradientResultMsg decode_result(const Bytes& b) {
  const json j = parse_object(b);
  GradientResultMsg m;
  m.job_id = string_field(j, "job_id");
  m.model_version = unsigned_field(j, "model_version");
  m.minibatch_index = u32_field(j, "minibatch_index");
  m.gradient = base64_decode(string_field(j, "gradient_b64"));
  const json& loss = field(j, "loss_sum");
  if (!loss.is_number()) {
    throw Error(ErrorCode::MalformedEnvelope, "loss_sum must be a number");
  }
  m.loss_sum = loss.get<double>();
  m.example_count = u32_field(j, "example_count");
  if (m.example_count == 0 || !std::isfinite(m.loss_sum)) {
    throw Error(ErrorCode::MalformedEnvelope, "invalid gradient result");
  }
  return m;
}

}  // namespace vc
