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

#include <set>

#include "doctest.h"
#include "vc/errors.h"
#include "vc/job_model.h"
#include "vc/rng.h"

using namespace vc;

namespace {

TaskEnvelope sample_envelope() {
  TaskEnvelope t;
  t.task_id = 42;
  t.job_id = "job-a";
  t.kind = TaskKind::reduce();
  t.payload = to_bytes("{\"step\":3}");
  t.required_model_version = 3;
  t.delivery_count = 2;
  t.max_duration_ms = 1500;
  return t;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("base64 matches RFC 4648 vectors") {
  const std::pair<const char*, const char*> vectors[] = {
      {"", ""},         {"f", "Zg=="},         {"fo", "Zm8="},         {"foo", "Zm9v"},
      {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"}};
  for (auto [plain, encoded] : vectors) {
    CHECK(base64_encode(to_bytes(plain)) == encoded);
    CHECK(to_text(base64_decode(encoded)) == plain);
  }
  CHECK(code_of([] { base64_decode("Zm9"); }) == ErrorCode::MalformedEnvelope);
  CHECK(code_of([] { base64_decode("Zm9*"); }) == ErrorCode::MalformedEnvelope);
}

TEST_CASE("base64 round-trips every byte value") {
  Bytes all(256);
  for (int i = 0; i < 256; ++i) all[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  for (std::size_t n = 0; n <= all.size(); n += 17) {
    const Bytes part(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
    CHECK(base64_decode(base64_encode(part)) == part);
  }
}

TEST_CASE("task kinds") {
  CHECK(TaskKind::parse("map") == TaskKind::map());
  CHECK(TaskKind::parse("reduce") == TaskKind::reduce());
  CHECK(TaskKind::parse("custom:linear-softmax-grad").handler() == "linear-softmax-grad");
  CHECK(TaskKind::custom("x").str() == "custom:x");
  CHECK(code_of([] { TaskKind::parse("custom:"); }) == ErrorCode::MalformedEnvelope);
  CHECK(code_of([] { TaskKind::parse("shuffle"); }) == ErrorCode::MalformedEnvelope);
}

TEST_CASE("envelope round-trip") {
  const TaskEnvelope t = sample_envelope();
  CHECK(decode_envelope(encode_envelope(t)) == t);

  SUBCASE("empty payload") {
    TaskEnvelope e = t;
    e.payload.clear();
    CHECK(decode_envelope(encode_envelope(e)) == e);
  }
  SUBCASE("1 MiB payload") {
    TaskEnvelope e = t;
    Rng rng(5);
    e.payload.resize(1 << 20);
    for (auto& b : e.payload) b = static_cast<std::uint8_t>(rng.next());
    CHECK(decode_envelope(encode_envelope(e)) == e);
  }
  SUBCASE("custom kind") {
    TaskEnvelope e = t;
    e.kind = TaskKind::custom("linear-softmax-grad");
    CHECK(decode_envelope(encode_envelope(e)) == e);
  }
}

TEST_CASE("encoding is deterministic and uses the documented field names") {
  const TaskEnvelope t = sample_envelope();
  CHECK(encode_envelope(t) == encode_envelope(t));
  const auto j = nlohmann::json::parse(to_text(encode_envelope(t)));
  std::set<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.insert(it.key());
  CHECK(keys == std::set<std::string>{"task_id", "job_id", "kind", "payload_b64",
                                      "required_model_version", "delivery_count",
                                      "max_duration_ms"});
}

TEST_CASE("field perturbations give pairwise distinct encodings") {
  const TaskEnvelope base = sample_envelope();
  std::vector<TaskEnvelope> variants(8, base);
  variants[1].task_id += 1;
  variants[2].job_id += "x";
  variants[3].kind = TaskKind::map();
  variants[4].payload.push_back(0);
  variants[5].required_model_version += 1;
  variants[6].delivery_count += 1;
  variants[7].max_duration_ms += 1;
  std::set<Bytes> seen;
  for (const auto& v : variants) seen.insert(encode_envelope(v));
  CHECK(seen.size() == variants.size());
}

TEST_CASE("decode rejects malformed input") {
  CHECK(code_of([] { decode_envelope({}); }) == ErrorCode::MalformedEnvelope);
  CHECK(code_of([] { decode_envelope(to_bytes("[]")); }) == ErrorCode::MalformedEnvelope);
  CHECK(code_of([] {
          decode_envelope(to_bytes(R"({"task_id":-1,"job_id":"j","kind":"map","payload_b64":"",)"
                                   R"("required_model_version":0,"delivery_count":0})"));
        }) == ErrorCode::MalformedEnvelope);
  CHECK(code_of([] {
          decode_envelope(to_bytes(R"({"task_id":1,"job_id":"","kind":"map","payload_b64":"",)"
                                   R"("required_model_version":0,"delivery_count":0})"));
        }) == ErrorCode::MalformedEnvelope);
  CHECK(code_of([] {
          decode_envelope(to_bytes(R"({"task_id":1,"job_id":"j","kind":"map","payload_b64":"",)"
                                   R"("required_model_version":0,"delivery_count":0,)"
                                   R"("max_duration_ms":0})"));
        }) == ErrorCode::MalformedEnvelope);
}

TEST_CASE("missing max_duration_ms takes the default visibility timeout") {
  const TaskEnvelope t = decode_envelope(
      to_bytes(R"({"task_id":1,"job_id":"j","kind":"map","payload_b64":"",)"
               R"("required_model_version":0,"delivery_count":0})"));
  CHECK(t.max_duration_ms == 30000);
}

TEST_CASE("single-byte corruption never crashes the decoder") {
  const TaskEnvelope t = sample_envelope();
  const Bytes good = encode_envelope(t);
  Rng rng(11);
  int rejected = 0, changed = 0;
  for (std::size_t pos = 0; pos < good.size(); ++pos) {
    for (int trial = 0; trial < 8; ++trial) {
      Bytes bad = good;
      bad[pos] = static_cast<std::uint8_t>(bad[pos] ^ (1u << (rng.below(8))));
      try {
        const TaskEnvelope d = decode_envelope(bad);
        validate(d);
        if (!(d == t)) ++changed;
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MalformedEnvelope);
        ++rejected;
      }
    }
  }
  CHECK(rejected > 0);
  // The trailing '}' is structural: any flip there must be rejected.
  for (int bit = 0; bit < 8; ++bit) {
    Bytes bad = good;
    bad.back() = static_cast<std::uint8_t>(bad.back() ^ (1u << bit));
    CHECK(code_of([&] { decode_envelope(bad); }) == ErrorCode::MalformedEnvelope);
  }
  MESSAGE("rejected " << rejected << ", decoded to a different value " << changed);
}

TEST_CASE("gradient result messages") {
  GradientResultMsg m{"job", 7, 3, Bytes{1, 2, 3, 4, 5, 6, 7, 8}, 12.5, 8};
  CHECK(decode_result(encode_result(m)) == m);
  const auto j = nlohmann::json::parse(to_text(encode_result(m)));
  std::set<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.insert(it.key());
  CHECK(keys == std::set<std::string>{"job_id", "model_version", "minibatch_index",
                                      "gradient_b64", "loss_sum", "example_count"});
  GradientResultMsg zero = m;
  zero.example_count = 0;
  CHECK(code_of([&] { decode_result(encode_result(zero)); }) == ErrorCode::MalformedEnvelope);
  CHECK(code_of([] { decode_result(to_bytes("nope")); }) == ErrorCode::MalformedEnvelope);
}

TEST_CASE("loss_sum survives the text encoding bit for bit") {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    GradientResultMsg m{"j", 0, 0, {}, rng.uniform(0, 100) * std::exp(rng.uniform(-30, 30)), 1};
    CHECK(decode_result(encode_result(m)).loss_sum == m.loss_sum);
  }
}

TEST_CASE("error names round-trip") {
  for (int c = 0; c <= static_cast<int>(ErrorCode::MalformedEvents); ++c) {
    const auto code = static_cast<ErrorCode>(c);
    CHECK(error_code_from_string(to_string(code)) == code);
  }
  CHECK_FALSE(error_code_from_string("Nope").has_value());
}
