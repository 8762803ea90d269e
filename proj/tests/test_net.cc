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

#include <doctest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <atomic>
#include <optional>
#include <thread>

#include "train_fixture.h"
#include "vc/errors.h"
#include "vc/net/client.h"
#include "vc/net/protocol.h"
#include "vc/net/server.h"
#include "vc/nn/codec.h"
#include "vc/train/handlers.h"
#include "vc/train/sequential.h"
#include "vc/worker.h"

using namespace vc;
using namespace vc::net;
using nlohmann::json;

namespace {

template <class F>
std::optional<ErrorCode> code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

json call(std::string_view frame, Broker* b, DataStore* s) { return json::parse(handle_frame(frame, b, s)); }

TaskEnvelope sample_task(std::uint64_t id, std::uint64_t version = 0) {
  TaskEnvelope t;
  t.task_id = id;
  t.job_id = "j";
  t.kind = TaskKind::custom("echo");
  t.payload = to_bytes("hello");
  t.required_model_version = version;
  t.max_duration_ms = 1000;
  return t;
}

}  // namespace

TEST_CASE("endpoint parsing") {
  CHECK(Endpoint::parse("10.0.0.1:7400") == Endpoint{"10.0.0.1", 7400});
  CHECK(Endpoint::parse(":81") == Endpoint{"127.0.0.1", 81});
  CHECK(Endpoint{"h", 9}.str() == "h:9");
  CHECK(code_of([] { Endpoint::parse("nohost"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { Endpoint::parse("h:99999"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("protocol handler") {
  auto clock = std::make_shared<ManualClock>(1000);
  Broker broker(clock);
  DataStore store;

  CHECK(call(R"({"op":"ping"})", &broker, &store)["ok"] == "pong");
  CHECK(call(R"({"op":"create_queue","queue":"q"})", &broker, &store)["ok"] == true);
  CHECK(call(R"({"op":"create_queue","queue":"q"})", &broker, &store)["err"] == "QueueExists");

  const json pub{{"op", "publish"}, {"queue", "q"}, {"task", envelope_to_json(sample_task(5))}};
  CHECK(call(pub.dump(), &broker, &store)["ok"] == true);
  CHECK(call(R"({"op":"depth","queue":"q"})", &broker, &store)["ok"] == json{{"pending", 1}, {"leased", 0}});

  const json lease = call(R"({"op":"fetch","queue":"q","worker_id":"w"})", &broker, &store)["ok"];
  const Lease l = lease_from_json(lease);
  CHECK(l.task.task_id == 5);
  CHECK(l.task.delivery_count == 1);
  CHECK(l.worker_id == "w");
  CHECK(l.deadline == 2000);
  CHECK(lease_to_json(l) == lease);
  CHECK(call(R"({"op":"fetch","queue":"q","worker_id":"w"})", &broker, &store)["ok"].is_null());
  const json ack{{"op", "ack"}, {"lease_id", l.lease_id}};
  CHECK(call(ack.dump(), &broker, &store)["ok"] == true);
  CHECK(call(ack.dump(), &broker, &store)["err"] == "UnknownLease");
  CHECK(call(R"({"op":"fetch","queue":"zz","worker_id":"w"})", &broker, &store)["err"] == "NoSuchQueue");
  CHECK(call(R"({"op":"purge","queue":"q"})", &broker, &store)["ok"] == 0);

  const std::string b64 = base64_encode(to_bytes("v0"));
  CHECK(call(json{{"op", "put_plain"}, {"key", "k"}, {"payload_b64", b64}}.dump(), &broker, &store)["ok"] == true);
  CHECK(call(R"({"op":"get_plain","key":"k"})", &broker, &store)["ok"]["payload_b64"] == b64);
  CHECK(call(R"({"op":"get_plain","key":"nope"})", &broker, &store)["err"] == "NoSuchKey");
  const json put0{{"op", "put_versioned"}, {"key", "m"}, {"expected_new_version", 0}, {"payload_b64", b64}};
  CHECK(call(put0.dump(), &broker, &store)["ok"] == true);
  CHECK(call(put0.dump(), &broker, &store)["err"] == "VersionConflict");
  CHECK(call(R"({"op":"get_versioned","key":"m"})", &broker, &store)["ok"]["version"] == 0);
  CHECK(call(R"({"op":"wait_for_version","key":"m","min_version":0,"timeout_ms":10})", &broker, &store)["ok"]["version"] == 0);
  CHECK(call(R"({"op":"wait_for_version","key":"m","min_version":1,"timeout_ms":10})", &broker, &store)["err"] == "Timeout");

  SUBCASE("malformed frames") {
    CHECK(call("not json", &broker, &store)["err"] == "MalformedRequest");
    CHECK(call("[1,2]", &broker, &store)["err"] == "MalformedRequest");
    CHECK(call(R"({"op":"teleport"})", &broker, &store)["err"] == "MalformedRequest");
    CHECK(call(R"({"op":"fetch"})", &broker, &store)["err"] == "MalformedRequest");
    CHECK(call(R"({"op":"publish","queue":"q","task":{"task_id":1}})", &broker, &store)["err"] ==
          "MalformedEnvelope");
    CHECK(call(R"({"op":"put_plain","key":"k","payload_b64":"***"})", &broker, &store)["err"] ==
          "MalformedEnvelope");
    const json r = call("{\"op\":\"ping\"}\n", &broker, &store);
    CHECK(r["ok"] == "pong");
  }
  SUBCASE("missing backends") {
    CHECK(call(R"({"op":"depth","queue":"q"})", nullptr, &store)["err"] == "Unsupported");
    CHECK(call(R"({"op":"get_plain","key":"k"})", &broker, nullptr)["err"] == "Unsupported");
  }
}

TEST_CASE("remote session over TCP") {
  Broker broker;
  DataStore store;
  CoordinatorServer server(&broker, &store, ServerOptions{});
  server.start();
  REQUIRE(server.tcp_port() != 0);
  const Endpoint ep{"127.0.0.1", server.tcp_port()};
  RemoteSession s(ep, ep, RemoteOptions{10, false});

  s.create_queue("q");
  CHECK(code_of([&] { s.create_queue("q"); }) == ErrorCode::QueueExists);
  s.publish("q", sample_task(2, 1));
  s.publish("q", sample_task(1, 1));
  s.publish("q", sample_task(9, 0));
  CHECK(s.depth("q") == QueueDepth{3, 0});
  std::vector<std::uint64_t> order;
  while (auto l = s.fetch("q", "w")) {
    order.push_back(l->task.task_id);
    CHECK(l->task.payload == to_bytes("hello"));
    s.ack(l->lease_id);
  }
  CHECK(order == std::vector<std::uint64_t>{9, 1, 2});
  CHECK(code_of([&] { s.ack(12345); }) == ErrorCode::UnknownLease);

  Bytes big(1 << 20);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<std::uint8_t>(i * 31);
  s.put_plain("big", big);
  CHECK(s.get_plain("big") == big);
  CHECK(s.put_versioned("m", 0, to_bytes("a")));
  CHECK_FALSE(s.put_versioned("m", 0, to_bytes("b")));
  CHECK_FALSE(s.put_versioned("m", 2, to_bytes("b")));
  CHECK(s.get_versioned("m").version == 0);

  std::thread writer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    store.put_versioned("m", 1, to_bytes("b"));
  });
  const auto got = s.wait_for_version("m", 1, 2000);
  writer.join();
  REQUIRE(got);
  CHECK(got->version == 1);
  CHECK(got->payload == to_bytes("b"));
  CHECK_FALSE(s.wait_for_version("m", 5, 50));

  SUBCASE("server-side waits") {
    RemoteSession parked(ep, ep, RemoteOptions{10, true});
    CHECK(parked.wait_for_version("m", 1, 100)->version == 1);
    CHECK_FALSE(parked.wait_for_version("m", 2, 50));
  }
  SUBCASE("broker-only and store-only endpoints") {
    CoordinatorServer only_broker(&broker, nullptr, ServerOptions{});
    only_broker.start();
    RemoteSession split({"127.0.0.1", only_broker.tcp_port()}, ep);
    CHECK(split.depth("q") == QueueDepth{0, 0});
    CHECK(split.get_versioned("m").version == 1);
    RemoteSession wrong(ep, {"127.0.0.1", only_broker.tcp_port()});
    CHECK(code_of([&] { wrong.get_plain("big"); }) == ErrorCode::Unsupported);
    only_broker.stop();
  }
  SUBCASE("connection loss and reconnect") {
    auto b2 = std::make_unique<Broker>();
    DataStore d2;
    auto srv = std::make_unique<CoordinatorServer>(b2.get(), &d2, ServerOptions{});
    srv->start();
    const std::uint16_t port = srv->tcp_port();
    RemoteSession r({"127.0.0.1", port}, {"127.0.0.1", port});
    r.create_queue("x");
    srv->stop();
    CHECK(code_of([&] { r.depth("x"); }) == ErrorCode::ConnectionLost);
    ServerOptions again;
    again.tcp_port = port;
    CoordinatorServer back(b2.get(), &d2, again);
    back.start();
    r.reconnect();
    CHECK(r.depth("x") == QueueDepth{0, 0});
    back.stop();
  }
  server.stop();
}

TEST_CASE("leases expire through the server's sweeper") {
  Broker broker;
  DataStore store;
  ServerOptions opt;
  opt.sweep_interval_ms = 10;
  CoordinatorServer server(&broker, &store, opt);
  server.start();
  const Endpoint ep{"127.0.0.1", server.tcp_port()};
  RemoteSession s(ep, ep);
  s.create_queue("q");
  TaskEnvelope t = sample_task(1);
  t.max_duration_ms = 50;
  s.publish("q", t);
  auto first = s.fetch("q", "a");
  REQUIRE(first);
  std::optional<Lease> second;
  for (int i = 0; i < 100 && !second; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
    second = s.fetch("q", "b");
  }
  REQUIRE(second);
  CHECK(second->task.delivery_count == 2);
  CHECK(code_of([&] { s.ack(first->lease_id); }) == ErrorCode::UnknownLease);
  s.ack(second->lease_id);
  server.stop();
}

TEST_CASE("WebSocket endpoint speaks the same frames") {
  namespace beast = boost::beast;
  namespace ws = beast::websocket;
  using boost::asio::ip::tcp;

  Broker broker;
  DataStore store;
  ServerOptions opt;
  opt.enable_websocket = true;
  CoordinatorServer server(&broker, &store, opt);
  server.start();
  REQUIRE(server.ws_port() != 0);

  boost::asio::io_context io;
  tcp::resolver resolver(io);
  ws::stream<tcp::socket> sock(io);
  boost::asio::connect(sock.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.ws_port())));
  sock.handshake("127.0.0.1", "/");
  sock.text(true);
  auto rpc = [&](const json& req) {
    sock.write(boost::asio::buffer(req.dump()));
    beast::flat_buffer buf;
    sock.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  };

  CHECK(rpc({{"op", "ping"}})["ok"] == "pong");
  CHECK(rpc({{"op", "create_queue"}, {"queue", "InitialQueue"}})["ok"] == true);

  const json payload{{"classes", 2}, {"dim", 1}, {"weights", {0.0, 0.0}}, {"bias", {0.0, 0.0}},
                     {"features", {{1.0}}}, {"labels", {1}}, {"result_key", "demo/out/1"}};
  TaskEnvelope t;
  t.task_id = 1;
  t.job_id = "demo";
  t.kind = TaskKind::custom("linear-softmax-grad");
  t.payload = to_bytes(payload.dump());
  CHECK(rpc({{"op", "publish"}, {"queue", "InitialQueue"}, {"task", envelope_to_json(t)}})["ok"] == true);

  // Act as the browser client: fetch, compute, store, ack.
  const json lease = rpc({{"op", "fetch"}, {"queue", "InitialQueue"}, {"worker_id", "browser-1"}})["ok"];
  REQUIRE(lease.is_object());
  const TaskEnvelope got = envelope_from_json(lease["task"]);
  CHECK(got.kind.str() == "custom:linear-softmax-grad");
  const json result = train::linear_softmax_gradient(json::parse(to_text(got.payload)));
  CHECK(rpc({{"op", "put_plain"}, {"key", "demo/out/1"}, {"payload_b64", base64_encode(to_bytes(result.dump()))}})["ok"] == true);
  CHECK(rpc({{"op", "ack"}, {"lease_id", lease["lease_id"]}})["ok"] == true);
  CHECK(broker.depth("InitialQueue") == QueueDepth{0, 0});
  CHECK(json::parse(to_text(store.get_plain("demo/out/1")))["grad_bias"][0].get<double>() ==
        doctest::Approx(0.5));
  CHECK(rpc({{"op", "nope"}})["err"] == "MalformedRequest");

  sock.close(ws::close_code::normal);
  server.stop();
}

TEST_CASE("remote workers train a job to the sequential result") {
  Broker broker;
  DataStore store;
  ServerOptions opt;
  opt.sweep_interval_ms = 20;
  CoordinatorServer server(&broker, &store, opt);
  server.start();
  const Endpoint ep{"127.0.0.1", server.tcp_port()};

  const train::JobSpec spec = vc::testing::small_job();
  const std::string corpus = vc::testing::test_corpus();
  const auto init = train::initial_params(spec.training, corpus);
  {
    RemoteSession planner(ep, ep);
    CHECK(train::plan_job(planner, spec, corpus, init) == 20);
  }

  std::vector<WorkerReport> reports(3);
  std::vector<std::thread> fleet;
  for (int i = 0; i < 3; ++i) {
    fleet.emplace_back([&, i] {
      RemoteSession s(ep, ep, RemoteOptions{10, false});
      train::TrainingHandlers h;
      train::HandlerTable table;
      h.install(table);
      WorkerConfig wc;
      wc.worker_id = "r" + std::to_string(i);
      wc.job_id = spec.job_id;
      wc.poll_backoff_ms = 5;
      wc.max_wall_ms = 60'000;
      reports[static_cast<std::size_t>(i)] = run_worker(wc, s, table);
    });
  }
  for (auto& t : fleet) t.join();

  std::uint64_t done = 0;
  for (const auto& r : reports) {
    CHECK(r.exit == ExitReason::JobComplete);
    done += r.tasks_done;
  }
  CHECK(done >= 20);
  const auto ref = train::sequential_train(spec.training, corpus, init, 1);
  const auto v = store.get_versioned(train::JobKeys::model(spec.job_id));
  CHECK(v.version == 4);
  CHECK(nn::decode_model(v.payload).params == ref.params);
  CHECK(broker.depth(spec.initial_queue) == QueueDepth{0, 0});
  server.stop();
}
