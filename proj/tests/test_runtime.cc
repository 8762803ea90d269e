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

#include <atomic>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "train_fixture.h"
#include "vc/errors.h"
#include "vc/harness.h"
#include "vc/nn/codec.h"
#include "vc/train/handlers.h"
#include "vc/train/sequential.h"
#include "vc/worker.h"

using namespace vc;
using namespace vc::harness;
using vc::testing::LocalStack;
using vc::testing::small_job;
using vc::testing::test_corpus;

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

TaskEnvelope custom_task(std::uint64_t id, const std::string& handler, std::uint64_t max_ms = 1000) {
  TaskEnvelope t;
  t.task_id = id;
  t.job_id = "j";
  t.kind = TaskKind::custom(handler);
  t.max_duration_ms = max_ms;
  return t;
}

// Throws ConnectionLost from fetch until `failures` calls have failed.
class FlakySession final : public Session {
 public:
  FlakySession(Session& inner, int failures) : inner_(inner), left_(failures) {}
  void create_queue(const std::string& q) override { inner_.create_queue(q); }
  void publish(const std::string& q, const TaskEnvelope& t) override { inner_.publish(q, t); }
  std::optional<Lease> fetch(const std::string& q, const std::string& w) override {
    if (left_ > 0) {
      --left_;
      throw Error(ErrorCode::ConnectionLost, "flaky");
    }
    return inner_.fetch(q, w);
  }
  void ack(LeaseId id) override { inner_.ack(id); }
  QueueDepth depth(const std::string& q) override { return inner_.depth(q); }
  std::size_t purge(const std::string& q, const std::string& j) override { return inner_.purge(q, j); }
  void put_plain(const std::string& k, const Bytes& b) override { inner_.put_plain(k, b); }
  Bytes get_plain(const std::string& k) override { return inner_.get_plain(k); }
  bool put_versioned(const std::string& k, std::uint64_t v, const Bytes& b) override {
    return inner_.put_versioned(k, v, b);
  }
  VersionedValue get_versioned(const std::string& k) override { return inner_.get_versioned(k); }
  std::optional<VersionedValue> wait_for_version(const std::string& k, std::uint64_t v,
                                                 std::int64_t t) override {
    return inner_.wait_for_version(k, v, t);
  }
  void reconnect() override { ++reconnects; }

  int reconnects = 0;

 private:
  Session& inner_;
  int left_;
};

train::HandlerTable training_table(train::TrainingHandlers& h) {
  train::HandlerTable t;
  h.install(t);
  return t;
}

ExperimentOptions small_experiment(int workers) {
  ExperimentOptions o;
  o.job = small_job("exp");
  o.corpus = test_corpus();
  o.churn = ChurnSchedule::sync_start(workers);
  o.poll_backoff_ms = 5;
  o.sweep_interval_ms = 10;
  o.stall_window_ms = 20'000;
  return o;
}

}  // namespace

TEST_CASE("worker config validation") {
  WorkerConfig c;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
  c.worker_id = "a,b";
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
  c.worker_id = "ok";
  CHECK_NOTHROW(c.validate());
  c.queues.clear();
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("worker with nothing to do") {
  LocalStack st;
  st.session.create_queue("InitialQueue");
  WorkerConfig c;
  c.worker_id = "w";
  c.max_wall_ms = 1000;
  const auto t0 = std::chrono::steady_clock::now();
  const WorkerReport r = run_worker(c, st.session, {});
  const auto took = std::chrono::steady_clock::now() - t0;
  CHECK(r.exit == ExitReason::MaxWallTime);
  CHECK(r.tasks_done == 0);
  CHECK(r.events.empty());
  CHECK(took >= std::chrono::milliseconds(1000));
  CHECK(took < std::chrono::milliseconds(1500));
}

TEST_CASE("worker executes, acknowledges and reports") {
  LocalStack st;
  st.session.create_queue("InitialQueue");
  st.session.create_queue("second");
  int runs = 0;
  train::HandlerTable table;
  table["custom:count"] = [&](Session&, const TaskEnvelope&, const train::TaskContext& ctx) {
    ++runs;
    CHECK(ctx.worker_id == "w");
    CHECK(ctx.deadline > std::chrono::steady_clock::now());
  };
  table["custom:boom"] = [](Session&, const TaskEnvelope&, const train::TaskContext&) {
    throw std::runtime_error("boom");
  };
  st.session.publish("InitialQueue", custom_task(1, "count"));
  st.session.publish("second", custom_task(2, "count"));
  st.session.publish("InitialQueue", custom_task(3, "boom", 60'000));
  st.session.publish("InitialQueue", custom_task(4, "unknown", 60'000));

  WorkerConfig c;
  c.worker_id = "w";
  c.queues = {"InitialQueue", "second"};
  c.max_tasks = 4;
  std::vector<RunEvent> streamed;
  WorkerControl ctl;
  ctl.on_event = [&](const RunEvent& e) { streamed.push_back(e); };
  const WorkerReport r = run_worker(c, st.session, table, ctl);
  CHECK(r.exit == ExitReason::MaxTasks);
  CHECK(runs == 2);
  CHECK(r.tasks_done == 2);
  CHECK(r.tasks_failed == 2);
  CHECK(streamed == r.events);
  REQUIRE(r.events.size() == 4);
  // The first queue drains before the second is touched.
  CHECK(r.events[0].task_id == 1);
  CHECK(r.events[1].task_id == 3);
  CHECK(r.events[1].outcome == TaskOutcome::Failed);
  CHECK(r.events[2].task_id == 4);
  CHECK(r.events[3].task_id == 2);
  for (const auto& e : r.events) {
    CHECK(e.t_start <= e.t_end);
    CHECK(e.delivery_count == 1);
  }
  // Failed tasks stay leased until they expire.
  CHECK(st.session.depth("InitialQueue") == QueueDepth{0, 2});
  CHECK(st.session.depth("second") == QueueDepth{0, 0});
}

TEST_CASE("a killed worker's task is redelivered") {
  auto clock = std::make_shared<ManualClock>(0);
  Broker broker(clock);
  DataStore store;
  LocalSession local(broker, store);
  local.create_queue("InitialQueue");
  local.publish("InitialQueue", custom_task(7, "slow", 500));

  std::atomic<bool> entered{false};
  train::HandlerTable table;
  table["custom:slow"] = [&](Session& s, const TaskEnvelope&, const train::TaskContext&) {
    entered = true;
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    s.put_plain("touched", to_bytes("x"));
  };
  auto kill = std::make_shared<KillSwitch>();
  FaultySession victim(std::make_unique<LocalSession>(broker, store), LatencyModel{}, kill);
  WorkerConfig c;
  c.worker_id = "victim";
  WorkerReport r;
  std::thread t([&] { r = run_worker(c, victim, table); });
  while (!entered) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  kill->kill();
  t.join();
  CHECK(r.exit == ExitReason::Killed);
  CHECK(r.tasks_done == 0);
  CHECK(code_of([&] { store.get_plain("touched"); }) == ErrorCode::NoSuchKey);
  CHECK(broker.depth("InitialQueue") == QueueDepth{0, 1});

  clock->set(499);
  CHECK(broker.sweep_expired() == 0);
  clock->set(500);
  CHECK(broker.sweep_expired() == 1);
  WorkerConfig c2;
  c2.worker_id = "rescuer";
  c2.max_tasks = 1;
  const WorkerReport r2 = run_worker(c2, local, table);
  REQUIRE(r2.events.size() == 1);
  CHECK(r2.events[0].task_id == 7);
  CHECK(r2.events[0].delivery_count == 2);
  CHECK(r2.events[0].outcome == TaskOutcome::Ok);
  CHECK(broker.depth("InitialQueue") == QueueDepth{0, 0});
}

TEST_CASE("connection loss") {
  LocalStack st;
  st.session.create_queue("InitialQueue");
  st.session.publish("InitialQueue", custom_task(1, "noop"));
  train::HandlerTable table;
  table["custom:noop"] = [](Session&, const TaskEnvelope&, const train::TaskContext&) {};
  WorkerConfig c;
  c.worker_id = "w";
  c.reconnect_backoff_ms = 1;
  c.max_reconnects = 3;
  c.max_tasks = 1;

  SUBCASE("recovers after a few failures") {
    FlakySession flaky(st.session, 3);
    const WorkerReport r = run_worker(c, flaky, table);
    CHECK(r.exit == ExitReason::MaxTasks);
    CHECK(r.tasks_done == 1);
    CHECK(flaky.reconnects == 3);
  }
  SUBCASE("gives up after max_reconnects in a row") {
    FlakySession flaky(st.session, 4);
    const WorkerReport r = run_worker(c, flaky, table);
    CHECK(r.exit == ExitReason::ConnectionLost);
    CHECK(r.tasks_done == 0);
  }
}

TEST_CASE("a single worker completes a whole job") {
  LocalStack st;
  const auto spec = small_job();
  const std::string corpus = test_corpus();
  const auto init = train::initial_params(spec.training, corpus);
  train::plan_job(st.session, spec, corpus, init);
  CHECK_FALSE(detect_job_complete(st.session, spec.job_id));
  CHECK_FALSE(detect_job_complete(st.session, "missing"));

  train::TrainingHandlers h;
  WorkerConfig c;
  c.worker_id = "solo";
  c.job_id = spec.job_id;
  c.poll_backoff_ms = 5;
  c.max_wall_ms = 60'000;
  const WorkerReport r = run_worker(c, st.session, training_table(h));
  CHECK(r.exit == ExitReason::JobComplete);
  CHECK(r.tasks_done == 20);
  CHECK(r.tasks_failed == 0);
  CHECK(detect_job_complete(st.session, spec.job_id));
  CHECK(st.session.depth(spec.initial_queue) == QueueDepth{0, 0});
  CHECK(st.session.depth(spec.results_queue) == QueueDepth{0, 0});
  const auto ref = train::sequential_train(spec.training, corpus, init, 1);
  CHECK(nn::decode_model(st.session.get_versioned(train::JobKeys::model(spec.job_id)).payload).params ==
        ref.params);
}

TEST_CASE("events CSV") {
  const std::vector<RunEvent> evs{{"w0", 1, "map", 0, 10, TaskOutcome::Ok, 1},
                                  {"w1", 1ULL << 52, "custom:map-result", 5, 5, TaskOutcome::Failed, 3}};
  std::stringstream ss;
  write_events_csv(ss, evs);
  CHECK(ss.str() ==
        "worker_id,task_id,kind,t_start_ms,t_end_ms,outcome,delivery_count\n"
        "w0,1,map,0,10,ok,1\n"
        "w1,4503599627370496,custom:map-result,5,5,failed,3\n");
  CHECK(read_events_csv(ss) == evs);
  std::stringstream bad1("h\nw0,1,map,0,10,ok\n"), bad2("h\nw0,1,map,0,x,ok,1\n"),
      bad3("h\nw0,1,map,0,1,maybe,1\n");
  CHECK(code_of([&] { read_events_csv(bad1); }) == ErrorCode::MalformedEvents);
  CHECK(code_of([&] { read_events_csv(bad2); }) == ErrorCode::MalformedEvents);
  CHECK(code_of([&] { read_events_csv(bad3); }) == ErrorCode::MalformedEvents);
}

TEST_CASE("timeline summary") {
  SUBCASE("zero-length events next to each other") {
    const auto s = summarize_timeline({{"w", 2, "map", 5, 7, TaskOutcome::Ok, 1},
                                       {"w", 1, "map", 5, 5, TaskOutcome::Ok, 1}});
    CHECK(s.workers[0].busy_ms == 2);
  }
  SUBCASE("one event fills its own lifetime") {
    const auto s = summarize_timeline({{"w", 1, "map", 10, 30, TaskOutcome::Ok, 1}});
    REQUIRE(s.workers.size() == 1);
    CHECK(s.workers[0].utilization == 1.0);
    CHECK(s.workers[0].idle_fraction == 0.0);
    CHECK(s.overall_utilization == 1.0);
  }
  SUBCASE("no events") {
    const auto s = summarize_timeline({});
    CHECK(s.workers.empty());
    CHECK(s.overall_utilization == 0.0);
    const auto idle = summarize_timeline({}, {{"w", {0, 100}}});
    REQUIRE(idle.workers.size() == 1);
    CHECK(idle.workers[0].utilization == 0.0);
    CHECK(idle.workers[0].idle_fraction == 1.0);
  }
  SUBCASE("three workers") {
    // a: busy 10 of 40; b: busy 30 of 30 (default span); c: busy 5 of 50.
    const std::vector<RunEvent> evs{{"a", 1, "map", 0, 5, TaskOutcome::Ok, 1},
                                    {"a", 2, "reduce", 20, 25, TaskOutcome::Ok, 1},
                                    {"b", 3, "map", 10, 30, TaskOutcome::Ok, 1},
                                    {"b", 4, "map", 30, 40, TaskOutcome::Failed, 1},
                                    {"c", 5, "map", 45, 50, TaskOutcome::Ok, 2}};
    const auto s = summarize_timeline(evs, {{"a", {0, 40}}, {"c", {0, 50}}});
    REQUIRE(s.workers.size() == 3);
    CHECK(s.workers[0].worker_id == "a");
    CHECK(s.workers[0].busy_ms == 10);
    CHECK(s.workers[0].lifetime_ms == 40);
    CHECK(s.workers[0].utilization == 0.25);
    CHECK(s.workers[1].busy_ms == 30);
    CHECK(s.workers[1].lifetime_ms == 30);
    CHECK(s.workers[1].utilization == 1.0);
    CHECK(s.workers[2].utilization == 0.1);
    CHECK(s.workers[2].idle_fraction == doctest::Approx(0.9));
    CHECK(s.overall_utilization == doctest::Approx(45.0 / 120.0));
    CHECK(s.per_kind.at("map") == 4);
    CHECK(s.per_kind.at("reduce") == 1);
    std::ostringstream os;
    write_timeline_csv(os, s);
    CHECK(os.str().rfind("worker_id,tasks,busy_ms,lifetime_ms,utilization,idle_fraction,map,reduce\n"
                         "a,2,10,40,0.25,0.75,1,1\n", 0) == 0);
  }
  SUBCASE("malformed") {
    CHECK(code_of([] { summarize_timeline({{"", 1, "map", 0, 1, TaskOutcome::Ok, 1}}); }) ==
          ErrorCode::MalformedEvents);
    CHECK(code_of([] { summarize_timeline({{"w", 1, "map", 5, 1, TaskOutcome::Ok, 1}}); }) ==
          ErrorCode::MalformedEvents);
    CHECK(code_of([] {
            summarize_timeline({{"w", 1, "map", 0, 10, TaskOutcome::Ok, 1},
                                {"w", 2, "map", 5, 12, TaskOutcome::Ok, 1}});
          }) == ErrorCode::MalformedEvents);
    CHECK(code_of([] {
            summarize_timeline({{"w", 1, "map", 0, 10, TaskOutcome::Ok, 1}}, {{"w", {2, 20}}});
          }) == ErrorCode::MalformedEvents);
  }
}

TEST_CASE("churn schedules") {
  const auto sync = ChurnSchedule::sync_start(3);
  REQUIRE(sync.entries.size() == 3);
  CHECK(sync.entries[2].worker_id == "w2");
  CHECK(sync.entries[2].join_at_ms == 0);
  const auto async = ChurnSchedule::async_start(3, 100);
  CHECK(async.entries[2].join_at_ms == 200);

  const auto k1 = ChurnSchedule::sync_start(16).with_kills(8, 100, 900, 5);
  const auto k2 = ChurnSchedule::sync_start(16).with_kills(8, 100, 900, 5);
  int killed = 0;
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(k1.entries[i].leave_at_ms == k2.entries[i].leave_at_ms);
    if (k1.entries[i].leave_at_ms) {
      ++killed;
      CHECK(k1.entries[i].leave_mode == LeaveMode::Kill);
      CHECK(*k1.entries[i].leave_at_ms >= 100);
      CHECK(*k1.entries[i].leave_at_ms < 900);
    }
  }
  CHECK(killed == 8);
  CHECK_NOTHROW(k1.validate());
  CHECK(code_of([] { ChurnSchedule::sync_start(2).with_kills(3, 0, 10, 1); }) == ErrorCode::InvalidArgument);

  ChurnSchedule dup = ChurnSchedule::sync_start(2);
  dup.entries[1].worker_id = "w0";
  CHECK(code_of([&] { dup.validate(); }) == ErrorCode::InvalidArgument);
  ChurnSchedule backwards = ChurnSchedule::async_start(1, 0);
  backwards.entries[0].join_at_ms = 50;
  backwards.entries[0].leave_at_ms = 50;
  CHECK(code_of([&] { backwards.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("experiments") {
  const auto base = small_experiment(2);
  train::TrainResult ref;
  time_sequential(base.job, base.corpus, &ref);

  SUBCASE("two workers reproduce sequential training") {
    const ExperimentResult r = run_experiment(base);
    CHECK(r.tasks_published == 20);
    CHECK(r.final_model.params == ref.params);
    CHECK(r.row.map_tasks == 16);
    CHECK(r.row.reduce_tasks == 4);
    CHECK(r.row.reexecutions == 0);
    CHECK(r.row.runtime_ms > 0);
    CHECK(r.row.final_loss == train::final_loss(ref.trace));
    CHECK(r.initial_depth_after == QueueDepth{0, 0});
    CHECK(r.results_depth_after == QueueDepth{0, 0});
    REQUIRE(r.trace.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) CHECK(r.trace[k].loss == ref.trace[k].loss);
    CHECK_NOTHROW(summarize_timeline(r.events));
  }
  SUBCASE("killed workers do not change the result") {
    ExperimentOptions o = small_experiment(4);
    o.job.training.map_max_duration_ms = 300;
    o.job.training.reduce_max_duration_ms = 600;
    o.job.training.simulated_map_delay_ms = 50;
    o.churn = ChurnSchedule::sync_start(4).with_kills(2, 10, 60, 3);
    const ExperimentResult r = run_experiment(o);
    CHECK(r.final_model.params == ref.params);
    CHECK(r.row.map_tasks == 16);
    CHECK(r.row.reduce_tasks == 4);
    int killed = 0;
    for (const auto& rep : r.reports) killed += rep.exit == ExitReason::Killed;
    CHECK(killed == 2);
  }
  SUBCASE("late joiners") {
    ExperimentOptions o = base;
    o.churn = ChurnSchedule::async_start(3, 50);
    CHECK(run_experiment(o).final_model.params == ref.params);
  }
  SUBCASE("no workers stalls") {
    ExperimentOptions o = base;
    o.churn = {};
    o.stall_window_ms = 200;
    CHECK(code_of([&] { run_experiment(o); }) == ErrorCode::ExperimentStalled);
  }
  SUBCASE("worker processes") {
    ExperimentOptions o = base;
    o.worker_binary = VC_WORKER_BIN;
    const ExperimentResult r = run_experiment(o);
    CHECK(r.final_model.params == ref.params);
    CHECK(r.row.map_tasks == 16);
    CHECK(r.row.reduce_tasks == 4);
    std::set<std::string> ids;
    for (const auto& e : r.events) ids.insert(e.worker_id);
    CHECK(ids.size() == 2);
  }
  SUBCASE("killed worker processes") {
    ExperimentOptions o = small_experiment(3);
    o.worker_binary = VC_WORKER_BIN;
    o.job.training.map_max_duration_ms = 300;
    o.job.training.reduce_max_duration_ms = 600;
    o.job.training.simulated_map_delay_ms = 30;
    o.churn = ChurnSchedule::sync_start(3).with_kills(1, 100, 200, 9);
    CHECK(run_experiment(o).final_model.params == ref.params);
  }
}

TEST_CASE("scaling suite") {
  const auto base = small_experiment(1);
  CHECK(scaling_suite(base, {}, {StartMode::Sync}, 0, 0).rows.empty());
  const ScalingReport rep = scaling_suite(base, {1, 2}, {StartMode::Sync, StartMode::Async}, 20, 100.0);
  REQUIRE(rep.rows.size() == 4);
  REQUIRE(rep.events.size() == 4);
  CHECK(rep.rows[0].mode == "sync");
  CHECK(rep.rows[0].workers == 1);
  CHECK(rep.rows[0].relative_speedup == 1.0);
  CHECK(rep.rows[0].efficiency == 1.0);
  CHECK(rep.rows[1].efficiency == doctest::Approx(rep.rows[1].relative_speedup / 2));
  CHECK(rep.rows[2].mode == "async");
  for (const auto& r : rep.rows) {
    CHECK(r.absolute_speedup == doctest::Approx(100.0 / std::max<std::int64_t>(1, r.runtime_ms)));
    CHECK(r.final_loss == rep.rows[0].final_loss);
  }
  const ScalingReport no_one = scaling_suite(base, {2}, {StartMode::Sync}, 0, 0);
  CHECK(std::isnan(no_one.rows[0].relative_speedup));
  CHECK(std::isnan(no_one.rows[0].absolute_speedup));

  std::ostringstream os;
  write_report_csv(os, {rep.rows[0]});
  std::string header;
  std::getline(std::istringstream(os.str()) >> std::ws, header);
  CHECK(header == "mode,workers,runtime_ms,relative_speedup,efficiency,absolute_speedup,final_loss,"
                  "map_tasks,reduce_tasks,reexecutions");
}
