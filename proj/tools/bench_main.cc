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

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "vc/harness.h"

using namespace vc;

int main(int argc, char** argv) {
  CLI::App app{"Scaling experiments: runtime, speedup and efficiency per fleet size"};
  std::string config_path, mode = "sync", latency = "0", out_path, events_dir, worker_bin;
  std::vector<int> workers{1, 2, 4, 8, 16, 32};
  std::uint64_t seed = 1;
  std::int64_t stagger_ms = 100, stall_ms = 60'000;
  bool with_sequential = true;
  int threads = 1;
  app.add_option("--config", config_path, "Job config JSON")->required();
  app.add_option("--workers", workers, "Fleet sizes")->delimiter(',');
  app.add_option("--mode", mode, "sync, async or both")
      ->check(CLI::IsMember({"sync", "async", "both"}));
  app.add_option("--latency-ms", latency, "Added delay per message, N or A..B");
  app.add_option("--seed", seed, "Latency seed");
  app.add_option("--stagger-ms", stagger_ms, "Join interval in async mode");
  app.add_option("--stall-ms", stall_ms, "Abort when the model stops advancing this long");
  app.add_option("--out", out_path, "Report CSV (default stdout)");
  app.add_option("--events", events_dir, "Directory for per-run event and timeline CSVs");
  app.add_option("--subprocess", worker_bin, "Run workers as processes of this binary");
  app.add_option("--threads", threads, "Compute threads per task");
  app.add_flag("!--no-sequential", with_sequential, "Skip the sequential baseline");
  CLI11_PARSE(app, argc, argv);

  try {
    const train::JobFile f = train::load_job_file(config_path);
    harness::ExperimentOptions base;
    base.job = f.spec;
    base.corpus = train::read_file(f.corpus_path);
    base.compute_threads = threads;
    base.stall_window_ms = stall_ms;
    base.worker_binary = worker_bin;
    const auto dots = latency.find("..");
    base.latency.min_ms = std::stoll(latency.substr(0, dots));
    base.latency.max_ms =
        dots == std::string::npos ? base.latency.min_ms : std::stoll(latency.substr(dots + 2));
    base.latency.seed = seed;

    std::vector<harness::StartMode> modes;
    if (mode != "async") modes.push_back(harness::StartMode::Sync);
    if (mode != "sync") modes.push_back(harness::StartMode::Async);

    double seq_ms = 0;
    if (with_sequential) {
      train::TrainResult r;
      seq_ms = harness::time_sequential(f.spec, base.corpus, &r);
      std::cerr << "sequential: " << seq_ms << " ms, final loss " << train::final_loss(r.trace)
                << "\n";
    }
    const harness::ScalingReport rep = harness::scaling_suite(base, workers, modes, stagger_ms, seq_ms);
    if (out_path.empty()) {
      harness::write_report_csv(std::cout, rep.rows);
    } else {
      std::ofstream out(out_path);
      harness::write_report_csv(out, rep.rows);
    }
    if (!events_dir.empty()) {
      std::filesystem::create_directories(events_dir);
      for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const std::string stem =
            events_dir + "/" + rep.rows[i].mode + "-" + std::to_string(rep.rows[i].workers);
        std::ofstream ev(stem + "-events.csv");
        write_events_csv(ev, rep.events[i]);
        std::ofstream tl(stem + "-timeline.csv");
        harness::write_timeline_csv(tl, harness::summarize_timeline(rep.events[i]));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
