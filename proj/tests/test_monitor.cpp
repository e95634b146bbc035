#include <chrono>
#include <filesystem>

#include "doctest.h"
#include "egd/monitor.hpp"
#include "egd/synthetic.hpp"

using namespace egd;
using namespace egd::monitor;

namespace {

const dataio::DatasetManifest& monitor_manifest() {
  static dataio::DatasetManifest manifest = [] {
    dataio::SyntheticConfig cfg = dataio::default_synthetic_config();
    cfg.subjects = 1;
    cfg.max_instance_frames = 130;  // include multi-window instances
    const auto dir = std::filesystem::temp_directory_path() / "egd_test_monitor_ds";
    std::filesystem::remove_all(dir);
    return dataio::generate_synthetic(cfg, 23, dir);
  }();
  return manifest;
}

preprocess::ChannelStats unit_stats() {
  return {std::vector<double>(preprocess::kNumChannels, 0.0),
          std::vector<double>(preprocess::kNumChannels, 1.0), "unit"};
}

}  // namespace

TEST_CASE("replay emits every frame in order; rate 0 does not sleep") {
  const auto& trial = monitor_manifest().trials.front();
  long expected = 0;
  const auto t0 = std::chrono::steady_clock::now();
  replay_stream(trial, 0.0, [&](const StreamEvent& ev) {
    CHECK(ev.frame == expected);
    ++expected;
  });
  const double sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(expected == static_cast<long>(trial.samples.size()));
  CHECK(sec < 1.0);
}

TEST_CASE("replay pacing at 1x stays within jitter") {
  dataio::TrialRecord trial = monitor_manifest().trials.front();
  trial.samples.resize(90);  // 3 seconds at 30 Hz
  trial.gesture_instances.clear();
  const auto t0 = std::chrono::steady_clock::now();
  long count = 0;
  replay_stream(trial, 1.0, [&](const StreamEvent&) { ++count; });
  const double sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(count == 90);
  CHECK(sec == doctest::Approx(90.0 / 30.0).epsilon(0.05));
}

TEST_CASE("online windows are bit-identical to the offline pipeline") {
  const auto& manifest = monitor_manifest();
  const auto stats = unit_stats();
  preprocess::WindowConfig cfg;

  for (const auto& trial : manifest.trials) {
    const auto offline = preprocess::slide_gesture_windows(trial, stats, cfg);

    std::vector<preprocess::FeatureWindow> online;
    std::optional<WindowAssembler> assembler;
    int current = 0;
    replay_stream(trial, 0.0, [&](const StreamEvent& ev) {
      if (ev.gesture_index != current) {
        current = ev.gesture_index;
        if (current > 0)
          assembler.emplace(trial.trial_id, trial.task, stats, cfg);
      }
      if (!assembler || ev.gesture_index == 0) return;
      for (auto& w : assembler->push(ev)) online.push_back(std::move(w));
      if (ev.instance_end) {
        assembler.reset();
        current = 0;
      }
    });

    REQUIRE(online.size() == offline.size());
    for (size_t i = 0; i < online.size(); ++i) {
      CHECK(online[i].source.gesture_index == offline[i].source.gesture_index);
      CHECK(online[i].source.offset == offline[i].source.offset);
      CHECK(online[i].label == offline[i].label);
      CHECK(online[i].data.v == offline[i].data.v);  // bit-exact
    }
  }
}

TEST_CASE("first window of an instance completes at its 59th raw frame") {
  const auto stats = unit_stats();
  preprocess::WindowConfig cfg;
  dataio::TrialRecord trial = monitor_manifest().trials.front();
  const auto& gi = trial.gesture_instances.front();
  REQUIRE(gi.frame_count() >= 59);

  WindowAssembler assembler(trial.trial_id, trial.task, stats, cfg);
  int emitted_at = -1;
  replay_stream(trial, 0.0, [&](const StreamEvent& ev) {
    if (ev.gesture_index != 1 || emitted_at >= 0) return;
    const auto ws = assembler.push(ev);
    if (!ws.empty() && ws[0].source.offset == 0 && emitted_at < 0)
      emitted_at = static_cast<int>(ev.frame - gi.start_frame);
  });
  // 30 downsampled samples x factor 2: raw in-instance index 58, the 59th frame
  CHECK(emitted_at == 58);
}

TEST_CASE("short instance produces no window and a logged skip") {
  const auto stats = unit_stats();
  preprocess::WindowConfig cfg;
  dataio::TrialRecord trial;
  trial.trial_id = "Suturing_Z001";
  trial.task = dataio::TaskClass::Suturing;
  trial.subject_id = "Z";
  trial.repetition_index = 1;
  trial.samples.resize(30);
  for (auto& s : trial.samples) {
    s.left.rotation = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    s.right.rotation = s.left.rotation;
  }
  dataio::GestureInstance gi;
  gi.gesture_id = 1;
  gi.start_frame = 2;
  gi.end_frame = 19;  // 18 raw frames -> 9 downsampled, below the minimum of 10
  gi.error_label = 0;
  trial.gesture_instances.push_back(gi);

  WindowAssembler assembler(trial.trial_id, trial.task, stats, cfg);
  size_t windows = 0;
  replay_stream(trial, 0.0, [&](const StreamEvent& ev) {
    if (ev.gesture_index == 1) windows += assembler.push(ev).size();
  });
  CHECK(windows == 0);
  CHECK(assembler.report().skipped.size() == 1);
}

TEST_CASE("unmonitored gestures are flagged and the stream continues") {
  const auto& manifest = monitor_manifest();
  const auto& trial = manifest.trials.front();

  std::vector<DetectorEntry> none;  // no checkpoints at all
  MonitorOptions opts;
  opts.rate = 0.0;
  std::vector<DetectionEvent> events;
  const auto summary =
      run_monitor(trial, none, opts, [&](const DetectionEvent& ev) { events.push_back(ev); });
  CHECK(summary.events > 0);
  CHECK(summary.unmonitored == summary.events);
  for (const auto& ev : events) CHECK_FALSE(ev.monitored);

  // events arrive in nondecreasing completion-frame order
  for (size_t i = 1; i < events.size(); ++i)
    CHECK(events[i].emit_frame >= events[i - 1].emit_frame);
}

TEST_CASE("summary latency stats equal recomputation from emitted events") {
  const auto& manifest = monitor_manifest();
  const auto& trial = manifest.trials.front();
  std::vector<DetectorEntry> none;
  MonitorOptions opts;
  opts.rate = 0.0;
  std::vector<DetectionEvent> events;
  const auto summary =
      run_monitor(trial, none, opts, [&](const DetectionEvent& ev) { events.push_back(ev); });
  REQUIRE(static_cast<size_t>(summary.events) == events.size());
  double sum = 0.0;
  for (const auto& ev : events) sum += ev.latency_ms;
  CHECK(summary.mean_latency_ms == doctest::Approx(sum / events.size()).epsilon(1e-12));
}
