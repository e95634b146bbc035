#include "egd/monitor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <mutex>
#include <thread>

#include "egd/rng.hpp"

namespace egd::monitor {

using Clock = std::chrono::steady_clock;

void replay_stream(const dataio::TrialRecord& trial, double rate_multiplier,
                   const std::function<void(const StreamEvent&)>& sink) {
  if (rate_multiplier < 0.0) throw ValidationError("replay: rate must be >= 0");

  // frame -> owning instance (transcript instances are non-overlapping)
  std::vector<int> owner(trial.samples.size(), -1);
  for (size_t gi = 0; gi < trial.gesture_instances.size(); ++gi) {
    const auto& inst = trial.gesture_instances[gi];
    for (long f = inst.start_frame; f <= inst.end_frame; ++f)
      owner[static_cast<size_t>(f)] = static_cast<int>(gi);
  }

  const auto start = Clock::now();
  for (size_t f = 0; f < trial.samples.size(); ++f) {
    if (rate_multiplier > 0.0) {
      const auto target =
          start + std::chrono::duration_cast<Clock::duration>(
                      std::chrono::duration<double>(f / (30.0 * rate_multiplier)));
      std::this_thread::sleep_until(target);
    }
    StreamEvent ev;
    ev.frame = static_cast<long>(f);
    ev.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    ev.sample = &trial.samples[f];
    const int gi = owner[f];
    if (gi >= 0) {
      ev.gesture_id = trial.gesture_instances[gi].gesture_id;
      ev.gesture_index = gi + 1;
      ev.error_label = trial.gesture_instances[gi].error_label;
      ev.instance_end =
          static_cast<long>(f) == trial.gesture_instances[gi].end_frame;
    }
    sink(ev);
  }
}

// ---- WindowAssembler ----

WindowAssembler::WindowAssembler(std::string trial_id, dataio::TaskClass task,
                                 preprocess::ChannelStats stats,
                                 preprocess::WindowConfig cfg)
    : trial_id_(std::move(trial_id)), task_(task), stats_(std::move(stats)), cfg_(cfg) {
  cfg_.validate();
}

preprocess::FeatureWindow WindowAssembler::cut_window(int offset, bool pad) {
  // identical pipeline to the offline path, applied to the instance prefix;
  // extract/downsample/normalize are column-local so prefixes agree bit-exactly
  Tensor m = preprocess::extract_feature_channels(
      std::span<const dataio::RawKinematicSample>(buffer_.data(), buffer_.size()));
  Tensor d = preprocess::downsample(m, cfg_.downsample_factor);
  preprocess::normalize_inplace(d, stats_);

  preprocess::FeatureWindow w;
  w.data = Tensor::mat(preprocess::kNumChannels, cfg_.window_length);
  const int len = d.cols();
  for (int c = 0; c < preprocess::kNumChannels; ++c)
    for (int t = 0; t < cfg_.window_length; ++t) {
      const int src = pad ? std::min(offset + t, len - 1) : offset + t;
      w.data(c, t) = d(c, src);
    }
  w.gesture_id = gesture_id_;
  w.task = task_;
  w.label = label_;
  w.source = {trial_id_, gesture_index_, offset};
  ++report_.windows;
  return w;
}

std::vector<preprocess::FeatureWindow> WindowAssembler::flush() {
  std::vector<preprocess::FeatureWindow> out;
  if (buffer_.empty()) return out;
  const int len = static_cast<int>(
      (buffer_.size() + cfg_.downsample_factor - 1) / cfg_.downsample_factor);
  if (len < cfg_.min_padded_length) {
    report_.skipped.push_back(trial_id_ + " #" + std::to_string(gesture_index_) +
                              ": downsampled length " + std::to_string(len) + " < " +
                              std::to_string(cfg_.min_padded_length));
  } else if (len < cfg_.window_length) {
    out.push_back(cut_window(0, true));
    ++report_.padded_instances;
  }
  buffer_.clear();
  next_offset_ = 0;
  gesture_id_ = -1;
  gesture_index_ = 0;
  label_ = -1;
  return out;
}

std::vector<preprocess::FeatureWindow> WindowAssembler::push(const StreamEvent& ev) {
  std::vector<preprocess::FeatureWindow> out;
  if (ev.gesture_index != gesture_index_) {
    out = flush();  // boundary: close the previous instance
    gesture_index_ = ev.gesture_index;
    gesture_id_ = ev.gesture_id;
    label_ = ev.error_label;
  }
  if (ev.gesture_index == 0) return out;

  buffer_.push_back(*ev.sample);
  // window at offset o is complete once raw sample 2*(o + W - 1) has arrived
  const long last_needed =
      static_cast<long>(cfg_.downsample_factor) * (next_offset_ + cfg_.window_length - 1);
  if (static_cast<long>(buffer_.size()) - 1 == last_needed) {
    out.push_back(cut_window(next_offset_, false));
    next_offset_ += cfg_.stride;
  }
  if (ev.instance_end) {
    auto tail = flush();
    for (auto& w : tail) out.push_back(std::move(w));
  }
  return out;
}

// ---- detectors ----

bool DetectorEntry::matches(dataio::TaskClass task, int gesture_id) const {
  const auto& meta = ckpt.meta;
  if (!meta.scope_task.empty() && meta.scope_task != dataio::task_name(task)) return false;
  if (!meta.scope_gesture.empty() && meta.scope_gesture != "G" + std::to_string(gesture_id))
    return false;
  return true;
}

DetectorEntry make_detector(models::LoadedCheckpoint ckpt,
                            const dataio::DatasetManifest& manifest,
                            const std::string& exclude_trial_id,
                            const preprocess::WindowConfig& wcfg, long ref_cap,
                            uint64_t seed) {
  DetectorEntry det{std::move(ckpt), {}, {}};

  int exclude_rep = -1;
  for (const auto& t : manifest.trials)
    if (t.trial_id == exclude_trial_id) exclude_rep = t.repetition_index;

  for (const auto& trial : manifest.trials) {
    if (trial.repetition_index == exclude_rep) continue;  // the replay super-trial
    for (size_t gi = 0; gi < trial.gesture_instances.size(); ++gi) {
      const auto& inst = trial.gesture_instances[gi];
      if (!inst.modeled() || inst.error_label != 0) continue;
      if (!det.matches(trial.task, inst.gesture_id)) continue;
      for (auto& w :
           preprocess::instance_windows(trial, gi, det.ckpt.meta.stats, wcfg, nullptr))
        det.reference_windows.push_back(std::move(w.data));
    }
  }

  const auto keep = models::cap_reference_indices(det.reference_windows.size(), ref_cap,
                                                  hash_mix(seed, 0x2EFULL));
  Batch capped;
  for (int i : keep) capped.push_back(det.reference_windows[i]);
  det.reference_windows = std::move(capped);

  if (det.ckpt.net.siamese() && !det.reference_windows.empty())
    det.reference_embeddings = det.ckpt.net.encode(det.reference_windows);
  return det;
}

// ---- monitor pipeline ----

namespace {

struct QueuedWindow {
  preprocess::FeatureWindow window;
  long emit_frame;
  int detector;  // -1 = unmonitored
  Clock::time_point complete_at;
};

}  // namespace

std::string MonitorSummary::to_csv(const std::string& trial_id) const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%.4f,%.4f,%.3f,%d", trial_id.c_str(), events,
                unmonitored, skipped_instances, mean_latency_ms, p95_latency_ms,
                stream_seconds, realtime_violation ? 1 : 0);
  return std::string(
             "trial,events,unmonitored,skipped_instances,mean_latency_ms,p95_latency_"
             "ms,stream_seconds,realtime_violation\n") +
         buf + "\n";
}

MonitorSummary run_monitor(const dataio::TrialRecord& trial,
                           std::vector<DetectorEntry>& detectors,
                           const MonitorOptions& opts,
                           const std::function<void(const DetectionEvent&)>& sink) {
  constexpr double kStridePeriodMs = 1333.0;  // 20 downsampled samples at 30 Hz

  std::deque<QueuedWindow> queue;
  std::mutex mu;
  std::condition_variable cv;
  bool done = false;

  std::vector<DetectionEvent> events;
  MonitorSummary summary;

  std::thread detector_thread([&] {
    for (;;) {
      QueuedWindow item;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return done || !queue.empty(); });
        if (queue.empty()) {
          if (done) return;
          continue;
        }
        item = std::move(queue.front());
        queue.pop_front();
      }

      DetectionEvent ev;
      ev.emit_frame = item.emit_frame;
      ev.trial_id = item.window.source.trial_id;
      ev.gesture_id = item.window.gesture_id;
      ev.gesture_index = item.window.source.gesture_index;
      ev.offset = item.window.source.offset;

      const double lag_ms =
          std::chrono::duration<double, std::milli>(Clock::now() - item.complete_at)
              .count();
      if (lag_ms > kStridePeriodMs) summary.realtime_violation = true;

      if (item.detector < 0) {
        ev.monitored = false;
      } else {
        DetectorEntry& det = detectors[item.detector];
        models::DetectionResult r;
        if (det.ckpt.net.siamese())
          r = models::siamese_vote(det.ckpt.net, item.window.data,
                                   det.reference_embeddings);
        else
          r = models::predict_window(det.ckpt.net, item.window.data);
        ev.erroneous = r.erroneous;
        ev.score = r.score;
      }
      ev.latency_ms =
          std::chrono::duration<double, std::milli>(Clock::now() - item.complete_at)
              .count();
      events.push_back(ev);
      sink(ev);
    }
  });

  // assembly stage: one assembler per instance, routed by checkpoint scope
  std::optional<WindowAssembler> assembler;
  int current_detector = -1;
  int current_instance = 0;
  int skipped_total = 0;
  const preprocess::ChannelStats neutral{
      std::vector<double>(preprocess::kNumChannels, 0.0),
      std::vector<double>(preprocess::kNumChannels, 1.0), "unmonitored"};

  auto enqueue = [&](std::vector<preprocess::FeatureWindow> ws, long frame) {
    if (ws.empty()) return;
    std::unique_lock lock(mu);
    for (auto& w : ws)
      queue.push_back({std::move(w), frame, current_detector, Clock::now()});
    cv.notify_one();
  };

  const auto t0 = Clock::now();
  replay_stream(trial, opts.rate, [&](const StreamEvent& ev) {
    if (ev.gesture_index != current_instance) {
      current_instance = ev.gesture_index;
      if (ev.gesture_index > 0) {
        current_detector = -1;
        for (size_t d = 0; d < detectors.size(); ++d)
          if (detectors[d].matches(trial.task, ev.gesture_id)) {
            current_detector = static_cast<int>(d);
            break;
          }
        assembler.emplace(trial.trial_id, trial.task,
                          current_detector >= 0
                              ? detectors[current_detector].ckpt.meta.stats
                              : neutral,
                          opts.window);
      }
    }
    if (!assembler || ev.gesture_index == 0) return;
    enqueue(assembler->push(ev), ev.frame);
    if (ev.instance_end) {  // push() flushed the padded/skip tail
      skipped_total += static_cast<int>(assembler->report().skipped.size());
      assembler.reset();
      current_instance = 0;
      current_detector = -1;
    }
  });

  {
    std::unique_lock lock(mu);
    done = true;
  }
  cv.notify_one();
  detector_thread.join();

  summary.stream_seconds =
      std::chrono::duration<double>(Clock::now() - t0).count();
  summary.events = static_cast<int>(events.size());
  summary.skipped_instances = skipped_total;
  std::vector<double> lat;
  for (const auto& e : events) {
    if (!e.monitored) ++summary.unmonitored;
    lat.push_back(e.latency_ms);
  }
  if (!lat.empty()) {
    double s = 0.0;
    for (double v : lat) s += v;
    summary.mean_latency_ms = s / lat.size();
    std::sort(lat.begin(), lat.end());
    const size_t p95 =
        std::min(lat.size() - 1, static_cast<size_t>(std::ceil(0.95 * lat.size())) - 1);
    summary.p95_latency_ms = lat[p95];
    if (summary.mean_latency_ms > kStridePeriodMs) summary.realtime_violation = true;
  }
  return summary;
}

}  // namespace egd::monitor
