#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "egd/dataio.hpp"
#include "egd/models.hpp"
#include "egd/preprocess.hpp"

namespace egd::monitor {

struct StreamEvent {
  long frame = 0;      // trial frame index, strictly increasing
  double wall_ms = 0;  // arrival time since stream start
  const dataio::RawKinematicSample* sample = nullptr;
  int gesture_id = -1;     // -1 outside any gesture instance
  int gesture_index = 0;   // 1-based transcript position, 0 outside
  int error_label = -1;    // the instance's ground-truth label, if any
  bool instance_end = false;
};

// Paced replay of a trial's kinematics. rate 1.0 = real-time 30 Hz,
// 0 = as fast as possible. Gesture tags come from the transcript.
void replay_stream(const dataio::TrialRecord& trial, double rate_multiplier,
                   const std::function<void(const StreamEvent&)>& sink);

// Online windowing with the identical extract/downsample/normalize/window
// pipeline as the offline path; each window is emitted the moment its last
// contributing raw frame arrives, so the stream is bit-identical to
// slide_gesture_windows on the same trial.
class WindowAssembler {
 public:
  WindowAssembler(std::string trial_id, dataio::TaskClass task,
                  preprocess::ChannelStats stats, preprocess::WindowConfig cfg);

  // feed one in-instance event; returns windows completed by this frame
  std::vector<preprocess::FeatureWindow> push(const StreamEvent& ev);

  const preprocess::WindowingReport& report() const { return report_; }

 private:
  std::string trial_id_;
  dataio::TaskClass task_;
  preprocess::ChannelStats stats_;
  preprocess::WindowConfig cfg_;
  preprocess::WindowingReport report_;

  std::vector<dataio::RawKinematicSample> buffer_;
  int gesture_id_ = -1;
  int gesture_index_ = 0;
  int label_ = -1;
  int next_offset_ = 0;

  preprocess::FeatureWindow cut_window(int offset, bool pad);
  std::vector<preprocess::FeatureWindow> flush();
};

struct DetectionEvent {
  long emit_frame = 0;  // frame whose arrival completed the window
  std::string trial_id;
  int gesture_id = 0;
  int gesture_index = 0;
  int offset = 0;
  bool monitored = true;
  bool erroneous = false;
  double score = 0.0;
  double latency_ms = 0.0;  // window complete -> verdict
};

// One loaded checkpoint routed by its scope tags; reference embeddings are
// precomputed for Siamese voting.
struct DetectorEntry {
  models::LoadedCheckpoint ckpt;
  Batch reference_windows;
  Batch reference_embeddings;

  bool matches(dataio::TaskClass task, int gesture_id) const;
};

// References come from manifest trials whose repetition differs from the
// replayed trial (its LOSO training folds), normalized per checkpoint.
DetectorEntry make_detector(models::LoadedCheckpoint ckpt,
                            const dataio::DatasetManifest& manifest,
                            const std::string& exclude_trial_id,
                            const preprocess::WindowConfig& wcfg, long ref_cap,
                            uint64_t seed);

struct MonitorOptions {
  double rate = 1.0;
  preprocess::WindowConfig window;
};

struct MonitorSummary {
  int events = 0;
  int unmonitored = 0;
  int skipped_instances = 0;
  double mean_latency_ms = 0.0;
  double p95_latency_ms = 0.0;
  double stream_seconds = 0.0;
  bool realtime_violation = false;

  std::string to_csv(const std::string& trial_id) const;
};

// Two stages (window assembly, detection) joined by an ordered queue;
// detection runs on its own thread and events are emitted in window order.
MonitorSummary run_monitor(const dataio::TrialRecord& trial,
                           std::vector<DetectorEntry>& detectors,
                           const MonitorOptions& opts,
                           const std::function<void(const DetectionEvent&)>& sink);

}  // namespace egd::monitor
