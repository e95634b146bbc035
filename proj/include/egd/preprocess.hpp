#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "egd/dataio.hpp"
#include "egd/tensor.hpp"

namespace egd::preprocess {

inline constexpr int kNumChannels = 26;

// Per-arm channel block: position xyz, Euler yaw/pitch/roll, linear velocity
// xyz, rotational velocity xyz, gripper angle. Left arm occupies channels
// 0..12, right arm 13..25.
inline constexpr int kChannelsPerArm = 13;

struct WindowConfig {
  int window_length = 30;
  int stride = 20;
  int downsample_factor = 2;
  int min_padded_length = 10;  // downsampled; shorter instances are skipped

  void validate() const;
};

struct ChannelStats {
  std::vector<double> mean;    // size kNumChannels
  std::vector<double> stddev;  // clamped at 1e-8
  std::string provenance;      // which training corpus produced these
};

struct WindowSource {
  std::string trial_id;
  int gesture_index = 0;  // 1-based transcript position
  int offset = 0;         // start offset in downsampled samples
};

struct FeatureWindow {
  Tensor data;  // kNumChannels x window_length
  int gesture_id = 0;
  dataio::TaskClass task = dataio::TaskClass::Suturing;
  int label = 0;
  WindowSource source;
};

// ---- rotation handling ----

// Intrinsic Z-Y-X decomposition: returns (yaw, pitch, roll) radians.
// Gimbal lock (|R[2][0]| > 1 - 1e-9) canonicalizes to roll = 0.
// Throws NumericError if R is non-orthonormal beyond 1e-1.
std::array<double, 3> rotation_to_euler(const std::array<double, 9>& r);

std::array<double, 9> euler_to_rotation(double yaw, double pitch, double roll);

// max |R^T R - I| entry
double orthonormality_error(const std::array<double, 9>& r);

// ---- feature pipeline ----

Tensor extract_feature_channels(std::span<const dataio::RawKinematicSample> samples);

Tensor downsample(const Tensor& m, int factor);

// single-pass per-channel accumulation (Welford)
class StatsAccumulator {
 public:
  void add(const Tensor& m);  // kNumChannels x L
  ChannelStats finalize(std::string provenance) const;
  long count() const { return n_; }

 private:
  long n_ = 0;
  std::array<double, kNumChannels> mean_{};
  std::array<double, kNumChannels> m2_{};
};

ChannelStats fit_channel_stats(std::span<const Tensor> matrices, std::string provenance);

void normalize_inplace(Tensor& m, const ChannelStats& stats);
Tensor normalize(const Tensor& m, const ChannelStats& stats);
Tensor denormalize(const Tensor& m, const ChannelStats& stats);

// window start offsets for a downsampled instance of length len
std::vector<int> window_offsets(int len, const WindowConfig& cfg);

// slice one gesture instance out of a trial and run extract+downsample
// (no normalization); the pre-normalization input to stats fitting
Tensor instance_matrix(const dataio::TrialRecord& trial, const dataio::GestureInstance& gi);

struct WindowingReport {
  int windows = 0;
  int padded_instances = 0;
  std::vector<std::string> skipped;  // instances below min_padded_length
};

std::vector<FeatureWindow> slide_gesture_windows(const dataio::TrialRecord& trial,
                                                 const ChannelStats& stats,
                                                 const WindowConfig& cfg,
                                                 WindowingReport* report = nullptr);

// windows of a single gesture instance (0-based index into gesture_instances)
std::vector<FeatureWindow> instance_windows(const dataio::TrialRecord& trial,
                                            size_t instance_index,
                                            const ChannelStats& stats,
                                            const WindowConfig& cfg,
                                            WindowingReport* report = nullptr);

// debugging export, channel-major: header "trial,gesture_index,offset,channel,s0..s29"
void write_windows_csv(const std::filesystem::path& path,
                       std::span<const FeatureWindow> windows);

}  // namespace egd::preprocess
