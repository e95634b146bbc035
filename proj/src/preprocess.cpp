#include "egd/preprocess.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace egd::preprocess {

void WindowConfig::validate() const {
  if (window_length <= 0 || stride <= 0 || min_padded_length <= 0)
    throw ValidationError("window config: lengths and stride must be positive");
  if (downsample_factor <= 0)
    throw ValidationError("window config: downsample factor must be positive");
}

double orthonormality_error(const std::array<double, 9>& r) {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += r[k * 3 + i] * r[k * 3 + j];
      worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

std::array<double, 3> rotation_to_euler(const std::array<double, 9>& r) {
  const double err = orthonormality_error(r);
  if (err > 1e-1)
    throw NumericError("rotation matrix non-orthonormal (|R'R - I| = " +
                       std::to_string(err) + ")");

  const double s = -r[2 * 3 + 0];  // sin(pitch)
  const double pitch = std::asin(std::clamp(s, -1.0, 1.0));
  double yaw, roll;
  if (std::abs(s) > 1.0 - 1e-9) {
    roll = 0.0;
    yaw = std::atan2(-r[0 * 3 + 1], r[1 * 3 + 1]);
  } else {
    yaw = std::atan2(r[1 * 3 + 0], r[0 * 3 + 0]);
    roll = std::atan2(r[2 * 3 + 1], r[2 * 3 + 2]);
  }
  return {yaw, pitch, roll};
}

std::array<double, 9> euler_to_rotation(double yaw, double pitch, double roll) {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cr = std::cos(roll), sr = std::sin(roll);
  return {cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
          sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
          -sp,     cp * sr,                cp * cr};
}

namespace {

void fill_arm(Tensor& m, int base, const dataio::ArmSample& a, int col) {
  for (int i = 0; i < 3; ++i) m(base + i, col) = a.position[i];
  const auto e = rotation_to_euler(a.rotation);
  for (int i = 0; i < 3; ++i) m(base + 3 + i, col) = e[i];
  for (int i = 0; i < 3; ++i) m(base + 6 + i, col) = a.linear_velocity[i];
  for (int i = 0; i < 3; ++i) m(base + 9 + i, col) = a.rotational_velocity[i];
  m(base + 12, col) = a.gripper_angle;
}

}  // namespace

Tensor extract_feature_channels(std::span<const dataio::RawKinematicSample> samples) {
  if (samples.empty()) throw ValidationError("extract: empty sample sequence");
  Tensor m = Tensor::mat(kNumChannels, static_cast<int>(samples.size()));
  for (size_t n = 0; n < samples.size(); ++n) {
    fill_arm(m, 0, samples[n].left, static_cast<int>(n));
    fill_arm(m, kChannelsPerArm, samples[n].right, static_cast<int>(n));
  }
  return m;
}

Tensor downsample(const Tensor& m, int factor) {
  if (factor <= 0) throw ValidationError("downsample: factor must be positive");
  const int L = m.cols();
  const int out_cols = (L + factor - 1) / factor;
  Tensor d = Tensor::mat(m.rows(), out_cols);
  for (int r = 0; r < m.rows(); ++r)
    for (int j = 0; j < out_cols; ++j) d(r, j) = m(r, j * factor);
  return d;
}

void StatsAccumulator::add(const Tensor& m) {
  if (m.rows() != kNumChannels) throw ShapeError("stats: expected 26-channel matrix");
  for (int t = 0; t < m.cols(); ++t) {
    ++n_;
    for (int c = 0; c < kNumChannels; ++c) {
      const double x = m(c, t);
      const double delta = x - mean_[c];
      mean_[c] += delta / static_cast<double>(n_);
      m2_[c] += delta * (x - mean_[c]);
    }
  }
}

ChannelStats StatsAccumulator::finalize(std::string provenance) const {
  if (n_ == 0) throw ValidationError("stats: empty corpus");
  ChannelStats s;
  s.mean.resize(kNumChannels);
  s.stddev.resize(kNumChannels);
  s.provenance = std::move(provenance);
  for (int c = 0; c < kNumChannels; ++c) {
    s.mean[c] = mean_[c];
    s.stddev[c] = std::max(std::sqrt(m2_[c] / static_cast<double>(n_)), 1e-8);
  }
  return s;
}

ChannelStats fit_channel_stats(std::span<const Tensor> matrices, std::string provenance) {
  StatsAccumulator acc;
  for (const Tensor& m : matrices) acc.add(m);
  return acc.finalize(std::move(provenance));
}

void normalize_inplace(Tensor& m, const ChannelStats& stats) {
  for (int c = 0; c < m.rows(); ++c) {
    const double mu = stats.mean[c];
    const double inv = 1.0 / stats.stddev[c];
    for (int t = 0; t < m.cols(); ++t) m(c, t) = (m(c, t) - mu) * inv;
  }
}

Tensor normalize(const Tensor& m, const ChannelStats& stats) {
  Tensor out = m;
  normalize_inplace(out, stats);
  return out;
}

Tensor denormalize(const Tensor& m, const ChannelStats& stats) {
  Tensor out = m;
  for (int c = 0; c < out.rows(); ++c)
    for (int t = 0; t < out.cols(); ++t)
      out(c, t) = out(c, t) * stats.stddev[c] + stats.mean[c];
  return out;
}

std::vector<int> window_offsets(int len, const WindowConfig& cfg) {
  std::vector<int> offsets;
  for (int o = 0; o + cfg.window_length <= len; o += cfg.stride) offsets.push_back(o);
  return offsets;
}

Tensor instance_matrix(const dataio::TrialRecord& trial, const dataio::GestureInstance& gi) {
  const auto* begin = trial.samples.data() + gi.start_frame;
  return extract_feature_channels(
      std::span<const dataio::RawKinematicSample>(begin, gi.frame_count()));
}

std::vector<FeatureWindow> instance_windows(const dataio::TrialRecord& trial,
                                            size_t instance_index,
                                            const ChannelStats& stats,
                                            const WindowConfig& cfg,
                                            WindowingReport* report) {
  cfg.validate();
  std::vector<FeatureWindow> windows;
  const auto& gi = trial.gesture_instances.at(instance_index);
  Tensor d = downsample(instance_matrix(trial, gi), cfg.downsample_factor);
  const int len = d.cols();
  if (len < cfg.min_padded_length) {
    if (report)
      report->skipped.push_back(trial.trial_id + " #" + std::to_string(instance_index + 1) +
                                ": downsampled length " + std::to_string(len) + " < " +
                                std::to_string(cfg.min_padded_length));
    return windows;
  }
  normalize_inplace(d, stats);

  auto make_window = [&](const Tensor& src, int offset) {
    FeatureWindow w;
    w.data = Tensor::mat(kNumChannels, cfg.window_length);
    for (int c = 0; c < kNumChannels; ++c)
      for (int t = 0; t < cfg.window_length; ++t) w.data(c, t) = src(c, offset + t);
    w.gesture_id = gi.gesture_id;
    w.task = trial.task;
    w.label = gi.error_label;
    w.source = {trial.trial_id, static_cast<int>(instance_index + 1), offset};
    windows.push_back(std::move(w));
    if (report) ++report->windows;
  };

  if (len < cfg.window_length) {
    // short instance: pad to one full window by repeating the final column
    Tensor padded = Tensor::mat(kNumChannels, cfg.window_length);
    for (int c = 0; c < kNumChannels; ++c) {
      for (int t = 0; t < len; ++t) padded(c, t) = d(c, t);
      for (int t = len; t < cfg.window_length; ++t) padded(c, t) = d(c, len - 1);
    }
    make_window(padded, 0);
    if (report) ++report->padded_instances;
  } else {
    for (int o : window_offsets(len, cfg)) make_window(d, o);
  }
  return windows;
}

std::vector<FeatureWindow> slide_gesture_windows(const dataio::TrialRecord& trial,
                                                 const ChannelStats& stats,
                                                 const WindowConfig& cfg,
                                                 WindowingReport* report) {
  std::vector<FeatureWindow> windows;
  for (size_t gidx = 0; gidx < trial.gesture_instances.size(); ++gidx) {
    auto ws = instance_windows(trial, gidx, stats, cfg, report);
    for (auto& w : ws) windows.push_back(std::move(w));
  }
  return windows;
}

void write_windows_csv(const std::filesystem::path& path,
                       std::span<const FeatureWindow> windows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ValidationError("cannot write " + path.string());
  f << "trial,gesture_index,offset,gesture,task,label,channel";
  const int cols = windows.empty() ? 30 : windows.front().data.cols();
  for (int t = 0; t < cols; ++t) f << ",s" << t;
  f << "\n";
  char buf[32];
  for (const FeatureWindow& w : windows)
    for (int c = 0; c < w.data.rows(); ++c) {
      f << w.source.trial_id << ',' << w.source.gesture_index << ',' << w.source.offset
        << ",G" << w.gesture_id << ',' << dataio::task_name(w.task) << ',' << w.label
        << ',' << c;
      for (int t = 0; t < w.data.cols(); ++t) {
        std::snprintf(buf, sizeof buf, "%.9g", w.data(c, t));
        f << ',' << buf;
      }
      f << "\n";
    }
}

}  // namespace egd::preprocess
