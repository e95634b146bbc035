#include <cmath>

#include "doctest.h"
#include "egd/preprocess.hpp"
#include "egd/rng.hpp"
#include "support/oracles.hpp"

using namespace egd;
using namespace egd::preprocess;

namespace {
constexpr double kPi = 3.14159265358979323846;

dataio::TrialRecord trial_with_instance(int frames, int gesture = 3, int label = 1) {
  dataio::TrialRecord t;
  t.trial_id = "Suturing_T001";
  t.subject_id = "T";
  t.repetition_index = 1;
  Rng rng(99);
  t.samples.resize(frames);
  for (auto& s : t.samples) {
    for (auto* arm : {&s.left, &s.right}) {
      const auto r = euler_to_rotation(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                       rng.uniform(-1, 1));
      arm->rotation = r;
      for (int i = 0; i < 3; ++i) {
        arm->position[i] = rng.uniform(-1, 1);
        arm->linear_velocity[i] = rng.uniform(-1, 1);
        arm->rotational_velocity[i] = rng.uniform(-1, 1);
      }
      arm->gripper_angle = rng.uniform(0, 1);
    }
  }
  dataio::GestureInstance gi;
  gi.gesture_id = gesture;
  gi.start_frame = 0;
  gi.end_frame = frames - 1;
  gi.error_label = label;
  t.gesture_instances.push_back(gi);
  return t;
}

ChannelStats unit_stats() {
  return {std::vector<double>(kNumChannels, 0.0), std::vector<double>(kNumChannels, 1.0),
          "unit"};
}

}  // namespace

TEST_CASE("euler decomposition of canonical rotations") {
  const std::array<double, 9> identity = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  auto e = rotation_to_euler(identity);
  CHECK(e[0] == 0.0);
  CHECK(e[1] == 0.0);
  CHECK(e[2] == 0.0);

  const std::array<double, 9> z90 = {0, -1, 0, 1, 0, 0, 0, 0, 1};
  e = rotation_to_euler(z90);
  CHECK(e[0] == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(e[1] == doctest::Approx(0.0));
  CHECK(e[2] == doctest::Approx(0.0));
}

TEST_CASE("euler round-trip within 1e-9 away from gimbal lock") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double yaw = rng.uniform(-kPi, kPi);
    const double pitch = rng.uniform(-1.5, 1.5);
    const double roll = rng.uniform(-kPi, kPi);
    const auto e = rotation_to_euler(euler_to_rotation(yaw, pitch, roll));
    CHECK(std::abs(e[0] - yaw) < 1e-9);
    CHECK(std::abs(e[1] - pitch) < 1e-9);
    CHECK(std::abs(e[2] - roll) < 1e-9);
  }
}

TEST_CASE("gimbal lock canonical form: roll folded into yaw") {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const double yaw = rng.uniform(-2.0, 2.0);
    const double roll = rng.uniform(-2.0, 2.0);
    for (double sign : {1.0, -1.0}) {
      const auto e = rotation_to_euler(euler_to_rotation(yaw, sign * kPi / 2, roll));
      CHECK(e[2] == 0.0);
      CHECK(e[1] == doctest::Approx(sign * kPi / 2).epsilon(1e-9));
      const double expected_yaw = yaw - sign * roll;
      const double wrapped = std::atan2(std::sin(expected_yaw), std::cos(expected_yaw));
      CHECK(std::abs(e[0] - wrapped) < 1e-7);
    }
  }
}

TEST_CASE("non-orthonormal rotation rejected beyond hard tolerance") {
  std::array<double, 9> bad = {1, 0, 0, 0, 1, 0, 0, 0, 1.3};
  CHECK_THROWS_AS(rotation_to_euler(bad), NumericError);
  CHECK(orthonormality_error({1, 0, 0, 0, 1, 0, 0, 0, 1}) == 0.0);
}

TEST_CASE("feature extraction channel map") {
  std::vector<dataio::RawKinematicSample> samples(5);
  for (auto& s : samples) {
    s.left.rotation = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    s.right.rotation = s.left.rotation;
  }
  auto m = extract_feature_channels(samples);
  CHECK(m.rows() == 26);
  CHECK(m.cols() == 5);
  for (double v : m.v) CHECK(v == 0.0);

  // sinusoid on position-x of both arms lands in channels 0 and 13 only
  for (size_t n = 0; n < samples.size(); ++n) {
    samples[n].left.position[0] = std::sin(0.3 * n + 0.2);
    samples[n].right.position[0] = std::cos(0.3 * n);
  }
  m = extract_feature_channels(samples);
  for (int c = 0; c < 26; ++c)
    for (int t = 0; t < 5; ++t) {
      if (c == 0 || c == 13)
        CHECK(m(c, t) != 0.0);
      else
        CHECK(m(c, t) == 0.0);
    }

  CHECK(extract_feature_channels(std::span<const dataio::RawKinematicSample>(
            samples.data(), 1)).cols() == 1);
  CHECK_THROWS_AS(extract_feature_channels({}), ValidationError);
}

TEST_CASE("downsample keeps every factor-th column from index 0") {
  Tensor m = Tensor::mat(1, 5);
  m.v = {10, 11, 12, 13, 14};
  auto d = downsample(m, 2);
  CHECK(d.v == std::vector<double>{10, 12, 14});

  CHECK(downsample(m, 1).v == m.v);
  Tensor m30 = Tensor::mat(26, 30);
  CHECK(downsample(m30, 2).cols() == 15);
  CHECK_THROWS_AS(downsample(m, 0), ValidationError);
}

TEST_CASE("channel stats: degenerate, symmetric, and single-pass vs two-pass") {
  Tensor constant = Tensor::mat(kNumChannels, 10);
  constant.fill(3.5);
  auto s = fit_channel_stats(std::span(&constant, 1), "t");
  CHECK(s.mean[0] == doctest::Approx(3.5));
  CHECK(s.stddev[0] == 1e-8);  // clamped

  Tensor pm = Tensor::mat(kNumChannels, 2);
  for (int c = 0; c < kNumChannels; ++c) {
    pm(c, 0) = -1.0;
    pm(c, 1) = 1.0;
  }
  s = fit_channel_stats(std::span(&pm, 1), "t");
  CHECK(s.mean[5] == doctest::Approx(0.0));
  CHECK(s.stddev[5] == doctest::Approx(1.0));

  // streaming accumulation vs naive two-pass over the concatenated corpus
  Rng rng(21);
  std::vector<Tensor> parts;
  std::vector<std::vector<double>> concat(kNumChannels);
  for (int p = 0; p < 4; ++p) {
    Tensor t = Tensor::mat(kNumChannels, 7 + p);
    for (int c = 0; c < kNumChannels; ++c)
      for (int j = 0; j < t.cols(); ++j) {
        t(c, j) = rng.uniform(-5, 5);
        concat[c].push_back(t(c, j));
      }
    parts.push_back(t);
  }
  s = fit_channel_stats(parts, "t");
  for (int c = 0; c < kNumChannels; ++c) {
    double mean = 0;
    for (double v : concat[c]) mean += v;
    mean /= concat[c].size();
    double var = 0;
    for (double v : concat[c]) var += (v - mean) * (v - mean);
    var /= concat[c].size();
    CHECK(std::abs(s.mean[c] - mean) < 1e-12);
    CHECK(std::abs(s.stddev[c] - std::sqrt(var)) < 1e-12);
  }

  CHECK_THROWS_AS(fit_channel_stats({}, "t"), ValidationError);
}

TEST_CASE("normalization inverse and idempotence") {
  Rng rng(31);
  Tensor m = Tensor::mat(kNumChannels, 9);
  for (double& v : m.v) v = rng.uniform(-4, 4);
  auto stats = fit_channel_stats(std::span(&m, 1), "t");

  Tensor means = Tensor::mat(kNumChannels, 3);
  for (int c = 0; c < kNumChannels; ++c)
    for (int t = 0; t < 3; ++t) means(c, t) = stats.mean[c];
  auto z = normalize(means, stats);
  for (double v : z.v) CHECK(std::abs(v) < 1e-12);

  auto back = denormalize(normalize(m, stats), stats);
  for (size_t i = 0; i < m.size(); ++i) CHECK(std::abs(back[i] - m[i]) < 1e-10);

  auto normed = normalize(m, stats);
  auto restats = fit_channel_stats(std::span(&normed, 1), "t");
  for (int c = 0; c < kNumChannels; ++c) {
    CHECK(std::abs(restats.mean[c]) < 1e-12);
    CHECK(restats.stddev[c] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("window offsets match brute-force start-index enumeration") {
  WindowConfig cfg;
  Rng rng(41);
  for (int i = 0; i < 1000; ++i) {
    const int len = static_cast<int>(rng.uniform_index(300));
    CHECK(window_offsets(len, cfg) ==
          testsupport::brute_force_offsets(len, cfg.window_length, cfg.stride));
  }
  // count formula for len >= window
  for (int i = 0; i < 200; ++i) {
    const int len = 30 + static_cast<int>(rng.uniform_index(300));
    CHECK(static_cast<int>(window_offsets(len, cfg).size()) == (len - 30) / 20 + 1);
  }
}

TEST_CASE("gesture windowing: counts, padding, skipping, label inheritance") {
  WindowConfig cfg;
  ChannelStats stats = unit_stats();

  // downsampled length 70 -> offsets 0, 20, 40
  auto t = trial_with_instance(140);
  WindowingReport rep;
  auto ws = slide_gesture_windows(t, stats, cfg, &rep);
  REQUIRE(ws.size() == 3);
  CHECK(ws[0].source.offset == 0);
  CHECK(ws[1].source.offset == 20);
  CHECK(ws[2].source.offset == 40);
  for (const auto& w : ws) {
    CHECK(w.data.rows() == 26);
    CHECK(w.data.cols() == 30);
    CHECK(w.label == 1);
    CHECK(w.gesture_id == 3);
  }

  // exactly one window at downsampled length 30
  CHECK(slide_gesture_windows(trial_with_instance(60), stats, cfg).size() == 1);

  // downsampled length 12: padded by repeating the final column 18 times
  auto t12 = trial_with_instance(24);
  rep = {};
  ws = slide_gesture_windows(t12, stats, cfg, &rep);
  REQUIRE(ws.size() == 1);
  CHECK(rep.padded_instances == 1);
  const auto d = downsample(instance_matrix(t12, t12.gesture_instances[0]), 2);
  for (int c = 0; c < 26; ++c) {
    CHECK(ws[0].data(c, 11) == d(c, 11));
    for (int col = 12; col < 30; ++col) CHECK(ws[0].data(c, col) == d(c, 11));
  }

  // downsampled length 9 -> skipped with a report entry
  rep = {};
  ws = slide_gesture_windows(trial_with_instance(18), stats, cfg, &rep);
  CHECK(ws.empty());
  CHECK(rep.skipped.size() == 1);
}
