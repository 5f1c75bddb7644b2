// Copyright 2026 The Sitpose Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Virtual IMU synthesis from motion sequences and the pelvis-relative
// normalization that produces the 48-value network input.

#ifndef SITPOSE_IMU_HPP_
#define SITPOSE_IMU_HPP_

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sitpose/body_model.hpp"
#include "sitpose/error.hpp"
#include "sitpose/rotation.hpp"

namespace sitpose {

inline constexpr int kNormalizedInputSize = 48;

struct MotionSequence {
  double frame_rate = 60.0;
  std::vector<Pose> frames;
  std::string subject = "synthetic";
  std::string tag;  // motion category, empty when unknown
  int first_frame = 0;  // index of frames[0] in the originating recording
};

// One reading from the four sensors in a shared global frame. Acceleration
// is gravity-subtracted; orientation is the sensor-to-global rotation.
struct ImuFrame {
  double timestamp = 0.0;
  std::array<Vec3, kSensorCount> acceleration;
  std::array<Quat, kSensorCount> orientation;

  ImuFrame() {
    acceleration.fill(Vec3::Zero());
    orientation.fill(Quat::Identity());
  }

  Vec3& accel(SensorId s) { return acceleration[static_cast<std::size_t>(s)]; }
  const Vec3& accel(SensorId s) const { return acceleration[static_cast<std::size_t>(s)]; }
  Mat3 rotation(SensorId s) const {
    return QuaternionToMatrix(orientation[static_cast<std::size_t>(s)]);
  }
};

struct ImuSequence {
  double frame_rate = 60.0;
  int first_frame = 0;  // motion frame index of frames[0]
  std::vector<ImuFrame> frames;
};

// Layout: [a_pelvis, a_larm, a_rarm, a_head] (3 each), then
// [R_pelvis, R_larm, R_rarm, R_head] (9 each, row-major).
using NormalizedInput = Eigen::Matrix<double, kNormalizedInputSize, 1>;

inline constexpr int NormalizedAccelOffset(SensorId s) {
  return 3 * static_cast<int>(s);
}
inline constexpr int NormalizedRotationOffset(SensorId s) {
  return 12 + 9 * static_cast<int>(s);
}

inline Mat3 NormalizedRotation(const NormalizedInput& x, SensorId s) {
  Mat3 r;
  const int o = NormalizedRotationOffset(s);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = x(o + 3 * i + j);
  }
  return r;
}

inline NormalizedInput NormalizeFrame(const ImuFrame& frame) {
  NormalizedInput out;
  const Mat3 r_pelvis = frame.rotation(SensorId::kPelvisOrChair);
  const Mat3 inv = r_pelvis.transpose();
  const Vec3& a_pelvis = frame.accel(SensorId::kPelvisOrChair);
  for (std::size_t s = 0; s < kSensorCount; ++s) {
    const auto id = static_cast<SensorId>(s);
    Vec3 a;
    Mat3 r;
    if (id == SensorId::kPelvisOrChair) {
      a = inv * a_pelvis;
      r = r_pelvis;
    } else {
      a = inv * (frame.accel(id) - a_pelvis);
      r = inv * frame.rotation(id);
    }
    out.segment<3>(NormalizedAccelOffset(id)) = a;
    const int o = NormalizedRotationOffset(id);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) out(o + 3 * i + j) = r(i, j);
    }
  }
  return out;
}

inline std::vector<NormalizedInput> NormalizeSequence(const ImuSequence& seq) {
  std::vector<NormalizedInput> out;
  out.reserve(seq.frames.size());
  for (const auto& f : seq.frames) out.push_back(NormalizeFrame(f));
  return out;
}

struct SynthesisOptions {
  int smoothing = 4;              // n in the central second difference
  double accel_noise_std = 0.0;   // additive Gaussian noise, m/s^2; 0 disables
  std::uint64_t noise_seed = 0;
};

// Second difference with stride n: (x[t-n] + x[t+n] - 2 x[t]) / (n dt)^2.
inline Vec3 StridedSecondDifference(const std::vector<Vec3>& x, std::size_t t, int n,
                                    double dt) {
  const auto un = static_cast<std::size_t>(n);
  const double h = static_cast<double>(n) * dt;
  return (x[t - un] + x[t + un] - 2.0 * x[t]) / (h * h);
}

// Virtual sensors sit at their attachment points; output frame k corresponds
// to motion frame k + n, and the n frames at each end are trimmed.
inline ImuSequence SynthesizeImu(const KinematicModel& model, const MotionSequence& motion,
                                 const SynthesisOptions& opts = {}) {
  const int n = opts.smoothing;
  if (n < 1) throw Error(ErrorKind::kConfigError, "smoothing radius must be >= 1");
  if (!(motion.frame_rate > 0.0)) throw Error(ErrorKind::kConfigError, "frame_rate must be > 0");
  const std::size_t total = motion.frames.size();
  if (total < static_cast<std::size_t>(2 * n + 1)) {
    throw Error(ErrorKind::kSequenceTooShort,
                "need at least " + std::to_string(2 * n + 1) + " frames, got " +
                    std::to_string(total));
  }
  const double dt = 1.0 / motion.frame_rate;

  std::array<std::vector<Vec3>, kSensorCount> positions;
  std::array<std::vector<Quat>, kSensorCount> orientations;
  for (std::size_t s = 0; s < kSensorCount; ++s) {
    positions[s].reserve(total);
    orientations[s].reserve(total);
  }
  for (const auto& pose : motion.frames) {
    const FkResult fk = ForwardKinematics(model, pose);
    for (std::size_t s = 0; s < kSensorCount; ++s) {
      const auto& att = model.sensors()[s];
      positions[s].push_back(AttachedPoint(fk, att));
      orientations[s].push_back(MatrixToQuaternion(fk.rotations[static_cast<std::size_t>(att.joint)]));
    }
  }

  std::mt19937_64 rng(opts.noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  ImuSequence out;
  out.frame_rate = motion.frame_rate;
  out.first_frame = motion.first_frame + n;
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t t = un; t + un < total; ++t) {
    ImuFrame f;
    f.timestamp = static_cast<double>(motion.first_frame + static_cast<int>(t)) * dt;
    for (std::size_t s = 0; s < kSensorCount; ++s) {
      Vec3 a = StridedSecondDifference(positions[s], t, n, dt);
      if (opts.accel_noise_std > 0.0) {
        a += opts.accel_noise_std * Vec3(noise(rng), noise(rng), noise(rng));
      }
      f.acceleration[s] = a;
      f.orientation[s] = orientations[s][t];
    }
    out.frames.push_back(f);
  }
  return out;
}

}  // namespace sitpose

#endif  // SITPOSE_IMU_HPP_
