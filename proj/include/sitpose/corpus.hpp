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

// Parameterized seated upper-body motions and wheelchair-locomotion
// analogues, generated deterministically from a seed.

#ifndef SITPOSE_CORPUS_HPP_
#define SITPOSE_CORPUS_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sitpose/body_model.hpp"
#include "sitpose/imu.hpp"
#include "sitpose/rotation.hpp"

namespace sitpose {

inline constexpr std::array<std::string_view, 5> kMotionCategories = {
    "arm", "upper_body", "translation", "rotation", "combined"};

struct CorpusConfig {
  int sequences_per_category = 4;
  double duration_s = 4.0;
  double frame_rate = 60.0;
  std::vector<std::string> categories = {kMotionCategories.begin(), kMotionCategories.end()};
};

namespace corpus_detail {

inline constexpr double kDeg = std::numbers::pi / 180.0;

inline double MinJerk(double tau) {
  if (tau <= 0.0) return 0.0;
  if (tau >= 1.0) return 1.0;
  return tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau));
}

// 0 -> 1 over [t0, t1], hold, 1 -> 0 over [t2, t3].
inline double Bump(double t, double t0, double t1, double t2, double t3) {
  if (t < t2) return MinJerk((t - t0) / (t1 - t0));
  return 1.0 - MinJerk((t - t2) / (t3 - t2));
}

inline Mat3 AxisRotation(const Vec3& axis, double angle) {
  return ExpMap(axis.normalized() * angle);
}

struct Joints {
  int pelvis, spine1, spine2, spine3, neck, head;
  int lshoulder, rshoulder, lelbow, relbow;

  explicit Joints(const KinematicModel& m)
      : pelvis(0),
        spine1(m.RequireJoint("spine1")),
        spine2(m.RequireJoint("spine2")),
        spine3(m.RequireJoint("spine3")),
        neck(m.RequireJoint("neck")),
        head(m.RequireJoint("head")),
        lshoulder(m.RequireJoint("left_shoulder")),
        rshoulder(m.RequireJoint("right_shoulder")),
        lelbow(m.RequireJoint("left_elbow")),
        relbow(m.RequireJoint("right_elbow")) {}
};

// Per-frame targets written by the motion recipes before assembly.
struct Frame {
  Vec3 root = Vec3::Zero();
  double yaw = 0.0;
  Vec3 torso_axis = Vec3::UnitX();
  double torso_angle = 0.0;
  std::array<Mat3, 2> shoulder_extra = {Mat3::Identity(), Mat3::Identity()};
  std::array<double, 2> elbow_flex = {30.0 * kDeg, 30.0 * kDeg};
};

inline Pose Assemble(const KinematicModel& model, const Joints& j, const Frame& f) {
  Pose p = Pose::Identity(model);
  p.root_position = f.root;
  p.local_rotations[static_cast<std::size_t>(j.pelvis)] =
      Rotation::FromAxisAngle(Vec3::UnitY() * f.yaw);
  const Mat3 torso = AxisRotation(f.torso_axis, f.torso_angle / 3.0);
  for (int s : {j.spine1, j.spine2, j.spine3}) {
    p.local_rotations[static_cast<std::size_t>(s)] = Rotation::FromMatrix(torso);
  }
  // Head partially counter-rotates to keep gaze level.
  p.local_rotations[static_cast<std::size_t>(j.neck)] =
      Rotation::FromMatrix(AxisRotation(f.torso_axis, -0.3 * f.torso_angle));
  const Mat3 ldown = AxisRotation(Vec3::UnitZ(), -75.0 * kDeg);
  const Mat3 rdown = AxisRotation(Vec3::UnitZ(), 75.0 * kDeg);
  p.local_rotations[static_cast<std::size_t>(j.lshoulder)] =
      Rotation::FromMatrix(f.shoulder_extra[0] * ldown);
  p.local_rotations[static_cast<std::size_t>(j.rshoulder)] =
      Rotation::FromMatrix(f.shoulder_extra[1] * rdown);
  p.local_rotations[static_cast<std::size_t>(j.lelbow)] =
      Rotation::FromMatrix(AxisRotation(Vec3::UnitY(), -f.elbow_flex[0]));
  p.local_rotations[static_cast<std::size_t>(j.relbow)] =
      Rotation::FromMatrix(AxisRotation(Vec3::UnitY(), f.elbow_flex[1]));
  return p;
}

// Rotation raising the arm (side 0 left, 1 right) from hanging toward the
// horizontal direction at `azimuth` (0 lateral, 90 deg forward).
inline Mat3 ArmRaise(int side, double azimuth, double elevation) {
  const double sx = side == 0 ? 1.0 : -1.0;
  const Vec3 down(sx * std::cos(75.0 * kDeg), -std::sin(75.0 * kDeg), 0.0);
  const Vec3 toward(sx * std::cos(azimuth), 0.0, std::sin(azimuth));
  return AxisRotation(down.cross(toward), elevation);
}

class Generator {
 public:
  Generator(const KinematicModel& model, std::uint64_t seed) : model_(model), j_(model), rng_(seed) {}

  double Uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int Pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

  MotionSequence Make(std::string_view category, const CorpusConfig& cfg) {
    const int count = static_cast<int>(std::lround(cfg.duration_s * cfg.frame_rate));
    const double dt = 1.0 / cfg.frame_rate;
    const double dur = static_cast<double>(count) * dt;
    const double yaw0 = Uniform(-std::numbers::pi, std::numbers::pi);

    // Recipe parameters drawn once per sequence.
    const int side = Pick(3);  // 0 left, 1 right, 2 both
    const double azimuth = std::array<double, 3>{0.0, 45.0, 90.0}[static_cast<std::size_t>(Pick(3))] * kDeg;
    const bool overhead = Pick(4) == 0;
    const double elevation = overhead ? Uniform(150.0, 165.0) * kDeg : Uniform(60.0, 110.0) * kDeg;
    const double t0 = Uniform(0.1, 0.3) * dur, t1 = t0 + Uniform(0.15, 0.25) * dur;
    const double t2 = t1 + Uniform(0.05, 0.15) * dur, t3 = std::min(t2 + Uniform(0.15, 0.25) * dur, dur);
    const int torso_mode = Pick(3);  // forward lean, side lean, twist
    const double torso_amp = Uniform(15.0, 35.0) * kDeg * (Pick(2) == 0 ? 1.0 : -1.0);
    const double speed = Uniform(0.5, 1.2);
    const double push_hz = Uniform(0.7, 1.2);
    const double turn = Uniform(45.0, 150.0) * kDeg * (Pick(2) == 0 ? 1.0 : -1.0);
    const Vec3 heading(std::sin(yaw0), 0.0, std::cos(yaw0));

    MotionSequence seq;
    seq.frame_rate = cfg.frame_rate;
    seq.subject = "synthetic";
    seq.tag = std::string(category);
    seq.frames.reserve(static_cast<std::size_t>(count));

    for (int k = 0; k < count; ++k) {
      const double t = static_cast<double>(k) * dt;
      Frame f;
      f.yaw = yaw0;
      auto raise_arms = [&](double scale) {
        const double e = scale * elevation * Bump(t, t0, t1, t2, t3);
        if (side != 1) f.shoulder_extra[0] = ArmRaise(0, azimuth, e);
        if (side != 0) f.shoulder_extra[1] = ArmRaise(1, azimuth, e);
        f.elbow_flex = {30.0 * kDeg * (1.0 - 0.7 * Bump(t, t0, t1, t2, t3)),
                        30.0 * kDeg * (1.0 - 0.7 * Bump(t, t0, t1, t2, t3))};
      };
      // Propulsion stroke: both arms swing forward and back at push_hz.
      auto push_arms = [&](double left_gain, double right_gain) {
        const double ramp = MinJerk(t / 0.5);
        const double phase = std::sin(2.0 * std::numbers::pi * push_hz * t);
        f.shoulder_extra[0] = ArmRaise(0, 90.0 * kDeg, ramp * left_gain * (25.0 + 20.0 * phase) * kDeg);
        f.shoulder_extra[1] = ArmRaise(1, 90.0 * kDeg, ramp * right_gain * (25.0 + 20.0 * phase) * kDeg);
        f.elbow_flex = {(45.0 - 20.0 * phase) * kDeg, (45.0 - 20.0 * phase) * kDeg};
      };
      // Distance covered under a surging forward speed.
      auto travelled = [&](double tt) {
        const double w = 2.0 * std::numbers::pi * push_hz;
        return speed * (tt + 0.3 * (1.0 - std::cos(w * tt)) / w);
      };

      if (category == "arm") {
        raise_arms(1.0);
      } else if (category == "upper_body") {
        const double b = Bump(t, t0, t1, t2, t3);
        f.torso_axis = torso_mode == 0 ? Vec3::UnitX() : torso_mode == 1 ? Vec3::UnitZ() : Vec3::UnitY();
        f.torso_angle = torso_amp * b;
      } else if (category == "translation") {
        f.root = heading * travelled(t);
        push_arms(1.0, 1.0);
        f.torso_axis = Vec3::UnitX();
        f.torso_angle = 6.0 * kDeg * std::sin(2.0 * std::numbers::pi * push_hz * t);
      } else if (category == "rotation") {
        f.yaw = yaw0 + turn * MinJerk((t - t0) / (t3 - t0));
        push_arms(turn > 0 ? 0.4 : 1.0, turn > 0 ? 1.0 : 0.4);
      } else {  // combined
        f.root = heading * travelled(t);
        f.yaw = yaw0 + 0.5 * turn * MinJerk((t - t0) / (t3 - t0));
        push_arms(1.0, 1.0);
        const double e = elevation * Bump(t, t0, t1, t2, t3);
        if (side == 0) f.shoulder_extra[0] = ArmRaise(0, azimuth, e);
        if (side == 1) f.shoulder_extra[1] = ArmRaise(1, azimuth, e);
        f.torso_axis = Vec3::UnitZ();
        f.torso_angle = 0.5 * torso_amp * Bump(t, t0, t1, t2, t3);
      }
      seq.frames.push_back(Assemble(model_, j_, f));
    }
    return seq;
  }

 private:
  const KinematicModel& model_;
  Joints j_;
  std::mt19937_64 rng_;
};

}  // namespace corpus_detail

inline bool IsMotionCategory(std::string_view tag) {
  for (auto c : kMotionCategories) {
    if (c == tag) return true;
  }
  return false;
}

// Deterministic for a given seed; sequences are ordered by category, then
// by index within the category.
inline std::vector<MotionSequence> GenerateSyntheticCorpus(const KinematicModel& model,
                                                           const CorpusConfig& cfg,
                                                           std::uint64_t seed) {
  for (const auto& c : cfg.categories) {
    if (!IsMotionCategory(c)) throw Error(ErrorKind::kConfigError, "unknown motion category '" + c + "'");
  }
  if (cfg.sequences_per_category < 0 || !(cfg.duration_s > 0.0) || !(cfg.frame_rate > 0.0)) {
    throw Error(ErrorKind::kConfigError, "invalid corpus configuration");
  }
  corpus_detail::Generator gen(model, seed);
  std::vector<MotionSequence> out;
  for (const auto& c : cfg.categories) {
    for (int i = 0; i < cfg.sequences_per_category; ++i) {
      out.push_back(gen.Make(c, cfg));
      out.back().subject = "synthetic_" + c + "_" + std::to_string(i);
    }
  }
  return out;
}

}  // namespace sitpose

#endif  // SITPOSE_CORPUS_HPP_
