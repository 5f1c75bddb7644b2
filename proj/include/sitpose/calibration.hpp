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

// T-pose calibration: heading alignment of the sensor global frame and the
// per-sensor mounting offset relative to the attached bone.
//
//   R_model = R_heading * R_raw * R_offset,   a_model = R_heading * a_raw

#ifndef SITPOSE_CALIBRATION_HPP_
#define SITPOSE_CALIBRATION_HPP_

#include <array>
#include <istream>
#include <optional>
#include <ostream>
#include <string>

#include "sitpose/body_model.hpp"
#include "sitpose/error.hpp"
#include "sitpose/formats.hpp"
#include "sitpose/imu.hpp"

namespace sitpose {

struct CalibrationResult {
  std::array<Mat3, kSensorCount> offset;   // sensor -> bone
  std::array<Mat3, kSensorCount> heading;  // sensor global -> model global
  double timestamp = 0.0;

  CalibrationResult() {
    offset.fill(Mat3::Identity());
    heading.fill(Mat3::Identity());
  }
};

inline void CheckUnitOrientations(const ImuFrame& frame) {
  for (const auto& q : frame.orientation) {
    if (!q.coeffs().allFinite() || std::abs(q.norm() - 1.0) > 1e-6) {
      throw Error(ErrorKind::kNonOrthonormalInput, "sensor orientation is not a unit rotation");
    }
  }
}

// Bone orientations of the sensor attachment joints for a pose.
inline std::array<Mat3, kSensorCount> SensorBoneRotations(const KinematicModel& model, const Pose& pose) {
  const FkResult fk = ForwardKinematics(model, pose);
  std::array<Mat3, kSensorCount> out;
  for (std::size_t s = 0; s < kSensorCount; ++s) {
    out[s] = fk.rotations[static_cast<std::size_t>(model.sensors()[s].joint)];
  }
  return out;
}

// Without an explicit heading, the pelvis/chair sensor is taken to be
// mounted aligned with its bone and defines the heading for all sensors.
inline CalibrationResult ComputeCalibration(const ImuFrame& cal_frame, const Pose& reference_pose,
                                            const KinematicModel& model,
                                            const std::optional<Mat3>& heading = std::nullopt) {
  CheckUnitOrientations(cal_frame);
  if (heading && !IsRotationMatrix(*heading, 1e-6)) {
    throw Error(ErrorKind::kNonOrthonormalInput, "heading is not a rotation");
  }
  const auto bone = SensorBoneRotations(model, reference_pose);
  const auto pelvis = static_cast<std::size_t>(SensorId::kPelvisOrChair);
  const Mat3 h = heading ? *heading : Mat3(bone[pelvis] * cal_frame.rotation(SensorId::kPelvisOrChair).transpose());
  CalibrationResult cal;
  cal.timestamp = cal_frame.timestamp;
  for (std::size_t s = 0; s < kSensorCount; ++s) {
    const Mat3 raw = cal_frame.rotation(static_cast<SensorId>(s));
    cal.heading[s] = h;
    cal.offset[s] = (h * raw).transpose() * bone[s];
  }
  return cal;
}

inline ImuFrame ApplyCalibration(const CalibrationResult& cal, const ImuFrame& frame) {
  ImuFrame out;
  out.timestamp = frame.timestamp;
  for (std::size_t s = 0; s < kSensorCount; ++s) {
    const Mat3 r = cal.heading[s] * frame.rotation(static_cast<SensorId>(s)) * cal.offset[s];
    out.orientation[s] = MatrixToQuaternion(r);
    out.acceleration[s] = cal.heading[s] * frame.acceleration[s];
  }
  return out;
}

inline ImuSequence ApplyCalibration(const CalibrationResult& cal, const ImuSequence& seq) {
  ImuSequence out = seq;
  for (auto& f : out.frames) f = ApplyCalibration(cal, f);
  return out;
}

// Left-composes an additional heading rotation; offsets are unchanged.
inline CalibrationResult Reheaded(const CalibrationResult& cal, const Mat3& extra) {
  CalibrationResult out = cal;
  for (auto& h : out.heading) h = extra * h;
  return out;
}

// Drift correction: re-derive the heading from one frame with known bone
// orientations, keeping the mounting offsets.
inline CalibrationResult RecalibrateHeading(const CalibrationResult& cal, const ImuFrame& frame,
                                            const std::array<Mat3, kSensorCount>& bone_rotations) {
  CheckUnitOrientations(frame);
  const auto pelvis = static_cast<std::size_t>(SensorId::kPelvisOrChair);
  const Mat3 h = bone_rotations[pelvis] *
                 (frame.rotation(SensorId::kPelvisOrChair) * cal.offset[pelvis]).transpose();
  CalibrationResult out = cal;
  out.heading.fill(h);
  out.timestamp = frame.timestamp;
  return out;
}

inline void WriteCalibration(std::ostream& out, const CalibrationResult& cal) {
  out << "sitpose-calibration v1\ntimestamp ";
  WriteNumber(out, cal.timestamp);
  out << '\n';
  for (std::size_t s = 0; s < kSensorCount; ++s) {
    out << "sensor " << kSensorNames[s] << " heading";
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        out << ' ';
        WriteNumber(out, cal.heading[s](i, j));
      }
    out << " offset";
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        out << ' ';
        WriteNumber(out, cal.offset[s](i, j));
      }
    out << '\n';
  }
}

inline CalibrationResult ReadCalibration(std::istream& in) {
  formats_detail::LineReader r(in, "calibration");
  auto head = r.Next();
  if (head.size() != 2 || head[0] != "sitpose-calibration" || head[1] != "v1") {
    r.Fail("expected 'sitpose-calibration v1'");
  }
  CalibrationResult cal;
  cal.timestamp = r.Number(r.Expect("timestamp", 2)[1]);
  for (std::size_t s = 0; s < kSensorCount; ++s) {
    auto t = r.Expect("sensor", 22);
    if (t.size() != 22 || t[1] != kSensorNames[s] || t[2] != "heading" || t[12] != "offset") {
      r.Fail("malformed sensor record");
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        cal.heading[s](i, j) = r.Number(t[static_cast<std::size_t>(3 + 3 * i + j)]);
        cal.offset[s](i, j) = r.Number(t[static_cast<std::size_t>(13 + 3 * i + j)]);
      }
    if (!IsRotationMatrix(cal.heading[s], 1e-6) || !IsRotationMatrix(cal.offset[s], 1e-6)) {
      throw Error(ErrorKind::kNonOrthonormalInput, "calibration record holds a non-rotation");
    }
  }
  return cal;
}

}  // namespace sitpose

#endif  // SITPOSE_CALIBRATION_HPP_
