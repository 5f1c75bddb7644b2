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

// Line-oriented text formats for motion and IMU recordings.
//
// Numbers are written as the shortest decimal that parses back to the same
// double, so writing, reading and writing again is byte-stable.
//
// Motion file (pose per line):
//   sitpose-motion v1
//   frame_rate <hz>
//   first_frame <int>
//   subject <token>
//   tag <category|->
//   joints <count> <name>...
//   frames <count>
//   <root x y z> then <w x y z> per joint, one frame per line
//
// IMU file:
//   sitpose-imu v1
//   frame_rate <hz>
//   first_frame <int>
//   sensors pelvis_or_chair left_forearm right_forearm head
//   frames <count>
//   <timestamp> then per sensor <ax ay az qw qx qy qz>

#ifndef SITPOSE_FORMATS_HPP_
#define SITPOSE_FORMATS_HPP_

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "sitpose/body_model.hpp"
#include "sitpose/error.hpp"
#include "sitpose/imu.hpp"

namespace sitpose {

inline void WriteNumber(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

namespace formats_detail {

class LineReader {
 public:
  LineReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  std::vector<std::string_view> Next() {
    while (std::getline(in_, line_)) {
      ++line_no_;
      if (line_.empty() || line_[0] == '#') continue;
      return Split(line_);
    }
    Fail("unexpected end of file");
  }

  bool AtEnd() {
    while (true) {
      const int c = in_.peek();
      if (c == EOF) return true;
      if (c == '\n' || c == '\r' || c == ' ') {
        in_.get();
        continue;
      }
      return false;
    }
  }

  [[noreturn]] void Fail(const std::string& msg) const {
    throw Error(ErrorKind::kParseError,
                what_ + " line " + std::to_string(line_no_) + ": " + msg);
  }

  double Number(std::string_view tok) const {
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      Fail("bad number '" + std::string(tok) + "'");
    }
    return v;
  }

  long Integer(std::string_view tok) const {
    long v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      Fail("bad integer '" + std::string(tok) + "'");
    }
    return v;
  }

  std::vector<std::string_view> Expect(std::string_view key, std::size_t min_tokens) {
    auto toks = Next();
    if (toks.empty() || toks[0] != key) Fail("expected '" + std::string(key) + "'");
    if (toks.size() < min_tokens) Fail("too few fields for '" + std::string(key) + "'");
    return toks;
  }

 private:
  static std::vector<std::string_view> Split(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
      std::size_t j = i;
      while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
      if (j > i) out.push_back(s.substr(i, j - i));
      i = j;
    }
    return out;
  }

  std::istream& in_;
  std::string what_;
  std::string line_;
  int line_no_ = 0;
};

inline void WriteQuat(std::ostream& out, const Quat& q) {
  for (double v : {q.w(), q.x(), q.y(), q.z()}) {
    out << ' ';
    WriteNumber(out, v);
  }
}

}  // namespace formats_detail

// Body line of a motion record: root position then one quaternion per joint.
inline void WritePoseLine(std::ostream& out, const Pose& pose) {
  WriteNumber(out, pose.root_position.x());
  out << ' ';
  WriteNumber(out, pose.root_position.y());
  out << ' ';
  WriteNumber(out, pose.root_position.z());
  for (const auto& r : pose.local_rotations) formats_detail::WriteQuat(out, r.quaternion());
}

inline void WriteMotion(std::ostream& out, const KinematicModel& model, const MotionSequence& seq) {
  out << "sitpose-motion v1\nframe_rate ";
  WriteNumber(out, seq.frame_rate);
  out << "\nfirst_frame " << seq.first_frame << "\nsubject " << (seq.subject.empty() ? "-" : seq.subject)
      << "\ntag " << (seq.tag.empty() ? "-" : seq.tag) << "\njoints " << model.JointCount();
  for (const auto& j : model.joints()) out << ' ' << j.name;
  out << "\nframes " << seq.frames.size() << '\n';
  for (const auto& pose : seq.frames) {
    WritePoseLine(out, pose);
    out << '\n';
  }
}

inline MotionSequence ReadMotion(std::istream& in, const KinematicModel& model) {
  formats_detail::LineReader r(in, "motion");
  auto head = r.Next();
  if (head.size() != 2 || head[0] != "sitpose-motion" || head[1] != "v1") {
    r.Fail("expected 'sitpose-motion v1'");
  }
  MotionSequence seq;
  seq.frame_rate = r.Number(r.Expect("frame_rate", 2)[1]);
  if (!(seq.frame_rate > 0.0)) r.Fail("frame_rate must be positive");
  seq.first_frame = static_cast<int>(r.Integer(r.Expect("first_frame", 2)[1]));
  seq.subject = std::string(r.Expect("subject", 2)[1]);
  if (seq.subject == "-") seq.subject.clear();
  seq.tag = std::string(r.Expect("tag", 2)[1]);
  if (seq.tag == "-") seq.tag.clear();
  auto joints = r.Expect("joints", 2);
  const long n = r.Integer(joints[1]);
  if (n != model.JointCount() || joints.size() != static_cast<std::size_t>(n) + 2) {
    r.Fail("joint list does not match the skeleton");
  }
  for (long j = 0; j < n; ++j) {
    if (joints[static_cast<std::size_t>(j) + 2] != model.joint(static_cast<int>(j)).name) {
      r.Fail("joint order does not match the skeleton");
    }
  }
  const long frames = r.Integer(r.Expect("frames", 2)[1]);
  if (frames < 0) r.Fail("negative frame count");
  const std::size_t expected = 3 + 4 * static_cast<std::size_t>(n);
  seq.frames.reserve(static_cast<std::size_t>(frames));
  for (long f = 0; f < frames; ++f) {
    auto toks = r.Next();
    if (toks.size() != expected) r.Fail("pose line has wrong field count");
    Pose p;
    p.root_position = Vec3(r.Number(toks[0]), r.Number(toks[1]), r.Number(toks[2]));
    p.local_rotations.reserve(static_cast<std::size_t>(n));
    for (long j = 0; j < n; ++j) {
      const std::size_t o = 3 + 4 * static_cast<std::size_t>(j);
      const Quat q(r.Number(toks[o]), r.Number(toks[o + 1]), r.Number(toks[o + 2]),
                   r.Number(toks[o + 3]));
      if (std::abs(q.norm() - 1.0) > 1e-6) r.Fail("non-unit quaternion");
      p.local_rotations.push_back(Rotation::FromQuaternion(q));
    }
    seq.frames.push_back(std::move(p));
  }
  if (!r.AtEnd()) r.Fail("trailing data after the declared frames");
  return seq;
}

inline void WriteImu(std::ostream& out, const ImuSequence& seq) {
  out << "sitpose-imu v1\nframe_rate ";
  WriteNumber(out, seq.frame_rate);
  out << "\nfirst_frame " << seq.first_frame << "\nsensors";
  for (auto n : kSensorNames) out << ' ' << n;
  out << "\nframes " << seq.frames.size() << '\n';
  for (const auto& f : seq.frames) {
    WriteNumber(out, f.timestamp);
    for (std::size_t s = 0; s < kSensorCount; ++s) {
      for (int k = 0; k < 3; ++k) {
        out << ' ';
        WriteNumber(out, f.acceleration[s](k));
      }
      formats_detail::WriteQuat(out, f.orientation[s]);
    }
    out << '\n';
  }
}

inline ImuSequence ReadImu(std::istream& in) {
  formats_detail::LineReader r(in, "imu");
  auto head = r.Next();
  if (head.size() != 2 || head[0] != "sitpose-imu" || head[1] != "v1") {
    r.Fail("expected 'sitpose-imu v1'");
  }
  ImuSequence seq;
  seq.frame_rate = r.Number(r.Expect("frame_rate", 2)[1]);
  if (!(seq.frame_rate > 0.0)) r.Fail("frame_rate must be positive");
  seq.first_frame = static_cast<int>(r.Integer(r.Expect("first_frame", 2)[1]));
  auto sensors = r.Expect("sensors", 1 + kSensorCount);
  for (std::size_t s = 0; s < kSensorCount; ++s) {
    if (sensors[s + 1] != kSensorNames[s]) r.Fail("unexpected sensor order");
  }
  const long frames = r.Integer(r.Expect("frames", 2)[1]);
  if (frames < 0) r.Fail("negative frame count");
  seq.frames.reserve(static_cast<std::size_t>(frames));
  for (long f = 0; f < frames; ++f) {
    auto toks = r.Next();
    if (toks.size() != 1 + 7 * kSensorCount) r.Fail("imu line has wrong field count");
    ImuFrame frame;
    frame.timestamp = r.Number(toks[0]);
    for (std::size_t s = 0; s < kSensorCount; ++s) {
      const std::size_t o = 1 + 7 * s;
      frame.acceleration[s] = Vec3(r.Number(toks[o]), r.Number(toks[o + 1]), r.Number(toks[o + 2]));
      frame.orientation[s] = Quat(r.Number(toks[o + 3]), r.Number(toks[o + 4]),
                                  r.Number(toks[o + 5]), r.Number(toks[o + 6]));
      if (std::abs(frame.orientation[s].norm() - 1.0) > 1e-6) r.Fail("non-unit quaternion");
    }
    seq.frames.push_back(frame);
  }
  if (!r.AtEnd()) r.Fail("trailing data after the declared frames");
  return seq;
}

inline std::ifstream OpenForRead(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream OpenForWrite(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIoError, "cannot open '" + path + "' for writing");
  return out;
}

inline void CheckWritten(std::ostream& out, const std::string& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::kIoError, "failed writing '" + path + "'");
}

inline MotionSequence LoadMotion(const std::string& path, const KinematicModel& model) {
  auto in = OpenForRead(path);
  return ReadMotion(in, model);
}

inline void SaveMotion(const std::string& path, const KinematicModel& model, const MotionSequence& seq) {
  auto out = OpenForWrite(path);
  WriteMotion(out, model, seq);
  CheckWritten(out, path);
}

inline ImuSequence LoadImu(const std::string& path) {
  auto in = OpenForRead(path);
  return ReadImu(in);
}

inline void SaveImu(const std::string& path, const ImuSequence& seq) {
  auto out = OpenForWrite(path);
  WriteImu(out, seq);
  CheckWritten(out, path);
}

inline KinematicModel LoadSkeleton(const std::string& path) {
  auto in = OpenForRead(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseSkeleton(ss.str());
}

}  // namespace sitpose

#endif  // SITPOSE_FORMATS_HPP_
