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

// Kinematic skeleton in the SMPL joint layout, forward kinematics, and the
// rigidly attached proxy vertex cloud that stands in for the body mesh.
//
// All joint frames coincide with the model frame in the rest pose (y up,
// x to the subject's left, z forward); offsets are in meters.

#ifndef SITPOSE_BODY_MODEL_HPP_
#define SITPOSE_BODY_MODEL_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sitpose/error.hpp"
#include "sitpose/rotation.hpp"

namespace sitpose {

inline constexpr std::size_t kUpperBodyJointCount = 16;
inline constexpr std::size_t kSensorCount = 4;

enum class SensorId : std::size_t {
  kPelvisOrChair = 0,
  kLeftForearm = 1,
  kRightForearm = 2,
  kHead = 3,
};

inline constexpr std::array<std::string_view, kSensorCount> kSensorNames = {
    "pelvis_or_chair", "left_forearm", "right_forearm", "head"};

inline std::optional<SensorId> SensorFromName(std::string_view name) {
  for (std::size_t i = 0; i < kSensorCount; ++i) {
    if (kSensorNames[i] == name) return static_cast<SensorId>(i);
  }
  return std::nullopt;
}

struct JointRecord {
  std::string name;
  int parent = -1;  // -1 for the root
  Vec3 offset = Vec3::Zero();
};

struct PointAttachment {
  int joint = -1;
  Vec3 offset = Vec3::Zero();
};

class KinematicModel {
 public:
  int AddJoint(std::string name, std::string_view parent, const Vec3& offset) {
    int parent_index = -1;
    if (!parent.empty() && parent != "-") {
      parent_index = FindJoint(parent);
      if (parent_index < 0) {
        throw Error(ErrorKind::kConfigError, "unknown parent joint '" + std::string(parent) + "'");
      }
    } else if (!joints_.empty()) {
      throw Error(ErrorKind::kConfigError, "skeleton must have exactly one root");
    }
    if (FindJoint(name) >= 0) {
      throw Error(ErrorKind::kConfigError, "duplicate joint '" + name + "'");
    }
    if (joints_.empty() && parent_index >= 0) {
      throw Error(ErrorKind::kConfigError, "first joint must be the root");
    }
    joints_.push_back({std::move(name), parent_index, offset});
    return static_cast<int>(joints_.size()) - 1;
  }

  void SetUpperBody(const std::vector<std::string>& names) {
    std::vector<int> indices;
    for (const auto& n : names) indices.push_back(RequireJoint(n));
    upper_body_ = std::move(indices);
  }

  void SetSensor(SensorId id, std::string_view joint, const Vec3& offset) {
    sensors_[static_cast<std::size_t>(id)] = {RequireJoint(joint), offset};
  }

  void AddVertex(int joint, const Vec3& offset) {
    if (joint < 0 || joint >= JointCount()) {
      throw Error(ErrorKind::kConfigError, "vertex attached to unknown joint");
    }
    vertices_.push_back({joint, offset});
  }

  // Eight vertices per joint around its bone segment (the mean of its child
  // offsets, or its own direction for leaves); a box for compact joints.
  void GenerateProxyVertices(double radius, double leaf_length = 0.1);

  int FindJoint(std::string_view name) const {
    for (std::size_t i = 0; i < joints_.size(); ++i) {
      if (joints_[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }
  int RequireJoint(std::string_view name) const {
    const int j = FindJoint(name);
    if (j < 0) throw Error(ErrorKind::kConfigError, "unknown joint '" + std::string(name) + "'");
    return j;
  }

  int JointCount() const { return static_cast<int>(joints_.size()); }
  const std::vector<JointRecord>& joints() const { return joints_; }
  const JointRecord& joint(int j) const { return joints_[static_cast<std::size_t>(j)]; }
  int parent(int j) const { return joints_[static_cast<std::size_t>(j)].parent; }
  const std::vector<int>& upper_body() const { return upper_body_; }
  const std::array<PointAttachment, kSensorCount>& sensors() const { return sensors_; }
  const PointAttachment& sensor(SensorId id) const {
    return sensors_[static_cast<std::size_t>(id)];
  }
  const std::vector<PointAttachment>& proxy_vertices() const { return vertices_; }

  std::vector<int> Children(int j) const {
    std::vector<int> out;
    for (int k = 0; k < JointCount(); ++k) {
      if (parent(k) == j) out.push_back(k);
    }
    return out;
  }

  bool IsAncestorOrSelf(int ancestor, int j) const {
    for (int k = j; k >= 0; k = parent(k)) {
      if (k == ancestor) return true;
    }
    return false;
  }

  // Position of `j` in the upper-body list, or -1.
  int UpperBodySlot(int j) const {
    for (std::size_t s = 0; s < upper_body_.size(); ++s) {
      if (upper_body_[s] == j) return static_cast<int>(s);
    }
    return -1;
  }

  // Checks the invariants the estimation pipeline relies on.
  void ValidateComplete() const {
    if (joints_.empty()) throw Error(ErrorKind::kConfigError, "skeleton has no joints");
    if (upper_body_.size() != kUpperBodyJointCount) {
      throw Error(ErrorKind::kConfigError, "skeleton must list exactly 16 upper-body joints");
    }
    if (upper_body_.front() != 0) {
      throw Error(ErrorKind::kConfigError, "first upper-body joint must be the root");
    }
    for (const auto& s : sensors_) {
      if (s.joint < 0) throw Error(ErrorKind::kConfigError, "every sensor needs an attachment");
    }
  }

 private:
  std::vector<JointRecord> joints_;
  std::vector<int> upper_body_;
  std::array<PointAttachment, kSensorCount> sensors_{};
  std::vector<PointAttachment> vertices_;
};

inline void KinematicModel::GenerateProxyVertices(double radius, double leaf_length) {
  vertices_.clear();
  for (int j = 0; j < JointCount(); ++j) {
    const auto kids = Children(j);
    Vec3 seg = Vec3::Zero();
    if (!kids.empty()) {
      for (int k : kids) seg += joint(k).offset;
      seg /= static_cast<double>(kids.size());
    } else if (joint(j).offset.norm() > 1e-9) {
      seg = joint(j).offset.normalized() * leaf_length;
    }
    if (seg.norm() < 0.03) {
      for (int c = 0; c < 8; ++c) {
        const Vec3 corner((c & 1) ? radius : -radius, (c & 2) ? radius : -radius,
                          (c & 4) ? radius : -radius);
        vertices_.push_back({j, seg * 0.5 + corner});
      }
      continue;
    }
    const Vec3 dir = seg.normalized();
    const Vec3 helper = std::abs(dir.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitZ();
    const Vec3 u = dir.cross(helper).normalized();
    const Vec3 v = dir.cross(u);
    for (const double f : {0.25, 0.75}) {
      const Vec3 center = f * seg;
      vertices_.push_back({j, center + radius * u});
      vertices_.push_back({j, center - radius * u});
      vertices_.push_back({j, center + radius * v});
      vertices_.push_back({j, center - radius * v});
    }
  }
}

// Default skeleton: SMPL joint order with mean-shape rest offsets.
inline constexpr std::string_view kDefaultSkeletonText = R"(sitpose-skeleton v1
# joint <name> <parent|-> <offset x y z>   (meters, parent frame)
joint pelvis - 0 0 0
joint left_hip pelvis 0.058 -0.082 -0.018
joint right_hip pelvis -0.060 -0.091 -0.014
joint spine1 pelvis 0.004 0.124 -0.038
joint left_knee left_hip 0.043 -0.386 0.008
joint right_knee right_hip -0.043 -0.383 -0.005
joint spine2 spine1 0.004 0.138 0.027
joint left_ankle left_knee -0.015 -0.427 -0.037
joint right_ankle right_knee 0.019 -0.420 -0.035
joint spine3 spine2 -0.002 0.056 0.002
joint left_foot left_ankle 0.041 -0.060 0.122
joint right_foot right_ankle -0.035 -0.062 0.130
joint neck spine3 -0.013 0.212 -0.034
joint left_collar spine3 0.072 0.120 -0.019
joint right_collar spine3 -0.083 0.119 -0.023
joint head neck 0.010 0.089 0.050
joint left_shoulder left_collar 0.123 0.045 -0.019
joint right_shoulder right_collar -0.113 0.047 -0.008
joint left_elbow left_shoulder 0.255 -0.016 -0.023
joint right_elbow right_shoulder -0.260 -0.014 -0.031
joint left_wrist left_elbow 0.266 0.009 -0.003
joint right_wrist right_elbow -0.269 0.007 -0.006
joint left_hand left_wrist 0.087 -0.009 -0.011
joint right_hand right_wrist -0.089 -0.009 -0.009
# The 16 predicted joints; the root must come first.
upper pelvis spine1 spine2 spine3 neck head left_collar right_collar left_shoulder right_shoulder left_elbow right_elbow left_wrist right_wrist left_hand right_hand
# sensor <id> <joint> <offset x y z>
sensor pelvis_or_chair pelvis 0 0.02 -0.12
sensor left_forearm left_elbow 0.20 0 0.03
sensor right_forearm right_elbow -0.20 0 0.03
sensor head head 0 0.10 0.02
proxy_radius 0.05
)";

inline KinematicModel ParseSkeleton(std::string_view text) {
  KinematicModel model;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::optional<double> proxy_radius;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::kConfigError,
                "skeleton line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (!header_seen) {
      std::string version;
      ls >> version;
      if (key != "sitpose-skeleton" || version != "v1") fail("expected 'sitpose-skeleton v1'");
      header_seen = true;
      continue;
    }
    if (key == "joint") {
      std::string name, parent;
      Vec3 off;
      if (!(ls >> name >> parent >> off.x() >> off.y() >> off.z())) fail("malformed joint");
      model.AddJoint(name, parent, off);
    } else if (key == "upper") {
      std::vector<std::string> names;
      for (std::string n; ls >> n;) names.push_back(n);
      model.SetUpperBody(names);
    } else if (key == "sensor") {
      std::string id, joint;
      Vec3 off;
      if (!(ls >> id >> joint >> off.x() >> off.y() >> off.z())) fail("malformed sensor");
      const auto sid = SensorFromName(id);
      if (!sid) fail("unknown sensor '" + id + "'");
      model.SetSensor(*sid, joint, off);
    } else if (key == "vertex") {
      std::string joint;
      Vec3 off;
      if (!(ls >> joint >> off.x() >> off.y() >> off.z())) fail("malformed vertex");
      model.AddVertex(model.RequireJoint(joint), off);
    } else if (key == "proxy_radius") {
      double r = 0.0;
      if (!(ls >> r) || r <= 0.0) fail("malformed proxy_radius");
      proxy_radius = r;
    } else {
      fail("unknown record '" + key + "'");
    }
  }
  if (!header_seen) throw Error(ErrorKind::kConfigError, "empty skeleton definition");
  if (model.proxy_vertices().empty()) model.GenerateProxyVertices(proxy_radius.value_or(0.05));
  model.ValidateComplete();
  return model;
}

inline const KinematicModel& DefaultModel() {
  static const KinematicModel model = ParseSkeleton(kDefaultSkeletonText);
  return model;
}

struct Pose {
  std::vector<Rotation> local_rotations;
  Vec3 root_position = Vec3::Zero();

  static Pose Identity(const KinematicModel& model) {
    Pose p;
    p.local_rotations.assign(static_cast<std::size_t>(model.JointCount()), Rotation::Identity());
    return p;
  }
};

struct FkResult {
  std::vector<Mat3> rotations;  // global
  std::vector<Vec3> positions;  // global, meters
};

inline FkResult ForwardKinematics(const KinematicModel& model, const Pose& pose) {
  const auto n = static_cast<std::size_t>(model.JointCount());
  if (pose.local_rotations.size() != n) {
    throw Error(ErrorKind::kShapeMismatch, "pose joint count does not match the model");
  }
  FkResult fk;
  fk.rotations.resize(n);
  fk.positions.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const int p = model.parent(static_cast<int>(j));
    const Mat3& local = pose.local_rotations[j].matrix();
    if (p < 0) {
      fk.rotations[j] = local;
      fk.positions[j] = pose.root_position + model.joint(static_cast<int>(j)).offset;
    } else {
      const auto pj = static_cast<std::size_t>(p);
      fk.rotations[j] = fk.rotations[pj] * local;
      fk.positions[j] = fk.positions[pj] + fk.rotations[pj] * model.joint(static_cast<int>(j)).offset;
    }
  }
  return fk;
}

inline Vec3 AttachedPoint(const FkResult& fk, const PointAttachment& a) {
  const auto j = static_cast<std::size_t>(a.joint);
  return fk.positions[j] + fk.rotations[j] * a.offset;
}

inline std::vector<Vec3> ProxyMeshPositions(const KinematicModel& model, const FkResult& fk) {
  std::vector<Vec3> out;
  out.reserve(model.proxy_vertices().size());
  for (const auto& v : model.proxy_vertices()) out.push_back(AttachedPoint(fk, v));
  return out;
}

inline std::vector<Vec3> ProxyMeshPositions(const KinematicModel& model, const Pose& pose) {
  return ProxyMeshPositions(model, ForwardKinematics(model, pose));
}

// Indices into proxy_vertices() of vertices attached to upper-body joints.
inline std::vector<std::size_t> UpperBodyVertexIndices(const KinematicModel& model) {
  std::vector<std::size_t> out;
  const auto& verts = model.proxy_vertices();
  for (std::size_t i = 0; i < verts.size(); ++i) {
    if (model.UpperBodySlot(verts[i].joint) >= 0) out.push_back(i);
  }
  return out;
}

}  // namespace sitpose

#endif  // SITPOSE_BODY_MODEL_HPP_
