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

// Point-mass articulated dynamics in the pelvis-relative frame.
//
// Each joint carries its segment mass spread evenly over its proxy vertices.
// Actuated joints are parameterized by axis-angle vectors of their local
// rotations; the root optionally gets a six-dof floating base (translation,
// then rotation) evaluated at the zero configuration with zero velocity.
// Joints that are neither actuated nor the root keep a fixed rotation.

#ifndef SITPOSE_DYNAMICS_HPP_
#define SITPOSE_DYNAMICS_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "sitpose/body_model.hpp"
#include "sitpose/error.hpp"
#include "sitpose/rotation.hpp"

namespace sitpose {

inline const Vec3 kStandardGravity(0.0, -9.81, 0.0);

// Segment masses in kg keyed by joint name.
struct MassConfig {
  std::map<std::string, double> segment_mass;
  double default_mass = 1.0;
  double armature = 0.0;  // added to the diagonal of actuated joint rows

  // Rough adult segment fractions of a 75 kg body; the lower body is lumped
  // onto the hip, knee, ankle and foot joints.
  static MassConfig Anthropometric() {
    MassConfig m;
    m.segment_mass = {
        {"pelvis", 8.0},         {"spine1", 4.0},         {"spine2", 4.5},        {"spine3", 6.0},
        {"neck", 1.2},           {"head", 5.0},           {"left_collar", 1.5},   {"right_collar", 1.5},
        {"left_shoulder", 2.1},  {"right_shoulder", 2.1}, {"left_elbow", 1.2},    {"right_elbow", 1.2},
        {"left_wrist", 0.4},     {"right_wrist", 0.4},    {"left_hand", 0.1},     {"right_hand", 0.1},
        {"left_hip", 7.5},       {"right_hip", 7.5},      {"left_knee", 3.5},     {"right_knee", 3.5},
        {"left_ankle", 1.0},     {"right_ankle", 1.0},    {"left_foot", 0.3},     {"right_foot", 0.3},
    };
    return m;
  }

  double MassOf(const std::string& joint) const {
    const auto it = segment_mass.find(joint);
    return it == segment_mass.end() ? default_mass : it->second;
  }

  MassConfig Scaled(double k) const {
    MassConfig m = *this;
    for (auto& [name, v] : m.segment_mass) v *= k;
    m.default_mass *= k;
    m.armature *= k;
    return m;
  }
};

struct DynamicsOptions {
  bool floating_base = true;
  Vec3 gravity = kStandardGravity;  // expressed in the optimization frame
  std::vector<std::string> contacts = {"left_hip", "right_hip", "left_foot", "right_foot"};
  bool require_positive_definite = true;
};

// Which joints are actuated and where their three dofs live.
struct DofMap {
  std::vector<int> joints;  // actuated joints, topological order
  std::vector<int> slot;    // per model joint: index into `joints`, or -1
  int base_dofs = 0;

  int ActuatedDofs() const { return 3 * static_cast<int>(joints.size()); }
  int TotalDofs() const { return base_dofs + ActuatedDofs(); }
  int Column(int joint) const { return base_dofs + 3 * slot[static_cast<std::size_t>(joint)]; }

  static DofMap Make(const KinematicModel& model, const std::vector<int>& actuated, bool floating_base) {
    DofMap d;
    d.base_dofs = floating_base ? 6 : 0;
    d.slot.assign(static_cast<std::size_t>(model.JointCount()), -1);
    std::vector<int> sorted = actuated;
    std::sort(sorted.begin(), sorted.end());
    for (int j : sorted) {
      if (j <= 0 || j >= model.JointCount()) {
        throw Error(ErrorKind::kConfigError, "actuated joints must be non-root joints of the model");
      }
      if (d.slot[static_cast<std::size_t>(j)] >= 0) throw Error(ErrorKind::kConfigError, "duplicate actuated joint");
      d.slot[static_cast<std::size_t>(j)] = static_cast<int>(d.joints.size());
      d.joints.push_back(j);
    }
    return d;
  }

  // Upper-body joints except the root.
  static DofMap UpperBody(const KinematicModel& model, bool floating_base = true) {
    std::vector<int> act;
    for (int j : model.upper_body()) {
      if (model.parent(j) >= 0) act.push_back(j);
    }
    return Make(model, act, floating_base);
  }
};

struct Dynamics {
  Eigen::MatrixXd M;   // n x n
  Eigen::VectorXd h;   // velocity-product and gravity terms
  Eigen::MatrixXd Jc;  // 3 * contacts x n, contact point accelerations
  Eigen::VectorXd bc;  // contact acceleration bias, Jc qdd + bc = accel
  DofMap dofs;

  // Torque selection: rows of the equation of motion driven by joint torques.
  Eigen::MatrixXd Selection() const {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dofs.TotalDofs(), dofs.ActuatedDofs());
    s.bottomRows(dofs.ActuatedDofs()).setIdentity();
    return s;
  }
};

namespace dynamics_detail {

struct Kinematics {
  std::vector<Mat3> rot;    // global joint rotations
  std::vector<Vec3> pos;    // global joint positions
  std::vector<Vec3> omega;  // global angular velocities
  std::vector<Vec3> vel;    // joint position velocities
  std::vector<Mat3> a;      // per actuated joint: R_parent * J_l(phi)
  std::vector<Vec3> rel;    // per actuated joint: a * phidot
  std::vector<Vec3> kappa;  // per actuated joint: bias part of d/dt rel
};

inline Kinematics Propagate(const KinematicModel& model, const std::vector<Mat3>& fixed_local,
                            const DofMap& dofs, const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_dot) {
  const auto n = static_cast<std::size_t>(model.JointCount());
  Kinematics k;
  k.rot.resize(n);
  k.pos.resize(n);
  k.omega.resize(n);
  k.vel.resize(n);
  k.a.assign(dofs.joints.size(), Mat3::Zero());
  k.rel.assign(dofs.joints.size(), Vec3::Zero());
  k.kappa.assign(dofs.joints.size(), Vec3::Zero());
  for (std::size_t j = 0; j < n; ++j) {
    const int p = model.parent(static_cast<int>(j));
    if (p < 0) {
      k.rot[j] = Mat3::Identity();
      k.pos[j] = Vec3::Zero();
      k.omega[j] = Vec3::Zero();
      k.vel[j] = Vec3::Zero();
      continue;
    }
    const auto pj = static_cast<std::size_t>(p);
    k.pos[j] = k.pos[pj] + k.rot[pj] * model.joint(static_cast<int>(j)).offset;
    k.vel[j] = k.vel[pj] + k.omega[pj].cross(k.pos[j] - k.pos[pj]);
    const int s = dofs.slot[j];
    if (s < 0) {
      k.rot[j] = k.rot[pj] * fixed_local[j];
      k.omega[j] = k.omega[pj];
      continue;
    }
    const auto us = static_cast<std::size_t>(s);
    const Vec3 phi = theta.segment<3>(3 * s);
    const Vec3 phid = theta_dot.segment<3>(3 * s);
    k.rot[j] = k.rot[pj] * ExpMap(phi);
    k.a[us] = k.rot[pj] * LeftJacobian(phi);
    k.rel[us] = k.a[us] * phid;
    k.kappa[us] = k.omega[pj].cross(k.rel[us]) + k.rot[pj] * (LeftJacobianDot(phi, phid) * phid);
    k.omega[j] = k.omega[pj] + k.rel[us];
  }
  return k;
}

// Jacobian (3 x n) and acceleration bias of a point rigidly attached to
// joint `j` at global position x.
inline void PointJacobian(const KinematicModel& model, const DofMap& dofs, const Kinematics& k, int j,
                          const Vec3& x, Eigen::Ref<Eigen::MatrixXd> jac, Vec3& bias) {
  jac.setZero();
  bias.setZero();
  const Vec3 vx = k.vel[static_cast<std::size_t>(j)] + k.omega[static_cast<std::size_t>(j)].cross(
                                                           x - k.pos[static_cast<std::size_t>(j)]);
  for (int c = j; c >= 0; c = model.parent(c)) {
    const auto uc = static_cast<std::size_t>(c);
    const int s = dofs.slot[uc];
    if (s >= 0) {
      const auto us = static_cast<std::size_t>(s);
      const Vec3 r = x - k.pos[uc];
      jac.middleCols(dofs.base_dofs + 3 * s, 3) = -Skew(r) * k.a[us];
      bias += k.kappa[us].cross(r) + k.rel[us].cross(vx - k.vel[uc]);
    } else if (model.parent(c) < 0 && dofs.base_dofs == 6) {
      jac.leftCols(3).setIdentity();
      jac.middleCols(3, 3) = -Skew(x - k.pos[uc]);
    }
  }
}

}  // namespace dynamics_detail

// Global joint positions (pelvis-relative) of a configuration.
inline std::vector<Vec3> DofPositions(const KinematicModel& model, const std::vector<Mat3>& fixed_local,
                                      const DofMap& dofs, const Eigen::VectorXd& theta) {
  return dynamics_detail::Propagate(model, fixed_local, dofs, theta, Eigen::VectorXd::Zero(theta.size())).pos;
}

// Mass points of the model: global position, owning joint and mass.
struct MassPoint {
  int joint;
  Vec3 x;
  double m;
};

inline std::vector<MassPoint> MassPoints(const KinematicModel& model, const std::vector<Mat3>& rot,
                                         const std::vector<Vec3>& pos, const MassConfig& mass) {
  std::vector<int> count(static_cast<std::size_t>(model.JointCount()), 0);
  for (const auto& v : model.proxy_vertices()) ++count[static_cast<std::size_t>(v.joint)];
  std::vector<MassPoint> out;
  for (int j = 0; j < model.JointCount(); ++j) {
    const double m = mass.MassOf(model.joint(j).name);
    if (!(m > 0.0)) {
      throw Error(ErrorKind::kSingularMassMatrix, "segment '" + model.joint(j).name + "' has non-positive mass");
    }
    if (count[static_cast<std::size_t>(j)] == 0) out.push_back({j, pos[static_cast<std::size_t>(j)], m});
  }
  for (const auto& v : model.proxy_vertices()) {
    const auto j = static_cast<std::size_t>(v.joint);
    out.push_back({v.joint, pos[j] + rot[j] * v.offset, mass.MassOf(model.joint(v.joint).name) / count[j]});
  }
  return out;
}

// Equation of motion M qdd + h = S tau + Jc^T lambda at (theta, theta_dot).
// `fixed_local` holds local rotations of non-actuated, non-root joints.
inline Dynamics BuildDynamics(const KinematicModel& model, const DofMap& dofs, const std::vector<Mat3>& fixed_local,
                              const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_dot,
                              const MassConfig& mass, const DynamicsOptions& opts = {}) {
  const int na = dofs.ActuatedDofs();
  if (theta.size() != na || theta_dot.size() != na ||
      fixed_local.size() != static_cast<std::size_t>(model.JointCount())) {
    throw Error(ErrorKind::kShapeMismatch, "dynamics state does not match the actuated joint set");
  }
  if (!theta.allFinite() || !theta_dot.allFinite()) {
    throw Error(ErrorKind::kDegenerateInput, "dynamics state is not finite");
  }
  const int n = dofs.TotalDofs();
  const auto k = dynamics_detail::Propagate(model, fixed_local, dofs, theta, theta_dot);

  Dynamics d;
  d.dofs = dofs;
  d.M = Eigen::MatrixXd::Zero(n, n);
  d.h = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd jac(3, n);
  Vec3 bias;
  for (const auto& p : MassPoints(model, k.rot, k.pos, mass)) {
    dynamics_detail::PointJacobian(model, dofs, k, p.joint, p.x, jac, bias);
    d.M.noalias() += p.m * jac.transpose() * jac;
    d.h.noalias() += p.m * jac.transpose() * (bias - opts.gravity);
  }
  if (mass.armature > 0.0) d.M.diagonal().tail(na).array() += mass.armature;

  if (!d.M.allFinite() || !d.h.allFinite()) throw Error(ErrorKind::kSingularMassMatrix, "mass matrix is not finite");
  if (opts.require_positive_definite) {
    const Eigen::LLT<Eigen::MatrixXd> llt(d.M);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
      const auto diag = llt.matrixLLT().diagonal();
      ok = diag.minCoeff() > 1e-7 * diag.maxCoeff();
    }
    if (!ok) throw Error(ErrorKind::kSingularMassMatrix, "mass matrix is not positive definite");
  }

  const auto nc = static_cast<Eigen::Index>(opts.contacts.size());
  d.Jc.resize(3 * nc, n);
  d.bc.resize(3 * nc);
  for (Eigen::Index c = 0; c < nc; ++c) {
    const int j = model.RequireJoint(opts.contacts[static_cast<std::size_t>(c)]);
    dynamics_detail::PointJacobian(model, dofs, k, j, k.pos[static_cast<std::size_t>(j)], d.Jc.middleRows(3 * c, 3),
                                   bias);
    d.bc.segment<3>(3 * c) = bias;
  }
  return d;
}

}  // namespace sitpose

#endif  // SITPOSE_DYNAMICS_HPP_
