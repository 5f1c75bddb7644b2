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

// Physics-based refinement of kinematic pose estimates.
//
// Per frame, and per integration substep within it: PD reference
// accelerations toward the kinematic estimate, a QP that keeps the equation
// of motion and pins the seat contacts, and semi-implicit integration of the
// refined accelerations. The pelvis orientation is tracked by the same PD
// law on SO(3) and defines the direction of gravity in the pelvis frame.

#ifndef SITPOSE_REFINE_HPP_
#define SITPOSE_REFINE_HPP_

#include <Eigen/Core>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "sitpose/body_model.hpp"
#include "sitpose/dynamics.hpp"
#include "sitpose/error.hpp"
#include "sitpose/formats.hpp"
#include "sitpose/qp.hpp"
#include "sitpose/rotation.hpp"

namespace sitpose {

struct PdGains {
  double kp = 3600.0;
  double kd = 60.0;
};

struct DynamicsState {
  Eigen::VectorXd theta;      // axis-angle per actuated joint, rad
  Eigen::VectorXd theta_dot;  // rad/s
  double timestamp = 0.0;
};

inline Eigen::VectorXd PdReference(const DynamicsState& s, const Eigen::VectorXd& target, const PdGains& g) {
  if (target.size() != s.theta.size() || s.theta_dot.size() != s.theta.size()) {
    throw Error(ErrorKind::kShapeMismatch, "PD target does not match the state");
  }
  return g.kp * (target - s.theta) - g.kd * s.theta_dot;
}

// Semi-implicit Euler: velocity first, then position with the new velocity.
inline DynamicsState Integrate(const DynamicsState& s, const Eigen::VectorXd& theta_ddot, double dt) {
  DynamicsState out;
  out.theta_dot = s.theta_dot + theta_ddot * dt;
  out.theta = s.theta + out.theta_dot * dt;
  out.timestamp = s.timestamp + dt;
  return out;
}

struct RefineConfig {
  double frame_rate = 60.0;
  PdGains gains;
  int substeps = 8;
  MassConfig mass = MassConfig::Anthropometric();
  Vec3 gravity = kStandardGravity;  // model global frame
  std::vector<std::string> contacts = {"left_hip", "right_hip", "left_foot", "right_foot"};
  double torque_limit = 1000.0;   // N m, per component
  double force_weight = 1e-6;     // regularizes the contact forces
  QpOptions qp;

  void Validate() const {
    if (!(frame_rate > 0.0) || !(gains.kp > 0.0) || !(gains.kd > 0.0) || substeps < 1 || !(torque_limit > 0.0) ||
        !(force_weight > 0.0) || qp.max_iterations < 1 || !(qp.tolerance > 0.0)) {
      throw Error(ErrorKind::kConfigError, "invalid refinement configuration");
    }
  }
};

struct StepResult {
  Eigen::VectorXd qdd;     // all dofs, base first
  Eigen::VectorXd tau;     // actuated dofs
  Eigen::VectorXd lambda;  // 3 per contact
  double kkt = 0.0;
  double contact_accel = 0.0;
  double tracking = 0.0;   // 1/2 |qdd_joint - ref|^2
};

// Refinement QP over x = [qdd, tau, lambda].
inline QpProblem BuildRefinementQp(const Dynamics& d, const Eigen::VectorXd& qdd_ref, const RefineConfig& cfg) {
  const int n = d.dofs.TotalDofs();
  const int na = d.dofs.ActuatedDofs();
  const int nb = d.dofs.base_dofs;
  const auto nl = d.Jc.rows();
  const auto nx = n + na + nl;
  QpProblem q;
  q.H = Eigen::MatrixXd::Zero(nx, nx);
  q.g = Eigen::VectorXd::Zero(nx);
  q.H.diagonal().segment(nb, na).setOnes();
  q.g.segment(nb, na) = -qdd_ref;
  q.H.diagonal().tail(nl).setConstant(cfg.force_weight);
  q.A = Eigen::MatrixXd::Zero(n + nl, nx);
  q.b.resize(n + nl);
  q.A.topLeftCorner(n, n) = d.M;
  q.A.block(0, n, n, na) = -d.Selection();
  q.A.block(0, n + na, n, nl) = -d.Jc.transpose();
  q.b.head(n) = -d.h;
  q.A.bottomLeftCorner(nl, n) = d.Jc;
  q.b.tail(nl) = -d.bc;
  const double inf = std::numeric_limits<double>::infinity();
  q.lower = Eigen::VectorXd::Constant(nx, -inf);
  q.upper = Eigen::VectorXd::Constant(nx, inf);
  q.lower.segment(n, na).setConstant(-cfg.torque_limit);
  q.upper.segment(n, na).setConstant(cfg.torque_limit);
  return q;
}

inline StepResult SolveRefinementStep(const Dynamics& d, const Eigen::VectorXd& qdd_ref, const RefineConfig& cfg) {
  const QpProblem q = BuildRefinementQp(d, qdd_ref, cfg);
  const QpSolution s = SolveQp(q, cfg.qp);
  const int n = d.dofs.TotalDofs();
  const int na = d.dofs.ActuatedDofs();
  StepResult r;
  r.qdd = s.x.head(n);
  r.tau = s.x.segment(n, na);
  r.lambda = s.x.tail(d.Jc.rows());
  r.kkt = s.kkt.Max();
  r.contact_accel = d.Jc.rows() ? (d.Jc * r.qdd + d.bc).lpNorm<Eigen::Infinity>() : 0.0;
  r.tracking = 0.5 * (r.qdd.segment(d.dofs.base_dofs, na) - qdd_ref).squaredNorm();
  return r;
}

struct RefinedSequence {
  std::vector<Pose> poses;
  std::vector<Eigen::VectorXd> torques;  // per frame, 3 per actuated joint, substep mean
  std::vector<Eigen::VectorXd> forces;   // per frame, contact forces of the last substep
  std::vector<int> fallback_frames;
  std::vector<int> torque_joints;        // model joint index per torque triple
  double max_kkt = 0.0;
  double max_contact_accel = 0.0;
};

// Sequential refiner; state carries across frames.
class Refiner {
 public:
  using Logger = std::function<void(const std::string&)>;

  Refiner(const KinematicModel& model, RefineConfig cfg, Logger log = {})
      : model_(model), cfg_(std::move(cfg)), log_(std::move(log)), dofs_(DofMap::UpperBody(model, true)) {
    cfg_.Validate();
    opts_.floating_base = true;
    opts_.contacts = cfg_.contacts;
    for (const auto& c : opts_.contacts) model_.RequireJoint(c);
  }

  const DofMap& dofs() const { return dofs_; }
  const DynamicsState& state() const { return state_; }
  const Mat3& pelvis() const { return pelvis_; }
  bool started() const { return started_; }

  struct FrameOutput {
    Pose pose;
    Eigen::VectorXd torque;
    Eigen::VectorXd force;
    bool fallback = false;
    double kkt = 0.0;
    double contact_accel = 0.0;
  };

  FrameOutput Step(const Pose& target, int frame_index) {
    const auto targets = Targets(target);
    if (!started_) Reset(target, targets);
    const double h = 1.0 / (cfg_.frame_rate * cfg_.substeps);
    FrameOutput out;
    out.torque = Eigen::VectorXd::Zero(dofs_.ActuatedDofs());
    const DynamicsState saved_state = state_;
    const Mat3 saved_pelvis = pelvis_;
    const Vec3 saved_omega = pelvis_omega_;
    try {
      for (int k = 0; k < cfg_.substeps; ++k) {
        const Eigen::VectorXd ref = PdReference(state_, targets, cfg_.gains);
        const Vec3 pelvis_err = LogMap(PelvisTarget(target) * pelvis_.transpose());
        const Vec3 pelvis_acc = cfg_.gains.kp * pelvis_err - cfg_.gains.kd * pelvis_omega_;
        opts_.gravity = pelvis_.transpose() * cfg_.gravity;
        const Dynamics d = BuildDynamics(model_, dofs_, FixedLocal(target), state_.theta, state_.theta_dot,
                                         cfg_.mass, opts_);
        const StepResult r = SolveRefinementStep(d, ref, cfg_);
        if (!(r.kkt < 1e-6)) {
          throw Error(ErrorKind::kMaxIterations, "QP solution KKT residual " + std::to_string(r.kkt));
        }
        out.kkt = std::max(out.kkt, r.kkt);
        out.contact_accel = std::max(out.contact_accel, r.contact_accel);
        out.torque += r.tau / cfg_.substeps;
        out.force = r.lambda;
        state_ = Integrate(state_, r.qdd.tail(dofs_.ActuatedDofs()), h);
        pelvis_omega_ += pelvis_acc * h;
        pelvis_ = ExpMap(pelvis_omega_ * h) * pelvis_;
      }
    } catch (const Error& e) {
      if (log_) log_("frame " + std::to_string(frame_index) + ": refinement failed (" + e.what() +
                     "), passing the kinematic estimate through");
      state_ = saved_state;
      pelvis_ = saved_pelvis;
      pelvis_omega_ = saved_omega;
      Reset(target, targets);
      out.pose = target;
      out.torque.setZero();
      out.force = Eigen::VectorXd::Zero(3 * static_cast<Eigen::Index>(cfg_.contacts.size()));
      out.fallback = true;
      return out;
    }
    out.pose = CurrentPose(target);
    return out;
  }

  Pose CurrentPose(const Pose& reference) const {
    Pose p = reference;
    p.local_rotations[0] = Rotation::FromMatrix(Orthonormalized(pelvis_));
    for (std::size_t s = 0; s < dofs_.joints.size(); ++s) {
      p.local_rotations[static_cast<std::size_t>(dofs_.joints[s])] =
          Rotation::FromMatrix(ExpMap(state_.theta.segment<3>(3 * static_cast<Eigen::Index>(s))));
    }
    return p;
  }

 private:
  static Mat3 Orthonormalized(const Mat3& r) {
    return QuaternionToMatrix(Quat(r).normalized());
  }

  Mat3 PelvisTarget(const Pose& target) const { return target.local_rotations[0].matrix(); }

  std::vector<Mat3> FixedLocal(const Pose& target) const {
    std::vector<Mat3> out;
    out.reserve(target.local_rotations.size());
    for (const auto& r : target.local_rotations) out.push_back(r.matrix());
    return out;
  }

  Eigen::VectorXd Targets(const Pose& target) const {
    if (target.local_rotations.size() != static_cast<std::size_t>(model_.JointCount())) {
      throw Error(ErrorKind::kShapeMismatch, "pose joint count does not match the model");
    }
    Eigen::VectorXd t(dofs_.ActuatedDofs());
    for (std::size_t s = 0; s < dofs_.joints.size(); ++s) {
      const auto seg = 3 * static_cast<Eigen::Index>(s);
      const Vec3 ref = started_ ? Vec3(state_.theta.segment<3>(seg)) : Vec3::Zero();
      t.segment<3>(seg) =
          NearestAxisAngle(target.local_rotations[static_cast<std::size_t>(dofs_.joints[s])].matrix(), ref);
    }
    return t;
  }

  void Reset(const Pose& target, const Eigen::VectorXd& targets) {
    state_.theta = targets;
    state_.theta_dot = Eigen::VectorXd::Zero(targets.size());
    pelvis_ = PelvisTarget(target);
    pelvis_omega_.setZero();
    started_ = true;
  }

  const KinematicModel& model_;
  RefineConfig cfg_;
  Logger log_;
  DofMap dofs_;
  DynamicsOptions opts_;
  DynamicsState state_;
  Mat3 pelvis_ = Mat3::Identity();
  Vec3 pelvis_omega_ = Vec3::Zero();
  bool started_ = false;
};

inline RefinedSequence RefineSequence(const KinematicModel& model, const std::vector<Pose>& poses,
                                      const RefineConfig& cfg, const Refiner::Logger& log = {}) {
  Refiner refiner(model, cfg, log);
  RefinedSequence out;
  out.torque_joints = refiner.dofs().joints;
  out.poses.reserve(poses.size());
  for (std::size_t f = 0; f < poses.size(); ++f) {
    auto step = refiner.Step(poses[f], static_cast<int>(f));
    if (step.fallback) out.fallback_frames.push_back(static_cast<int>(f));
    out.max_kkt = std::max(out.max_kkt, step.kkt);
    out.max_contact_accel = std::max(out.max_contact_accel, step.contact_accel);
    out.poses.push_back(std::move(step.pose));
    out.torques.push_back(std::move(step.torque));
    out.forces.push_back(std::move(step.force));
  }
  return out;
}

// frame,joint,tau_x,tau_y,tau_z
inline void WriteTorqueCsv(std::ostream& out, const KinematicModel& model, const RefinedSequence& seq,
                           int first_frame = 0) {
  out << "frame,joint,tau_x,tau_y,tau_z\n";
  for (std::size_t f = 0; f < seq.torques.size(); ++f) {
    for (std::size_t s = 0; s < seq.torque_joints.size(); ++s) {
      out << first_frame + static_cast<int>(f) << ',' << model.joint(seq.torque_joints[s]).name;
      for (int a = 0; a < 3; ++a) {
        out << ',';
        WriteNumber(out, seq.torques[f](static_cast<Eigen::Index>(3 * s) + a));
      }
      out << '\n';
    }
  }
}

}  // namespace sitpose

#endif  // SITPOSE_REFINE_HPP_
