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

// Evaluation metrics: joint angle, pelvis-aligned position and mesh errors,
// jitter (mean jerk), per-axis correlation and quaternion distance stats.

#ifndef SITPOSE_METRICS_HPP_
#define SITPOSE_METRICS_HPP_

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "sitpose/body_model.hpp"
#include "sitpose/corpus.hpp"
#include "sitpose/error.hpp"
#include "sitpose/formats.hpp"
#include "sitpose/rotation.hpp"

namespace sitpose {

inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Mean geodesic angle in degrees over the joints of one frame.
inline double AngularError(const std::vector<Mat3>& pred, const std::vector<Mat3>& gt) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw Error(ErrorKind::kLengthMismatch, "rotation sets differ in size");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) sum += GeodesicAngle(pred[j], gt[j]);
  return kRadToDeg * sum / static_cast<double>(pred.size());
}

inline std::vector<Mat3> UpperBodyGlobalRotations(const KinematicModel& model, const FkResult& fk) {
  std::vector<Mat3> out;
  for (int j : model.upper_body()) out.push_back(fk.rotations[static_cast<std::size_t>(j)]);
  return out;
}

// Mean distance in cm between matched points after moving both sets so that
// their pelvis (first) points coincide.
inline double AlignedDistanceCm(const std::vector<Vec3>& pred, const Vec3& pred_root, const std::vector<Vec3>& gt,
                                const Vec3& gt_root) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw Error(ErrorKind::kLengthMismatch, "point sets differ in size");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += ((pred[i] - pred_root) - (gt[i] - gt_root)).norm();
  return 100.0 * sum / static_cast<double>(pred.size());
}

inline std::vector<Vec3> SelectPositions(const FkResult& fk, const std::vector<int>& joints) {
  std::vector<Vec3> out;
  out.reserve(joints.size());
  for (int j : joints) out.push_back(fk.positions[static_cast<std::size_t>(j)]);
  return out;
}

inline double PositionError(const KinematicModel& model, const Pose& pred, const Pose& gt,
                            const std::vector<int>& joints) {
  const FkResult a = ForwardKinematics(model, pred);
  const FkResult b = ForwardKinematics(model, gt);
  return AlignedDistanceCm(SelectPositions(a, joints), a.positions[0], SelectPositions(b, joints), b.positions[0]);
}

inline double MeshError(const KinematicModel& model, const Pose& pred, const Pose& gt) {
  const FkResult a = ForwardKinematics(model, pred);
  const FkResult b = ForwardKinematics(model, gt);
  const auto va = ProxyMeshPositions(model, a);
  const auto vb = ProxyMeshPositions(model, b);
  std::vector<Vec3> pa, pb;
  for (std::size_t i : UpperBodyVertexIndices(model)) {
    pa.push_back(va[i]);
    pb.push_back(vb[i]);
  }
  return AlignedDistanceCm(pa, a.positions[0], pb, b.positions[0]);
}

// Per-frame mean jerk norm (backward third difference scaled by rate^3) for
// frames 3..T-1 of a point trajectory positions[frame][point].
inline std::vector<double> JerkPerFrame(const std::vector<std::vector<Vec3>>& positions, double frame_rate) {
  if (positions.size() < 4) {
    throw Error(ErrorKind::kSequenceTooShort, "jitter needs at least 4 frames");
  }
  const double k = frame_rate * frame_rate * frame_rate;
  std::vector<double> out;
  out.reserve(positions.size() - 3);
  for (std::size_t t = 3; t < positions.size(); ++t) {
    const auto& x0 = positions[t];
    const auto& x1 = positions[t - 1];
    const auto& x2 = positions[t - 2];
    const auto& x3 = positions[t - 3];
    if (x0.size() != x3.size() || x1.size() != x0.size() || x2.size() != x0.size() || x0.empty()) {
      throw Error(ErrorKind::kLengthMismatch, "trajectory point count changes over time");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) sum += (k * (x0[i] - 3.0 * x1[i] + 3.0 * x2[i] - x3[i])).norm();
    out.push_back(sum / static_cast<double>(x0.size()));
  }
  return out;
}

inline double Jitter(const std::vector<std::vector<Vec3>>& positions, double frame_rate) {
  const auto per = JerkPerFrame(positions, frame_rate);
  double sum = 0.0;
  for (double v : per) sum += v;
  return sum / static_cast<double>(per.size());
}

// Upper-body joint trajectories of a pose sequence, optionally pelvis-aligned.
inline std::vector<std::vector<Vec3>> UpperBodyTrajectory(const KinematicModel& model, const std::vector<Pose>& poses,
                                                          bool pelvis_aligned = true) {
  std::vector<std::vector<Vec3>> out;
  out.reserve(poses.size());
  for (const auto& p : poses) {
    const FkResult fk = ForwardKinematics(model, p);
    auto pts = SelectPositions(fk, model.upper_body());
    if (pelvis_aligned) {
      const Vec3 root = fk.positions[0];
      for (auto& x : pts) x -= root;
    }
    out.push_back(std::move(pts));
  }
  return out;
}

inline double PoseJitter(const KinematicModel& model, const std::vector<Pose>& poses, double frame_rate,
                         bool pelvis_aligned = true) {
  return Jitter(UpperBodyTrajectory(model, poses, pelvis_aligned), frame_rate);
}

// Pearson correlation per axis.
inline Vec3 CorrelationByAxis(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kLengthMismatch, "signals differ in length");
  if (a.size() < 2) throw Error(ErrorKind::kSequenceTooShort, "correlation needs at least 2 samples");
  const double n = static_cast<double>(a.size());
  Vec3 ma = Vec3::Zero(), mb = Vec3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  Vec3 sab = Vec3::Zero(), saa = Vec3::Zero(), sbb = Vec3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec3 da = a[i] - ma, db = b[i] - mb;
    sab += da.cwiseProduct(db);
    saa += da.cwiseProduct(da);
    sbb += db.cwiseProduct(db);
  }
  Vec3 r;
  for (int k = 0; k < 3; ++k) {
    if (!(saa(k) > 0.0) || !(sbb(k) > 0.0)) {
      throw Error(ErrorKind::kZeroVariance, "axis " + std::to_string(k) + " has zero variance");
    }
    r(k) = std::clamp(sab(k) / std::sqrt(saa(k) * sbb(k)), -1.0, 1.0);
  }
  return r;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

inline MeanStd Summarize(const std::vector<double>& v) {
  MeanStd s;
  s.count = v.size();
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(v.size()));
  return s;
}

inline MeanStd OrientationSimilarityStats(const std::vector<Quat>& a, const std::vector<Quat>& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kLengthMismatch, "orientation sequences differ in length");
  std::vector<double> d;
  d.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d.push_back(QuatDistance(a[i], b[i]));
  return Summarize(d);
}

// ---- Reports ----

inline constexpr std::array<const char*, 6> kReportColumns = {"Ang Err",  "Pos Err",       "Mesh Err",
                                                              "Jitter",   "Wrist Pos Err", "Elbow Pos Err"};

struct MetricSamples {
  std::vector<double> angle, position, mesh, jitter, wrist, elbow;

  void Append(const MetricSamples& o) {
    auto cat = [](std::vector<double>& a, const std::vector<double>& b) { a.insert(a.end(), b.begin(), b.end()); };
    cat(angle, o.angle);
    cat(position, o.position);
    cat(mesh, o.mesh);
    cat(jitter, o.jitter);
    cat(wrist, o.wrist);
    cat(elbow, o.elbow);
  }
};

struct ReportRow {
  std::string group;
  std::size_t frames = 0;
  std::array<MeanStd, 6> metric;  // degrees, cm, cm, m/s^3, cm, cm
};

struct EvalReport {
  ReportRow overall;
  std::vector<ReportRow> by_type;  // empty unless the sequences carry category tags
};

inline ReportRow MakeRow(std::string group, const MetricSamples& s) {
  ReportRow r;
  r.group = std::move(group);
  r.frames = s.angle.size();
  r.metric = {Summarize(s.angle), Summarize(s.position), Summarize(s.mesh),
              Summarize(s.jitter), Summarize(s.wrist),   Summarize(s.elbow)};
  return r;
}

struct EvalOptions {
  double frame_rate = 60.0;
  bool jitter_pelvis_aligned = true;
};

// Metric samples of one predicted sequence against its ground truth.
inline MetricSamples EvaluateSequence(const KinematicModel& model, const std::vector<Pose>& pred,
                                      const std::vector<Pose>& gt, const EvalOptions& opts = {}) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorKind::kLengthMismatch, "prediction has " + std::to_string(pred.size()) +
                                                " frames, ground truth " + std::to_string(gt.size()));
  }
  if (pred.empty()) throw Error(ErrorKind::kLengthMismatch, "nothing to evaluate");
  const std::vector<int> wrists = {model.RequireJoint("left_wrist"), model.RequireJoint("right_wrist")};
  const std::vector<int> elbows = {model.RequireJoint("left_elbow"), model.RequireJoint("right_elbow")};
  const auto mesh_idx = UpperBodyVertexIndices(model);
  MetricSamples s;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    const FkResult a = ForwardKinematics(model, pred[f]);
    const FkResult b = ForwardKinematics(model, gt[f]);
    s.angle.push_back(AngularError(UpperBodyGlobalRotations(model, a), UpperBodyGlobalRotations(model, b)));
    auto dist = [&](const std::vector<int>& joints) {
      return AlignedDistanceCm(SelectPositions(a, joints), a.positions[0], SelectPositions(b, joints), b.positions[0]);
    };
    s.position.push_back(dist(model.upper_body()));
    s.wrist.push_back(dist(wrists));
    s.elbow.push_back(dist(elbows));
    const auto va = ProxyMeshPositions(model, a);
    const auto vb = ProxyMeshPositions(model, b);
    std::vector<Vec3> pa, pb;
    pa.reserve(mesh_idx.size());
    pb.reserve(mesh_idx.size());
    for (std::size_t i : mesh_idx) {
      pa.push_back(va[i]);
      pb.push_back(vb[i]);
    }
    s.mesh.push_back(AlignedDistanceCm(pa, a.positions[0], pb, b.positions[0]));
  }
  if (pred.size() >= 4) {
    s.jitter = JerkPerFrame(UpperBodyTrajectory(model, pred, opts.jitter_pelvis_aligned), opts.frame_rate);
  }
  return s;
}

struct EvalItem {
  const std::vector<Pose>* pred;
  const std::vector<Pose>* gt;
  std::string tag;
};

inline EvalReport BuildReport(const KinematicModel& model, const std::vector<EvalItem>& items,
                              const EvalOptions& opts = {}) {
  MetricSamples all;
  std::map<std::string, MetricSamples> per;
  bool tagged = false;
  for (const auto& it : items) {
    const auto s = EvaluateSequence(model, *it.pred, *it.gt, opts);
    all.Append(s);
    if (IsMotionCategory(it.tag)) {
      tagged = true;
      per[it.tag].Append(s);
    }
  }
  EvalReport r;
  r.overall = MakeRow("all", all);
  if (tagged) {
    for (auto c : kMotionCategories) r.by_type.push_back(MakeRow(std::string(c), per[std::string(c)]));
  }
  return r;
}

inline void WriteReportCsv(std::ostream& out, const EvalReport& r) {
  out << "group,frames,ang_err_deg_mean,ang_err_deg_std,pos_err_cm_mean,pos_err_cm_std,mesh_err_cm_mean,"
         "mesh_err_cm_std,jitter_m_s3_mean,jitter_m_s3_std,jitter_1e2_m_s3_mean,wrist_pos_err_cm_mean,"
         "wrist_pos_err_cm_std,elbow_pos_err_cm_mean,elbow_pos_err_cm_std\n";
  auto row = [&](const ReportRow& w) {
    out << w.group << ',' << w.frames;
    for (std::size_t m = 0; m < w.metric.size(); ++m) {
      out << ',';
      WriteNumber(out, w.metric[m].mean);
      out << ',';
      WriteNumber(out, w.metric[m].std);
      if (m == 3) {
        out << ',';
        WriteNumber(out, w.metric[m].mean * 1e-2);
      }
    }
    out << '\n';
  };
  row(r.overall);
  for (const auto& w : r.by_type) row(w);
}

// Fixed-width table, "mean (std)" per cell; jitter in units of 10^2 m/s^3.
inline void WriteReportTable(std::ostream& out, const EvalReport& r) {
  char buf[64];
  auto cell = [&](const MeanStd& m, double scale, std::size_t frames) {
    if (frames == 0 || m.count == 0) return std::string("-");
    std::snprintf(buf, sizeof(buf), "%.2f (%.2f)", m.mean * scale, m.std * scale);
    return std::string(buf);
  };
  std::snprintf(buf, sizeof(buf), "%-12s", "Group");
  out << buf;
  for (const char* c : kReportColumns) {
    std::snprintf(buf, sizeof(buf), " | %-16s", c);
    out << buf;
  }
  out << '\n' << std::string(12 + 6 * 19, '-') << '\n';
  auto row = [&](const ReportRow& w) {
    std::snprintf(buf, sizeof(buf), "%-12s", w.group.c_str());
    out << buf;
    for (std::size_t m = 0; m < w.metric.size(); ++m) {
      const std::string s = cell(w.metric[m], m == 3 ? 1e-2 : 1.0, w.frames);
      std::snprintf(buf, sizeof(buf), " | %-16s", s.c_str());
      out << buf;
    }
    out << '\n';
  };
  row(r.overall);
  for (const auto& w : r.by_type) row(w);
}

}  // namespace sitpose

#endif  // SITPOSE_METRICS_HPP_
