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

// Rotation representations and the conversions between them. Matrices are
// the canonical storage; quaternions are canonicalized to w >= 0; the 6D
// form is the first two matrix columns stacked, decoded by Gram-Schmidt.

#ifndef SITPOSE_ROTATION_HPP_
#define SITPOSE_ROTATION_HPP_

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "sitpose/error.hpp"

namespace sitpose {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline Mat3 Skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return s;
}

inline bool IsRotationMatrix(const Mat3& r, double tol = 1e-9) {
  if (!r.allFinite()) return false;
  const double ortho = (r.transpose() * r - Mat3::Identity()).norm();
  return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

inline Quat CanonicalQuaternion(Quat q) {
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

inline Quat MatrixToQuaternion(const Mat3& r) {
  Quat q(r);
  q.normalize();
  return CanonicalQuaternion(q);
}

inline Mat3 QuaternionToMatrix(const Quat& q) {
  return q.normalized().toRotationMatrix();
}

// Gram-Schmidt reconstruction: first column is the normalized first 3-vector,
// second is the second 3-vector orthogonalized against it, third their cross.
inline Mat3 Rot6dToMatrix(const Vec6& r) {
  const Vec3 a = r.head<3>();
  const Vec3 b = r.tail<3>();
  const double na = a.norm();
  if (!(na > 1e-8)) {
    throw Error(ErrorKind::kDegenerateInput, "6D rotation: first column has near-zero norm");
  }
  const Vec3 c1 = a / na;
  const Vec3 residual = b - c1.dot(b) * c1;
  const double nr = residual.norm();
  if (!(nr > 1e-8)) {
    throw Error(ErrorKind::kDegenerateInput,
                "6D rotation: second column is parallel to the first");
  }
  const Vec3 c2 = residual / nr;
  Mat3 m;
  m.col(0) = c1;
  m.col(1) = c2;
  m.col(2) = c1.cross(c2);
  return m;
}

inline Vec6 MatrixToRot6d(const Mat3& r) {
  Vec6 out;
  out.head<3>() = r.col(0);
  out.tail<3>() = r.col(1);
  return out;
}

// exp: so(3) -> SO(3) for an axis-angle vector.
inline Mat3 ExpMap(const Vec3& phi) {
  const double a2 = phi.squaredNorm();
  const double a = std::sqrt(a2);
  double s, c;  // sin(a)/a, (1-cos(a))/a^2
  if (a < 1e-4) {
    s = 1.0 - a2 / 6.0 + a2 * a2 / 120.0;
    c = 0.5 - a2 / 24.0 + a2 * a2 / 720.0;
  } else {
    s = std::sin(a) / a;
    c = (1.0 - std::cos(a)) / a2;
  }
  const Mat3 k = Skew(phi);
  return Mat3::Identity() + s * k + c * k * k;
}

// log: SO(3) -> axis-angle with angle in [0, pi].
inline Vec3 LogMap(const Mat3& r) {
  const Eigen::AngleAxisd aa(MatrixToQuaternion(r));
  return aa.angle() * aa.axis();
}

// Axis-angle vector for `r` chosen among its 2*pi*k equivalents to lie
// closest to `reference`, so that differences stay continuous over time.
inline Vec3 NearestAxisAngle(const Mat3& r, const Vec3& reference) {
  const Vec3 base = LogMap(r);
  const double angle = base.norm();
  if (angle < 1e-12) {
    const double ref_angle = reference.norm();
    if (ref_angle < std::numbers::pi) return base;
    const double k = std::round(ref_angle / (2.0 * std::numbers::pi));
    return (2.0 * std::numbers::pi * k / ref_angle) * reference;
  }
  // Equivalent vectors are (angle + 2*pi*k) * axis; pick k nearest the
  // projection of the reference onto the axis.
  const Vec3 axis = base / angle;
  const double k = std::round((reference.dot(axis) - angle) / (2.0 * std::numbers::pi));
  return (angle + 2.0 * std::numbers::pi * k) * axis;
}

// Left Jacobian of SO(3): d/dt exp(phi) = Skew(J(phi) * phidot) * exp(phi).
inline Mat3 LeftJacobian(const Vec3& phi) {
  const double a2 = phi.squaredNorm();
  const double a = std::sqrt(a2);
  double b, c;
  if (a < 0.05) {
    b = 0.5 - a2 / 24.0 + a2 * a2 / 720.0;
    c = 1.0 / 6.0 - a2 / 120.0 + a2 * a2 / 5040.0;
  } else {
    b = (1.0 - std::cos(a)) / a2;
    c = (a - std::sin(a)) / (a2 * a);
  }
  const Mat3 k = Skew(phi);
  return Mat3::Identity() + b * k + c * k * k;
}

// Time derivative of LeftJacobian(phi) along phidot.
inline Mat3 LeftJacobianDot(const Vec3& phi, const Vec3& phidot) {
  const double a2 = phi.squaredNorm();
  const double a = std::sqrt(a2);
  double b, c, db, dc;  // db = b'(a)/a, dc = c'(a)/a
  if (a < 0.05) {
    b = 0.5 - a2 / 24.0 + a2 * a2 / 720.0;
    c = 1.0 / 6.0 - a2 / 120.0 + a2 * a2 / 5040.0;
    db = -1.0 / 12.0 + a2 / 180.0 - a2 * a2 / 6720.0;
    dc = -1.0 / 60.0 + a2 / 1260.0 - a2 * a2 / 60480.0;
  } else {
    const double sa = std::sin(a), ca = std::cos(a);
    b = (1.0 - ca) / a2;
    c = (a - sa) / (a2 * a);
    db = (a * sa - 2.0 + 2.0 * ca) / (a2 * a2);
    dc = (a * (1.0 - ca) - 3.0 * (a - sa)) / (a2 * a2 * a);
  }
  const double rate = phi.dot(phidot);
  const Mat3 k = Skew(phi);
  const Mat3 kd = Skew(phidot);
  return (rate * db) * k + b * kd + (rate * dc) * k * k + c * (kd * k + k * kd);
}

// Geodesic angle of r1 * r2^T, radians.
inline double GeodesicAngle(const Mat3& r1, const Mat3& r2) {
  const Mat3 rel = r1 * r2.transpose();
  const double cos_angle = std::clamp((rel.trace() - 1.0) * 0.5, -1.0, 1.0);
  // acos loses precision near 0; atan2 of the skew part does not.
  const Vec3 w(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * w.norm(), cos_angle);
}

// Distance in [0, 1] between unit quaternions: 1 - |q1 . q2|.
inline double QuatDistance(const Quat& q1, const Quat& q2) {
  if (std::abs(q1.norm() - 1.0) > 1e-6 || std::abs(q2.norm() - 1.0) > 1e-6) {
    throw Error(ErrorKind::kNonUnitQuaternion, "quat_distance expects unit quaternions");
  }
  const double d = 1.0 - std::abs(q1.coeffs().dot(q2.coeffs()));
  return std::clamp(d, 0.0, 1.0);
}

// Orthonormal rotation value with conversions to every representation.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  static Rotation FromMatrix(const Mat3& m) {
    if (!IsRotationMatrix(m, 1e-6)) {
      throw Error(ErrorKind::kNonOrthonormalInput, "matrix is not a proper rotation");
    }
    return Rotation(m);
  }
  static Rotation FromQuaternion(const Quat& q) { return Rotation(QuaternionToMatrix(q)); }
  static Rotation From6d(const Vec6& r) { return Rotation(Rot6dToMatrix(r)); }
  static Rotation FromAxisAngle(const Vec3& phi) { return Rotation(ExpMap(phi)); }
  static Rotation Identity() { return Rotation(); }

  const Mat3& matrix() const { return m_; }
  Quat quaternion() const { return MatrixToQuaternion(m_); }
  Vec6 rot6d() const { return MatrixToRot6d(m_); }
  Vec3 axis_angle() const { return LogMap(m_); }

  Rotation inverse() const { return Rotation(m_.transpose()); }
  Rotation operator*(const Rotation& other) const { return Rotation(m_ * other.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

 private:
  explicit Rotation(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

}  // namespace sitpose

#endif  // SITPOSE_ROTATION_HPP_
