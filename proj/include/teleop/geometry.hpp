#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace teleop {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Rigid transform. Orientation is stored as a unit quaternion; the rotation
/// matrix is materialized on demand.
struct Pose {
  Vec3 p = Vec3::Zero();
  Quat q = Quat::Identity();

  Pose() = default;
  Pose(const Vec3& position, const Quat& orientation) : p(position), q(orientation) {}
  Pose(const Vec3& position, const Mat3& rotation) : p(position), q(rotation) {}

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& position) { return {position, Quat::Identity()}; }

  Mat3 rotation() const { return q.toRotationMatrix(); }

  /// Finite position and unit quaternion (so the matrix is in SO(3)) within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

/// Linear and angular velocity. Frame is defined by the consumer.
struct Twist {
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();

  Vec6 stacked() const;
  bool is_finite() const;
};

/// Force and torque.
struct Wrench {
  Vec3 f = Vec3::Zero();
  Vec3 tau = Vec3::Zero();

  Vec6 stacked() const;
  static Wrench from_stacked(const Vec6& x);
  bool is_finite() const;

  Wrench& operator+=(const Wrench& o) {
    f += o.f;
    tau += o.tau;
    return *this;
  }
};

/// Pose together with its velocity.
struct MotionState {
  Pose pose;
  Twist twist;
};

/// Rotation vector (axis * angle) with angle in [0, pi].
///
/// `near_pi` is set when the angle is within 1e-6 of pi. There the axis sign
/// is not recoverable from the antisymmetric part, and the result is
/// canonicalized so that the first nonzero axis component is positive.
struct RotationVector {
  Vec3 value = Vec3::Zero();
  bool near_pi = false;

  double angle() const { return value.norm(); }
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kNearPiTolerance = 1e-6;

Mat3 skew(const Vec3& v);

RotationVector rotation_vector(const Mat3& rotation);
RotationVector rotation_vector(const Quat& rotation);

/// Exponential map so(3) -> SO(3).
Mat3 exp_so3(const Vec3& rotation_vector);
Quat quat_exp(const Vec3& rotation_vector);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);

/// Geodesic distance on SO(3): the norm of rotation_vector(Ra^T Rb).
double geodesic_angle(const Mat3& ra, const Mat3& rb);
double geodesic_angle(const Quat& ra, const Quat& rb);

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

/// Heading of the body x axis projected onto the horizontal plane.
double yaw_of(const Quat& q);

/// Wraps to (-pi, pi].
double wrap_angle(double angle);

}  // namespace teleop
