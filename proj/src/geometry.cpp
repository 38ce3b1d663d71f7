#include "teleop/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace teleop {

bool Pose::is_valid(double tol) const {
  if (!p.allFinite() || !q.coeffs().allFinite()) return false;
  return std::abs(q.squaredNorm() - 1.0) <= 2.0 * tol;
}

Vec6 Twist::stacked() const {
  Vec6 x;
  x << v, w;
  return x;
}

bool Twist::is_finite() const { return v.allFinite() && w.allFinite(); }

Vec6 Wrench::stacked() const {
  Vec6 x;
  x << f, tau;
  return x;
}

Wrench Wrench::from_stacked(const Vec6& x) { return {x.head<3>(), x.tail<3>()}; }

bool Wrench::is_finite() const { return f.allFinite() && tau.allFinite(); }

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

namespace {

// First nonzero component positive.
Vec3 canonical_axis(const Vec3& axis) {
  for (int i = 0; i < 3; ++i) {
    if (axis[i] > 0.0) return axis;
    if (axis[i] < 0.0) return -axis;
  }
  return axis;
}

}  // namespace

RotationVector rotation_vector(const Mat3& r) {
  // axial = sin(theta) * axis
  const Vec3 axial = 0.5 * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = axial.norm();
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);

  RotationVector out;
  out.near_pi = (kPi - theta) < kNearPiTolerance;

  if (theta < 1e-8) {
    // theta / sin(theta) ~= 1 + theta^2 / 6
    out.value = axial * (1.0 + theta * theta / 6.0);
    return out;
  }
  if (c > -0.5) {
    out.value = axial * (theta / s);
    return out;
  }

  // Obtuse angles: recover the axis from the symmetric part,
  // (R + R^T) / 2 - cos(theta) I = (1 - cos(theta)) a a^T.
  const Mat3 b = 0.5 * (r + r.transpose()) - c * Mat3::Identity();
  int k = 0;
  b.diagonal().maxCoeff(&k);
  Vec3 axis = b.col(k).normalized();
  if (out.near_pi) {
    axis = canonical_axis(axis);
  } else if (axis.dot(axial) < 0.0) {
    axis = -axis;
  }
  out.value = theta * axis;
  return out;
}

RotationVector rotation_vector(const Quat& q) { return rotation_vector(q.toRotationMatrix()); }

Mat3 exp_so3(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < 1e-8) {
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Quat quat_exp(const Vec3& phi) {
  const double theta = phi.norm();
  if (theta < 1e-8) {
    Quat q(1.0 - theta * theta / 8.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z());
    return q.normalized();
  }
  const Vec3 xyz = (std::sin(0.5 * theta) / theta) * phi;
  return Quat(std::cos(0.5 * theta), xyz.x(), xyz.y(), xyz.z());
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.p + a.q * b.p, (a.q * b.q).normalized()};
}

Pose inverse(const Pose& a) {
  const Quat qi = a.q.conjugate();
  return {-(qi * a.p), qi};
}

double geodesic_angle(const Mat3& ra, const Mat3& rb) {
  return rotation_vector(Mat3(ra.transpose() * rb)).angle();
}

double geodesic_angle(const Quat& ra, const Quat& rb) {
  return geodesic_angle(ra.toRotationMatrix(), rb.toRotationMatrix());
}

Mat3 rot_x(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rot_y(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rot_z(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix(); }

double yaw_of(const Quat& q) {
  const Vec3 x = q * Vec3::UnitX();
  return std::atan2(x.y(), x.x());
}

double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

}  // namespace teleop
