#include "teleop/impedance.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace teleop {

namespace {

void require_finite(const MotionState& s, const char* what) {
  if (!s.pose.p.allFinite() || !s.pose.q.coeffs().allFinite() || !s.twist.is_finite()) {
    std::ostringstream msg;
    msg << "impedance_wrench: non-finite " << what << " state (p = [" << s.pose.p.transpose()
        << "], q = [" << s.pose.q.coeffs().transpose() << "], v = [" << s.twist.v.transpose()
        << "], w = [" << s.twist.w.transpose() << "])";
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

ImpedanceGains::ImpedanceGains(const Vec6& stiffness_diagonal, const Mat6& damping)
    : k_(stiffness_diagonal), d_(damping) {
  if (!k_.allFinite() || (k_.array() < 0.0).any()) {
    throw std::invalid_argument("ImpedanceGains: stiffness must be finite and nonnegative");
  }
  if (!d_.allFinite()) throw std::invalid_argument("ImpedanceGains: damping must be finite");
  const double scale = std::max(1.0, d_.cwiseAbs().maxCoeff());
  if ((d_ - d_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("ImpedanceGains: damping must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat6> eig(d_, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw std::invalid_argument("ImpedanceGains: damping must be positive semidefinite");
  }
}

ImpedanceGains ImpedanceGains::with_damping_ratio(double translational_stiffness,
                                                  double rotational_stiffness,
                                                  double virtual_mass, double virtual_inertia,
                                                  double damping_ratio) {
  if (!(virtual_mass > 0.0) || !(virtual_inertia > 0.0) || !(damping_ratio >= 0.0)) {
    throw std::invalid_argument("ImpedanceGains: mass, inertia must be > 0 and ratio >= 0");
  }
  Vec6 k;
  k << Vec3::Constant(translational_stiffness), Vec3::Constant(rotational_stiffness);
  Vec6 d;
  d << Vec3::Constant(2.0 * damping_ratio * std::sqrt(translational_stiffness * virtual_mass)),
      Vec3::Constant(2.0 * damping_ratio * std::sqrt(rotational_stiffness * virtual_inertia));
  return ImpedanceGains(k, d.asDiagonal());
}

double ImpedanceGains::translational_stiffness_along(const Vec3& direction) const {
  const Vec3 n = direction.normalized();
  return n.dot(k_.head<3>().cwiseProduct(n));
}

Wrench impedance_wrench(const MotionState& current, const MotionState& target,
                        const ImpedanceGains& gains) {
  require_finite(current, "current");
  require_finite(target, "target");

  Vec6 pose_error;
  pose_error << target.pose.p - current.pose.p,
      rotation_vector(Mat3(current.pose.rotation().transpose() * target.pose.rotation())).value;
  Vec6 velocity_error;
  velocity_error << target.twist.v - current.twist.v, target.twist.w - current.twist.w;

  return Wrench::from_stacked(gains.stiffness_diagonal().cwiseProduct(pose_error) +
                              gains.damping() * velocity_error);
}

SerialChain::SerialChain(std::vector<RevoluteJoint> joints, Pose tool)
    : joints_(std::move(joints)), tool_(tool) {
  if (joints_.empty()) throw std::invalid_argument("SerialChain: need at least one joint");
  for (const auto& j : joints_) {
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("SerialChain: joint axes must be unit vectors");
    }
  }
}

Pose SerialChain::forward_kinematics(const Eigen::VectorXd& q) const {
  if (q.size() != dof()) throw std::invalid_argument("forward_kinematics: q has wrong length");
  Pose t;
  for (int i = 0; i < dof(); ++i) {
    t = compose(t, joints_[i].link);
    t = compose(t, Pose(Vec3::Zero(), Quat(Eigen::AngleAxisd(q[i], joints_[i].axis))));
  }
  return compose(t, tool_);
}

Eigen::MatrixXd jacobian(const SerialChain& chain, const Eigen::VectorXd& q) {
  if (q.size() != chain.dof()) throw std::invalid_argument("jacobian: q has wrong length");
  const int n = chain.dof();
  std::vector<Vec3> origins(n);
  std::vector<Vec3> axes(n);
  Pose t;
  for (int i = 0; i < n; ++i) {
    const auto& joint = chain.joints()[i];
    t = compose(t, joint.link);
    origins[i] = t.p;
    axes[i] = t.q * joint.axis;
    t = compose(t, Pose(Vec3::Zero(), Quat(Eigen::AngleAxisd(q[i], joint.axis))));
  }
  const Vec3 tip = compose(t, chain.tool()).p;

  Eigen::MatrixXd j(6, n);
  for (int i = 0; i < n; ++i) {
    j.block<3, 1>(0, i) = axes[i].cross(tip - origins[i]);
    j.block<3, 1>(3, i) = axes[i];
  }
  return j;
}

Eigen::VectorXd joint_torques(const Eigen::MatrixXd& jacobian, const Wrench& wrench) {
  if (jacobian.rows() != 6) {
    throw std::invalid_argument("joint_torques: Jacobian must have 6 rows, got " +
                                std::to_string(jacobian.rows()));
  }
  return jacobian.transpose() * wrench.stacked();
}

}  // namespace teleop
