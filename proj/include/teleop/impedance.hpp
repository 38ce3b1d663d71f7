#pragma once

#include <vector>

#include <Eigen/Core>

#include "teleop/geometry.hpp"

namespace teleop {

/// Stiffness K (diagonal) and damping D of the Cartesian impedance law.
/// Ordering is [translation; rotation] throughout.
class ImpedanceGains {
 public:
  /// Throws std::invalid_argument unless K >= 0 elementwise and D is
  /// symmetric positive semidefinite.
  ImpedanceGains(const Vec6& stiffness_diagonal, const Mat6& damping);

  /// Per-axis critical-style damping d = 2 * zeta * sqrt(k * m), with the
  /// effector's virtual mass on translational axes and inertia on rotational ones.
  static ImpedanceGains with_damping_ratio(double translational_stiffness,
                                           double rotational_stiffness, double virtual_mass,
                                           double virtual_inertia, double damping_ratio = 1.0);

  const Vec6& stiffness_diagonal() const { return k_; }
  Mat6 stiffness() const { return k_.asDiagonal(); }
  const Mat6& damping() const { return d_; }

  /// Stiffness seen along a unit translational direction.
  double translational_stiffness_along(const Vec3& direction) const;

 private:
  Vec6 k_;
  Mat6 d_;
};

/// F = K [p_t - p; phi(R^T R_t)] + D [v_t - v; w_t - w].
///
/// Evaluated literally: the rotation error phi(R^T R_t) lives in the current
/// effector frame, so callers pass angular velocities in that frame too and
/// read the torque back in it. Throws std::invalid_argument on non-finite input.
Wrench impedance_wrench(const MotionState& current, const MotionState& target,
                        const ImpedanceGains& gains);

/// Revolute joint: fixed transform from the previous joint frame, then a
/// rotation about `axis` (expressed in the joint frame).
struct RevoluteJoint {
  Pose link;
  Vec3 axis = Vec3::UnitZ();
};

class SerialChain {
 public:
  /// Throws std::invalid_argument on an empty chain or non-unit axes.
  SerialChain(std::vector<RevoluteJoint> joints, Pose tool = Pose::identity());

  int dof() const { return static_cast<int>(joints_.size()); }
  const std::vector<RevoluteJoint>& joints() const { return joints_; }
  const Pose& tool() const { return tool_; }

  Pose forward_kinematics(const Eigen::VectorXd& q) const;

 private:
  std::vector<RevoluteJoint> joints_;
  Pose tool_;
};

/// Geometric end-effector Jacobian in the base frame, rows [v; w].
Eigen::MatrixXd jacobian(const SerialChain& chain, const Eigen::VectorXd& q);

/// tau = J^T F.
Eigen::VectorXd joint_torques(const Eigen::MatrixXd& jacobian, const Wrench& wrench);

}  // namespace teleop
