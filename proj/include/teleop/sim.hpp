#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "teleop/clutch.hpp"
#include "teleop/geometry.hpp"
#include "teleop/impedance.hpp"
#include "teleop/tasks.hpp"

namespace teleop {

/// Pose and twist in the world frame (angular velocity included); principal
/// inertia along the body axes.
struct RigidBody {
  Pose pose;
  Twist twist;
  double mass = 1.0;
  Vec3 inertia = Vec3::Ones();

  void validate() const;
  Mat3 world_inertia() const;
  Vec3 point_velocity(const Vec3& world_point) const;
  double kinetic_energy() const;
};

/// Flat circular pad centred on the body origin.
struct Disk {
  double radius = 0.04;
  Vec3 normal = Vec3::UnitZ();
};

struct Cuboid {
  Vec3 half_extents = Vec3::Constant(0.05);
};

/// Solid region {x : normal . x <= offset}.
struct HalfSpace {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
};

using Shape = std::variant<Disk, Cuboid, HalfSpace>;

struct ContactParams {
  double k_n = 1e4;
  double d_n = 50.0;
  double mu = 0.8;
  /// Contacts stick on an elastic spring (stiffness k_n *
  /// tangential_stiffness_ratio) until it reaches mu * f_n; a point that then
  /// moves faster than slip_epsilon slides at mu * f_n against its motion.
  /// Without spring memory, any point above slip_epsilon slides.
  double slip_epsilon = 1e-3;
  double tangential_stiffness_ratio = 1.0;

  void validate() const;
};

/// Sample-point count used for a disk face (rim + centre).
inline constexpr int kDiskSamples = 9;
inline constexpr int kCuboidCorners = 8;
inline constexpr int kMaxContactSamples = 9;

/// A body with a shape; a null body is static and fixed at the world origin.
struct ShapedBody {
  const RigidBody* body = nullptr;
  Shape shape;
};

struct ContactPointForce {
  Vec3 point = Vec3::Zero();
  /// Unit normal along which the force on body A acts.
  Vec3 normal = Vec3::Zero();
  double normal_force = 0.0;
  Vec3 tangential_force = Vec3::Zero();
};

/// Wrenches on each body, world frame, torque about the body's own origin
/// (the world origin for static bodies).
struct ContactResult {
  Wrench on_a;
  Wrench on_b;
  double normal_force = 0.0;
  std::vector<ContactPointForce> points;

  bool touching() const { return !points.empty(); }
};

/// Per-point tangential spring extension for one contact pair.
using TangentialMemory = std::array<Vec3, kMaxContactSamples>;

/// Penalty contact between two convex shapes from {disk, cuboid, half-space}.
/// `memory` carries the stick springs between steps; pass nullptr for a
/// memoryless evaluation. Throws std::invalid_argument for unsupported pairs.
ContactResult contact_forces(const ShapedBody& a, const ShapedBody& b, const ContactParams& params,
                             double dt, TangentialMemory* memory = nullptr);

struct Effector {
  RigidBody body;
  Disk face;
  MotionState target;
  ImpedanceGains gains = ImpedanceGains::with_damping_ratio(200.0, 10.0, 1.0, 0.01, 1.0);
  double force_limit = 50.0;
  /// Saturated impedance wrench applied on the last step (world frame).
  Wrench command;
};

/// Aggregate contact state from the last step.
struct ContactSummary {
  std::array<double, 2> effector_box_normal{0.0, 0.0};
  std::array<double, 2> effector_table_normal{0.0, 0.0};
  double box_table_normal = 0.0;
  /// max over points of |f_t| - mu * f_n.
  double friction_cone_excess = -1.0;
  /// max over pairs of |F_a + F_b|.
  double pair_force_residual = 0.0;
};

struct WorldState {
  RigidBody box;
  BoxSpec box_spec;
  bool has_box = true;
  std::array<Effector, 2> effectors;
  bool has_table = true;
  double table_height = 0.0;
  /// Extra static planes.
  std::vector<HalfSpace> walls;
  ContactParams contacts;
  double gravity = 9.81;
  std::int64_t tick = 0;
  double clock = 0.0;
  double dt = 1e-3;

  /// Stick-spring state; sized and indexed by contact_pair_count().
  std::vector<TangentialMemory> contact_memory;
  ContactSummary last_contacts;

  std::size_t contact_pair_count() const;
};

/// Structured dump of the state, used in fault diagnostics.
std::string describe(const WorldState& world);

class SimulationFault : public std::runtime_error {
 public:
  SimulationFault(const std::string& what, std::string snapshot)
      : std::runtime_error(what), snapshot_(std::move(snapshot)) {}
  const std::string& snapshot() const { return snapshot_; }

 private:
  std::string snapshot_;
};

/// Advances one step of semi-implicit Euler. Throws SimulationFault on
/// non-finite state.
void step_in_place(WorldState& world);
WorldState step(const WorldState& world);

/// Mechanical energy: kinetic energy of all bodies, gravitational potential
/// of the box, and the impedance spring potential of each effector.
double total_energy(const WorldState& world);

struct SqueezeHoldPrediction {
  double normal_force = 0.0;
  double friction_capacity = 0.0;
  double weight = 0.0;
  bool held = false;
};

/// Two-face clamp equilibrium: each face sees the impedance spring and the
/// penalty spring in series, F_n = K k_n / (K + k_n) * depth, and the box is
/// held iff 2 mu F_n >= m g.
SqueezeHoldPrediction predict_squeeze_hold(const WorldState& world, double squeeze_depth);
bool squeeze_hold_check(const WorldState& world, double squeeze_depth);

/// World construction parameters.
struct SimConfig {
  double dt = 1e-3;
  double gravity = 9.81;
  double table_height = 0.0;
  ContactParams contact;

  double effector_mass = 1.0;
  double effector_inertia = 0.01;
  double face_radius = 0.04;
  double force_limit = 50.0;
  double translational_stiffness = 200.0;
  double rotational_stiffness = 10.0;
  double damping_ratio = 1.0;

  /// Arm bases sit at y = +-base_spacing / 2; effector homes are placed
  /// `home_inset` towards the centre line with the pads facing each other.
  double base_spacing = 0.90;
  double home_inset = 0.20;
  double home_x = 0.5;
  double home_height = 0.10;

  Vec3 box_start{0.5, 0.0, 0.0};  // z is ignored: the box starts resting on the table
  double box_start_yaw = 0.0;

  bool clamp_enabled = true;
  WorkspaceClamp clamp{Vec3(0.0, -0.7, -0.05), Vec3(1.0, 0.7, 0.7)};

  void validate() const;
  /// Home pose of effector `i` (0 = left, +y side; 1 = right).
  Pose home_pose(int i) const;
  std::optional<WorkspaceClamp> workspace_clamp() const;
};

WorldState make_world(const SimConfig& config, const BoxSpec& box);

/// Box resting pose on the table at (x, y) with the given yaw.
Pose resting_box_pose(const SimConfig& config, const BoxSpec& box, double x, double y, double yaw);

}  // namespace teleop
