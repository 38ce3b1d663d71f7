#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "teleop/clutch.hpp"
#include "teleop/sim.hpp"
#include "teleop/tasks.hpp"

namespace teleop {

/// Whether the impedance-target overlay is shown to the operator. Only
/// affects what snapshots carry, never the physics.
enum class Condition { kVis, kNovis };

std::string_view to_string(Condition c);
Condition condition_from_string(std::string_view name);

enum class Hand { kLeft = 0, kRight = 1 };

std::string_view to_string(Hand h);
Hand hand_from_string(std::string_view name);

/// One operator hand sample.
struct InputMessage {
  double timestamp = 0.0;
  Hand hand = Hand::kLeft;
  MotionState state;
  bool clutch = false;
};

enum class ControlCommand { kStart, kStop, kSetCondition, kLoadScenario, kResetBoxUpright };

std::string_view to_string(ControlCommand c);
ControlCommand control_command_from_string(std::string_view name);

struct ControlMessage {
  ControlCommand command = ControlCommand::kStart;
  std::optional<Condition> condition;
  std::optional<Scenario> scenario;
};

struct TrialRecord {
  std::string agent_id;
  Condition condition = Condition::kVis;
  TaskType task_type = TaskType::kLifting;
  int target_index = 0;
  bool completed = false;
  /// Seconds from presentation to completion (or to the timeout).
  double completion_time = 0.0;
  int drop_count = 0;
  int flip_count = 0;

  bool operator==(const TrialRecord&) const = default;
};

enum class TrialState { kIdle, kRunning, kFinished, kStopped };

std::string_view to_string(TrialState s);
TrialState trial_state_from_string(std::string_view name);

struct EffectorSnapshot {
  Pose pose;
  Wrench wrench;
  bool clutch = false;
  /// Present only when the visualization is enabled.
  std::optional<Pose> target;
  std::optional<Vec3> offset;

  /// Fills `offset` as target position minus current position.
  static EffectorSnapshot make(const Pose& pose, const Wrench& wrench, bool clutch,
                               const std::optional<Pose>& target);
  bool operator==(const EffectorSnapshot&) const;
};

struct ActiveTargetSnapshot {
  int index = 0;
  Pose pose;
  double pos_tol = kDefaultPositionTolerance;
  double rot_tol = kDefaultRotationTolerance;
  bool operator==(const ActiveTargetSnapshot&) const;
};

struct TrialStatus {
  TrialState state = TrialState::kIdle;
  int target_index = 0;
  int target_count = 0;
  int completed_count = 0;
  /// Time since the active target was presented.
  double elapsed_s = 0.0;
  bool operator==(const TrialStatus&) const = default;
};

/// Immutable view of one tick, as streamed to the operator.
struct StateSnapshot {
  std::int64_t tick = 0;
  double clock = 0.0;
  Pose box;
  std::array<EffectorSnapshot, 2> effectors;
  std::optional<ActiveTargetSnapshot> target;
  Condition condition = Condition::kVis;
  TrialStatus status;

  bool operator==(const StateSnapshot&) const;
};

/// What a scripted operator can see.
struct Observation {
  std::int64_t tick = 0;
  double clock = 0.0;
  double dt = 1e-3;
  Pose box;
  Twist box_twist;
  BoxSpec box_spec;
  double table_height = 0.0;
  std::array<Pose, 2> effector;
  std::array<Pose, 2> target;
  std::array<bool, 2> box_contact{false, false};
  double box_table_normal = 0.0;
  std::optional<TargetSpec> active_target;
  int target_index = 0;
  TrialState state = TrialState::kIdle;
  TaskType task_type = TaskType::kLifting;
};

struct SessionConfig {
  SimConfig sim;
  double timeout_s = 120.0;
  std::string agent_id = "operator";
  /// Seeded perturbation of the initial box pose.
  double start_jitter_position = 0.005;
  double start_jitter_yaw = 0.05;
};

/// The lockstep engine shared by the headless runner and the gateway: world,
/// both clutch channels, target sequencing, timing, and drop/flip accounting.
class Session {
 public:
  Session(Scenario scenario, SessionConfig config, Condition condition, std::uint64_t seed);

  /// Applies a hand sample; its effect is visible from the next tick.
  /// Throws std::invalid_argument on non-monotone timestamps for a hand.
  void apply(const InputMessage& input);
  /// Throws std::invalid_argument when a command cannot be honoured.
  void control(const ControlMessage& message);

  /// Presents the first target at the current tick.
  void start();
  /// Releases both clutches at the last known hand poses.
  void release_clutches();
  /// Operator went away: release both clutches and forget the per-hand
  /// timestamps so a new connection may start its own clock.
  void disconnect();
  void step();

  StateSnapshot snapshot() const;
  Observation observe() const;

  const std::vector<TrialRecord>& records() const { return records_; }
  TrialState state() const { return state_; }
  bool done() const { return state_ == TrialState::kFinished || state_ == TrialState::kStopped; }
  Condition condition() const { return condition_; }
  const WorldState& world() const { return world_; }
  const Scenario& scenario() const { return tracker_.scenario(); }
  const SessionConfig& config() const { return config_; }
  std::int64_t tick() const { return world_.tick; }

  /// Every applied hand sample, stamped with the session clock at which it took effect.
  const std::vector<InputMessage>& input_log() const { return input_log_; }

  /// Bit-exact text rendering of the physical state (hex floats).
  std::string physics_line() const;

 private:
  void reset_world();
  void reset_box_upright();
  void update_drop_flip();
  void close_target(int index, bool completed, std::int64_t elapsed_ticks);

  SessionConfig config_;
  Condition condition_;
  std::uint64_t seed_;
  WorldState world_;
  TaskTracker tracker_;
  std::array<ClutchChannel, 2> clutch_;
  std::array<std::optional<double>, 2> last_timestamp_;
  TrialState state_ = TrialState::kIdle;
  std::vector<TrialRecord> records_;
  std::vector<InputMessage> input_log_;

  // Drop / flip accounting for the active target.
  int drops_ = 0;
  int flips_ = 0;
  bool carried_ = false;
  // Set after a slip drop until the effectors let go of the box.
  bool grasp_spent_ = false;
  std::array<Vec3, 2> grasp_anchor_{Vec3::Zero(), Vec3::Zero()};
  bool drop_pending_ = false;
  bool flipped_ = false;
};

}  // namespace teleop
