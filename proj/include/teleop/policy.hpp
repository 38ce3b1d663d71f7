#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "teleop/session.hpp"

namespace teleop {

/// Stand-in for a human operator: turns an observation into hand samples.
class OperatorPolicy {
 public:
  virtual ~OperatorPolicy() = default;
  /// Samples to apply before the next tick (may be empty).
  virtual std::vector<InputMessage> act(const Observation& obs) = 0;
};

struct ScriptedPolicyParams {
  /// How far past the box face each pad target is pushed.
  double squeeze_depth = 0.05;
  /// Pad clearance from the box face before pressing.
  double standoff = 0.04;
  /// Height of the pad centres above the box top when travelling over it.
  double travel_clearance = 0.10;
  double linear_speed = 0.25;
  double angular_speed = 1.0;
  double jaw_speed = 0.1;
  double settle_time = 0.3;
  /// Integral gain on the remaining box pose error once transported [1/s].
  double correction_gain = 2.0;
  double correction_limit = 0.15;
  /// Re-grasp after correcting this long without success.
  double stall_time = 10.0;
  /// Grasp considered lost after this long without contact on either pad.
  double grasp_loss_time = 0.25;
  /// Lifted boxes are put down this far below their resting height.
  double place_depth = 0.01;
  /// Pad height above the table for sliding grasps.
  double slide_grasp_height = 0.055;
  /// Operator-side home of each hand, used after a clutch reposition.
  std::array<Vec3, 2> hand_home{Vec3(0.0, 0.3, 1.0), Vec3(0.0, -0.3, 1.0)};
  int reposition_ticks = 20;
};

/// Scripted dual-arm grasp: approach opposite faces, squeeze, (lift,)
/// transport, correct, put down, release and reposition the hands.
/// Drives both arms through the clutch the way a person would.
class ScriptedGraspPolicy : public OperatorPolicy {
 public:
  ScriptedGraspPolicy(TaskType task, ScriptedPolicyParams params = {});
  std::vector<InputMessage> act(const Observation& obs) override;

  enum class Phase {
    kInit, kApproach, kPress, kSettle, kLift, kTransport, kCorrect, kPlace, kOpen, kReposition, kIdle
  };
  Phase phase() const { return phase_; }
  const ScriptedPolicyParams& params() const { return params_; }

 private:
  // Both pad targets are described by a grasp frame (centre + yaw) and the
  // half distance between the pads.
  struct Grip {
    Vec3 centre = Vec3::Zero();
    double yaw = 0.0;
    double jaw = 0.0;
  };
  struct Segment {
    Grip from, to;
    double start = 0.0;
    double duration = 0.0;
  };

  Pose pad_target(const Grip& g, int i) const;
  Grip grip_from_targets(const Observation& obs) const;
  double segment_duration(const Grip& a, const Grip& b) const;
  void queue(const Grip& to, double now);
  bool run_segments(double now);
  void plan_grasp(const Observation& obs);
  void plan_transport(const Observation& obs);
  void enter(Phase p, double now);
  std::vector<InputMessage> emit(const Observation& obs, bool clutch);

  TaskType task_;
  ScriptedPolicyParams params_;
  Phase phase_ = Phase::kInit;
  double phase_start_ = 0.0;
  Grip grip_;
  std::vector<Segment> segments_;
  std::size_t segment_ = 0;

  // Grasp geometry for the current target.
  double grasp_half_width_ = 0.0;
  double grip_offset_z_ = 0.0;
  int working_index_ = -1;
  double last_contact_time_ = 0.0;
  double correct_start_ = 0.0;
  Grip correct_base_;
  Vec3 correction_ = Vec3::Zero();
  double yaw_correction_ = 0.0;

  // Clutch anchors as the operator remembers them.
  std::array<Pose, 2> hand_anchor_;
  std::array<Pose, 2> target_anchor_;
  std::array<std::optional<Pose>, 2> last_hand_;
  bool engaged_ = false;
  int reposition_count_ = 0;
};

/// Replays a recorded input trace: every row stamped at or before the current
/// clock is emitted before the next tick.
class ReplayPolicy : public OperatorPolicy {
 public:
  /// Throws std::invalid_argument unless timestamps are monotone per hand.
  explicit ReplayPolicy(std::vector<InputMessage> trace);
  std::vector<InputMessage> act(const Observation& obs) override;
  bool exhausted() const { return next_ >= trace_.size(); }

 private:
  std::vector<InputMessage> trace_;
  std::size_t next_ = 0;
};

/// Minimum-jerk blend 10s^3 - 15s^4 + 6s^5 for s in [0, 1].
double min_jerk(double s);

}  // namespace teleop
