#pragma once

#include <optional>

#include "teleop/geometry.hpp"

namespace teleop {

/// Axis-aligned box that emitted target positions are clamped into.
struct WorkspaceClamp {
  Vec3 min = Vec3::Constant(-1e9);
  Vec3 max = Vec3::Constant(1e9);

  Vec3 apply(const Vec3& p) const { return p.cwiseMax(min).cwiseMin(max); }
};

/// Clutch engagement plus the hand and target anchors recorded at the most
/// recent change of the engagement bit.
struct ClutchState {
  bool engaged = false;
  Pose hand_anchor;
  Pose target_anchor;
};

struct ClutchOutput {
  ClutchState state;
  MotionState target;
};

/// One step of the hand-to-target mapping.
///
/// Engaged: p_t = p_t^a + (p_h - p_h^a), R_t = R_t^a (R_h^a^T R_h), twist = hand
/// twist. Released: the target sits at the target anchor with zero twist. On
/// a button transition both anchors are re-recorded from `hand` and
/// `current_target` before the mapping is evaluated, and the emitted twist is
/// zero on that sample.
ClutchOutput clutch_update(const ClutchState& state, const MotionState& hand, bool button,
                           const Pose& current_target,
                           const std::optional<WorkspaceClamp>& clamp = std::nullopt);

/// Stateful clutch for one arm: remembers the last emitted target.
class ClutchChannel {
 public:
  /// `home_target` seeds the target anchor; the hand anchor is taken from the
  /// first hand sample.
  explicit ClutchChannel(const Pose& home_target,
                         std::optional<WorkspaceClamp> clamp = std::nullopt);

  const MotionState& update(const MotionState& hand, bool button);

  /// Releases the clutch at the last known hand pose.
  const MotionState& release();

  const ClutchState& state() const { return state_; }
  const MotionState& target() const { return target_; }
  bool has_hand() const { return last_hand_.has_value(); }
  const std::optional<MotionState>& last_hand() const { return last_hand_; }

 private:
  ClutchState state_;
  MotionState target_;
  std::optional<MotionState> last_hand_;
  std::optional<WorkspaceClamp> clamp_;
};

}  // namespace teleop
