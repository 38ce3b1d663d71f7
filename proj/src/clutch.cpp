#include "teleop/clutch.hpp"

namespace teleop {

ClutchOutput clutch_update(const ClutchState& state, const MotionState& hand, bool button,
                           const Pose& current_target,
                           const std::optional<WorkspaceClamp>& clamp) {
  ClutchOutput out;
  out.state = state;

  if (button != state.engaged) {
    out.state.engaged = button;
    out.state.hand_anchor = hand.pose;
    out.state.target_anchor = current_target;
    // The anchors coincide with the inputs on this sample, so the mapping
    // reduces to the target anchor itself.
    out.target.pose = current_target;
    out.target.twist = Twist{};
    return out;
  }

  if (!button) {
    out.target.pose = state.target_anchor;
    out.target.twist = Twist{};
    return out;
  }

  const Pose& ha = state.hand_anchor;
  const Pose& ta = state.target_anchor;
  Vec3 p = ta.p + (hand.pose.p - ha.p);
  if (clamp) p = clamp->apply(p);
  out.target.pose.p = p;
  out.target.pose.q = (ta.q * (ha.q.conjugate() * hand.pose.q)).normalized();
  out.target.twist = hand.twist;
  return out;
}

ClutchChannel::ClutchChannel(const Pose& home_target, std::optional<WorkspaceClamp> clamp)
    : clamp_(clamp) {
  state_.target_anchor = home_target;
  state_.hand_anchor = home_target;
  target_.pose = home_target;
}

const MotionState& ClutchChannel::update(const MotionState& hand, bool button) {
  if (!last_hand_) state_.hand_anchor = hand.pose;
  last_hand_ = hand;
  const ClutchOutput out = clutch_update(state_, hand, button, target_.pose, clamp_);
  state_ = out.state;
  target_ = out.target;
  return target_;
}

const MotionState& ClutchChannel::release() {
  if (!state_.engaged) return target_;
  MotionState hand = last_hand_.value_or(MotionState{state_.hand_anchor, {}});
  hand.twist = Twist{};
  return update(hand, false);
}

}  // namespace teleop
