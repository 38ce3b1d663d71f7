#include "teleop/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace teleop {

double min_jerk(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

namespace {

double yaw_gap(double to, double from, bool symmetric) {
  return std::remainder(to - from, symmetric ? kPi : 2.0 * kPi);
}

}  // namespace

ScriptedGraspPolicy::ScriptedGraspPolicy(TaskType task, ScriptedPolicyParams params)
    : task_(task), params_(params) {
  if (!(params_.squeeze_depth >= 0.0)) throw std::invalid_argument("policy: squeeze_depth must be >= 0");
  if (!(params_.linear_speed > 0.0) || !(params_.angular_speed > 0.0) || !(params_.jaw_speed > 0.0)) {
    throw std::invalid_argument("policy: speeds must be > 0");
  }
  if (params_.reposition_ticks < 1) throw std::invalid_argument("policy: reposition_ticks must be >= 1");
}

Pose ScriptedGraspPolicy::pad_target(const Grip& g, int i) const {
  const double side = i == 0 ? 1.0 : -1.0;
  const Mat3 yaw = rot_z(g.yaw);
  return {g.centre + yaw * Vec3(0.0, side * g.jaw, 0.0), yaw * rot_x(side * 0.5 * kPi)};
}

ScriptedGraspPolicy::Grip ScriptedGraspPolicy::grip_from_targets(const Observation& obs) const {
  const Vec3 left = obs.target[0].p, right = obs.target[1].p;
  const Vec3 d = left - right;
  Grip g;
  g.centre = 0.5 * (left + right);
  g.jaw = 0.5 * Vec3(d.x(), d.y(), 0.0).norm();
  g.yaw = std::atan2(-d.x(), d.y());
  return g;
}

double ScriptedGraspPolicy::segment_duration(const Grip& a, const Grip& b) const {
  return std::max({(b.centre - a.centre).norm() / params_.linear_speed,
                   std::abs(b.yaw - a.yaw) / params_.angular_speed,
                   std::abs(b.jaw - a.jaw) / params_.jaw_speed, 0.05});
}

void ScriptedGraspPolicy::queue(const Grip& to, double now) {
  Segment s;
  if (segments_.empty() || segment_ >= segments_.size()) {
    segments_.clear();
    segment_ = 0;
    s.from = grip_;
    s.start = now;
  } else {
    s.from = segments_.back().to;
    s.start = segments_.back().start + segments_.back().duration;
  }
  s.to = to;
  s.duration = segment_duration(s.from, to);
  segments_.push_back(s);
}

bool ScriptedGraspPolicy::run_segments(double now) {
  while (segment_ < segments_.size()) {
    const Segment& s = segments_[segment_];
    const double tau = (now - s.start) / s.duration;
    if (tau >= 1.0) {
      grip_ = s.to;
      ++segment_;
      continue;
    }
    const double a = min_jerk(tau);
    grip_.centre = s.from.centre + a * (s.to.centre - s.from.centre);
    grip_.yaw = s.from.yaw + a * (s.to.yaw - s.from.yaw);
    grip_.jaw = s.from.jaw + a * (s.to.jaw - s.from.jaw);
    return false;
  }
  segments_.clear();
  segment_ = 0;
  return true;
}

void ScriptedGraspPolicy::enter(Phase p, double now) {
  phase_ = p;
  phase_start_ = now;
}

void ScriptedGraspPolicy::plan_grasp(const Observation& obs) {
  const Vec3& dims = obs.box_spec.dims;
  const double box_yaw = yaw_of(obs.box.q);
  // Candidate pad axes: the box's y axis (k even) or x axis (k odd). Take the
  // one closest to the arms' natural across-table axis.
  double best_yaw = 0.0, best_half = 0.0, best_cost = 1e9;
  for (int k = -3; k <= 3; ++k) {
    const double yaw = std::remainder(box_yaw + k * 0.5 * kPi, 2.0 * kPi);
    const double half = (k % 2 == 0) ? 0.5 * dims.y() : 0.5 * dims.x();
    if (std::abs(yaw) < best_cost - 1e-9) {
      best_cost = std::abs(yaw);
      best_yaw = yaw;
      best_half = half;
    }
  }
  grasp_half_width_ = best_half;
  const double grasp_z = task_ == TaskType::kLifting ? obs.box.p.z()
                                                     : obs.table_height + params_.slide_grasp_height;
  grip_offset_z_ = grasp_z - obs.box.p.z();
  const double safe_z = obs.box.p.z() + 0.5 * dims.z() + params_.travel_clearance;
  const double open = grasp_half_width_ + params_.standoff;

  segments_.clear();
  segment_ = 0;
  Grip up = grip_;
  up.centre.z() = std::max(up.centre.z(), safe_z);
  up.jaw = std::max(up.jaw, open);
  queue(up, obs.clock);
  Grip over;
  over.centre = Vec3(obs.box.p.x(), obs.box.p.y(), safe_z);
  over.yaw = best_yaw;
  over.jaw = open;
  queue(over, obs.clock);
  Grip down = over;
  down.centre.z() = grasp_z;
  queue(down, obs.clock);
}

void ScriptedGraspPolicy::plan_transport(const Observation& obs) {
  const TargetSpec& t = *obs.active_target;
  const double dyaw = yaw_gap(yaw_of(t.pose.q), yaw_of(obs.box.q), obs.box_spec.yaw_symmetry);
  Grip end = grip_;
  // Rotate the grip about the box centre while carrying it to the target.
  const Vec3 rel = grip_.centre - obs.box.p;
  Vec3 centre = t.pose.p + rot_z(dyaw) * rel;
  if (task_ == TaskType::kSliding) centre.z() = grip_.centre.z();
  end.centre = centre;
  end.yaw = grip_.yaw + dyaw;
  segments_.clear();
  segment_ = 0;
  queue(end, obs.clock);
}

std::vector<InputMessage> ScriptedGraspPolicy::emit(const Observation& obs, bool clutch) {
  std::vector<InputMessage> out;
  const bool press = clutch && !engaged_;
  for (int i = 0; i < 2; ++i) {
    InputMessage m;
    m.timestamp = obs.clock;
    m.hand = static_cast<Hand>(i);
    m.clutch = clutch;
    Pose hand;
    if (press) {
      hand_anchor_[i] = Pose::from_translation(params_.hand_home[i]);
      target_anchor_[i] = obs.target[i];
      hand = hand_anchor_[i];
    } else if (clutch) {
      const Pose c = pad_target(grip_, i);
      hand.p = hand_anchor_[i].p + (c.p - target_anchor_[i].p);
      hand.q = (hand_anchor_[i].q * target_anchor_[i].q.conjugate() * c.q).normalized();
    } else {
      hand = last_hand_[i].value_or(Pose::from_translation(params_.hand_home[i]));
    }
    m.state.pose = hand;
    if (clutch && !press && last_hand_[i]) {
      m.state.twist.v = (hand.p - last_hand_[i]->p) / obs.dt;
      m.state.twist.w =
          rotation_vector(Mat3(hand.rotation() * last_hand_[i]->rotation().transpose())).value / obs.dt;
    }
    last_hand_[i] = hand;
    out.push_back(m);
  }
  engaged_ = clutch;
  return out;
}

std::vector<InputMessage> ScriptedGraspPolicy::act(const Observation& obs) {
  const double now = obs.clock;
  const bool lifting = task_ == TaskType::kLifting;

  if (phase_ == Phase::kInit) {
    grip_ = grip_from_targets(obs);
    enter(Phase::kIdle, now);
    return emit(obs, true);
  }

  // The active target moved on (completed or timed out): put the box down and let go.
  const bool target_changed =
      working_index_ >= 0 && (obs.target_index != working_index_ || !obs.active_target);
  if (target_changed) {
    working_index_ = -1;
    const bool carrying = phase_ == Phase::kLift || phase_ == Phase::kTransport ||
                          phase_ == Phase::kCorrect || phase_ == Phase::kSettle;
    if (carrying && lifting) {
      Grip down = grip_;
      down.centre.z() = obs.table_height + 0.5 * obs.box_spec.dims.z() + grip_offset_z_ -
                        params_.place_depth;
      segments_.clear();
      segment_ = 0;
      queue(down, now);
      enter(Phase::kPlace, now);
    } else if (phase_ != Phase::kOpen && phase_ != Phase::kReposition && phase_ != Phase::kIdle &&
               phase_ != Phase::kPlace) {
      Grip open = grip_;
      open.jaw = std::max(grip_.jaw, grasp_half_width_ + params_.standoff);
      segments_.clear();
      segment_ = 0;
      queue(open, now);
      enter(Phase::kOpen, now);
    }
  }

  const bool holding = phase_ == Phase::kLift || phase_ == Phase::kTransport || phase_ == Phase::kCorrect;
  if (holding) {
    if (obs.box_contact[0] && obs.box_contact[1]) {
      last_contact_time_ = now;
    } else if (now - last_contact_time_ > params_.grasp_loss_time) {
      Grip open = grip_;
      open.jaw = grasp_half_width_ + params_.standoff;
      segments_.clear();
      segment_ = 0;
      queue(open, now);
      enter(Phase::kOpen, now);
    }
  }

  switch (phase_) {
    case Phase::kInit:
      break;
    case Phase::kIdle:
      if (obs.state == TrialState::kRunning && obs.active_target) {
        working_index_ = obs.target_index;
        plan_grasp(obs);
        enter(Phase::kApproach, now);
      }
      break;
    case Phase::kApproach:
      if (run_segments(now)) {
        Grip closed = grip_;
        closed.jaw = grasp_half_width_ - params_.squeeze_depth;
        queue(closed, now);
        enter(Phase::kPress, now);
      }
      break;
    case Phase::kPress:
      if (run_segments(now)) enter(Phase::kSettle, now);
      break;
    case Phase::kSettle:
      if (now - phase_start_ >= params_.settle_time) {
        last_contact_time_ = now;
        if (lifting) {
          Grip up = grip_;
          up.centre.z() = obs.active_target->pose.p.z() + grip_offset_z_;
          queue(up, now);
          enter(Phase::kLift, now);
        } else {
          plan_transport(obs);
          enter(Phase::kTransport, now);
        }
      }
      break;
    case Phase::kLift:
      if (run_segments(now)) {
        plan_transport(obs);
        enter(Phase::kTransport, now);
      }
      break;
    case Phase::kTransport:
      if (run_segments(now)) {
        correct_base_ = grip_;
        correction_.setZero();
        yaw_correction_ = 0.0;
        correct_start_ = now;
        enter(Phase::kCorrect, now);
      }
      break;
    case Phase::kCorrect: {
      const TargetSpec& t = *obs.active_target;
      Vec3 err = t.pose.p - obs.box.p;
      if (!lifting) err.z() = 0.0;
      correction_ += params_.correction_gain * err * obs.dt;
      if (correction_.norm() > params_.correction_limit) {
        correction_ *= params_.correction_limit / correction_.norm();
      }
      const double yerr = yaw_gap(yaw_of(t.pose.q), yaw_of(obs.box.q), obs.box_spec.yaw_symmetry);
      yaw_correction_ = std::clamp(yaw_correction_ + params_.correction_gain * yerr * obs.dt, -0.5, 0.5);
      grip_ = correct_base_;
      grip_.centre += correction_;
      grip_.yaw += yaw_correction_;
      if (now - correct_start_ > params_.stall_time) {
        // Give up on this grasp and try again from the current box pose.
        Grip open = grip_;
        open.jaw = grasp_half_width_ + params_.standoff;
        queue(open, now);
        enter(Phase::kOpen, now);
      }
      break;
    }
    case Phase::kPlace:
      if (run_segments(now)) {
        Grip open = grip_;
        open.jaw = grasp_half_width_ + params_.standoff;
        queue(open, now);
        enter(Phase::kOpen, now);
      }
      break;
    case Phase::kOpen:
      if (run_segments(now)) {
        reposition_count_ = 0;
        enter(Phase::kReposition, now);
      }
      break;
    case Phase::kReposition: {
      // Let go of the clutch, bring the hands back to a comfortable spot, press again.
      const int n = params_.reposition_ticks;
      ++reposition_count_;
      if (reposition_count_ <= n) return emit(obs, false);
      if (reposition_count_ <= 2 * n) {
        for (int i = 0; i < 2; ++i) last_hand_[i] = Pose::from_translation(params_.hand_home[i]);
        return emit(obs, false);
      }
      grip_ = grip_from_targets(obs);
      enter(Phase::kIdle, now);
      return emit(obs, true);
    }
  }
  return emit(obs, true);
}

ReplayPolicy::ReplayPolicy(std::vector<InputMessage> trace) : trace_(std::move(trace)) {
  std::array<std::optional<double>, 2> last;
  for (const auto& m : trace_) {
    const int i = static_cast<int>(m.hand);
    if (!std::isfinite(m.timestamp)) throw std::invalid_argument("replay: non-finite timestamp");
    if (last[i] && m.timestamp < *last[i]) {
      throw std::invalid_argument("replay: timestamps for the " + std::string(to_string(m.hand)) +
                                  " hand are not monotone");
    }
    last[i] = m.timestamp;
  }
  std::stable_sort(trace_.begin(), trace_.end(),
                   [](const InputMessage& a, const InputMessage& b) { return a.timestamp < b.timestamp; });
}

std::vector<InputMessage> ReplayPolicy::act(const Observation& obs) {
  std::vector<InputMessage> out;
  while (next_ < trace_.size() && trace_[next_].timestamp <= obs.clock) out.push_back(trace_[next_++]);
  return out;
}

}  // namespace teleop
