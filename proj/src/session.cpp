#include "teleop/session.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace teleop {

std::string_view to_string(Condition c) { return c == Condition::kVis ? "vis" : "novis"; }

Condition condition_from_string(std::string_view name) {
  if (name == "vis") return Condition::kVis;
  if (name == "novis") return Condition::kNovis;
  throw std::invalid_argument("unknown condition '" + std::string(name) + "' (expected vis|novis)");
}

std::string_view to_string(Hand h) { return h == Hand::kLeft ? "left" : "right"; }

Hand hand_from_string(std::string_view name) {
  if (name == "left") return Hand::kLeft;
  if (name == "right") return Hand::kRight;
  throw std::invalid_argument("unknown hand '" + std::string(name) + "' (expected left|right)");
}

std::string_view to_string(ControlCommand c) {
  switch (c) {
    case ControlCommand::kStart: return "start";
    case ControlCommand::kStop: return "stop";
    case ControlCommand::kSetCondition: return "set-condition";
    case ControlCommand::kLoadScenario: return "load-scenario";
    case ControlCommand::kResetBoxUpright: return "reset-box-upright";
  }
  return "start";
}

ControlCommand control_command_from_string(std::string_view name) {
  for (auto c : {ControlCommand::kStart, ControlCommand::kStop, ControlCommand::kSetCondition,
                 ControlCommand::kLoadScenario, ControlCommand::kResetBoxUpright}) {
    if (to_string(c) == name) return c;
  }
  throw std::invalid_argument("unknown control command '" + std::string(name) + "'");
}

std::string_view to_string(TrialState s) {
  switch (s) {
    case TrialState::kIdle: return "idle";
    case TrialState::kRunning: return "running";
    case TrialState::kFinished: return "finished";
    case TrialState::kStopped: return "stopped";
  }
  return "idle";
}

TrialState trial_state_from_string(std::string_view name) {
  for (auto s : {TrialState::kIdle, TrialState::kRunning, TrialState::kFinished, TrialState::kStopped}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown trial state '" + std::string(name) + "'");
}

namespace {

bool same_pose(const Pose& a, const Pose& b) { return a.p == b.p && a.q.coeffs() == b.q.coeffs(); }

bool same_optional_pose(const std::optional<Pose>& a, const std::optional<Pose>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same_pose(*a, *b);
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double tilt_of(const Pose& pose) {
  const double c = (pose.q * Vec3::UnitZ()).z();
  return std::acos(std::clamp(c, -1.0, 1.0));
}

constexpr double kFlipTilt = kPi / 4.0;
constexpr double kFlipRearm = kPi / 8.0;
// Box travel relative to the pads that marks a grasp as having slipped.
constexpr double kDropSlide = 0.01;

void append_vec(std::string& out, const Vec3& v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, " %a %a %a", v.x(), v.y(), v.z());
  out += buf;
}

void append_quat(std::string& out, const Quat& q) {
  char buf[160];
  std::snprintf(buf, sizeof buf, " %a %a %a %a", q.w(), q.x(), q.y(), q.z());
  out += buf;
}

}  // namespace

EffectorSnapshot EffectorSnapshot::make(const Pose& pose, const Wrench& wrench, bool clutch,
                                        const std::optional<Pose>& target) {
  EffectorSnapshot s;
  s.pose = pose;
  s.wrench = wrench;
  s.clutch = clutch;
  s.target = target;
  if (target) s.offset = target->p - pose.p;
  return s;
}

bool EffectorSnapshot::operator==(const EffectorSnapshot& o) const {
  return same_pose(pose, o.pose) && wrench.f == o.wrench.f && wrench.tau == o.wrench.tau &&
         clutch == o.clutch && same_optional_pose(target, o.target) && offset == o.offset;
}

bool ActiveTargetSnapshot::operator==(const ActiveTargetSnapshot& o) const {
  return index == o.index && same_pose(pose, o.pose) && pos_tol == o.pos_tol && rot_tol == o.rot_tol;
}

bool StateSnapshot::operator==(const StateSnapshot& o) const {
  return tick == o.tick && clock == o.clock && same_pose(box, o.box) && effectors == o.effectors &&
         target == o.target && condition == o.condition && status == o.status;
}

Session::Session(Scenario scenario, SessionConfig config, Condition condition, std::uint64_t seed)
    : config_(std::move(config)),
      condition_(condition),
      seed_(seed),
      tracker_(std::move(scenario), config_.sim.dt),
      clutch_{ClutchChannel(config_.sim.home_pose(0), config_.sim.workspace_clamp()),
              ClutchChannel(config_.sim.home_pose(1), config_.sim.workspace_clamp())} {
  if (!(config_.timeout_s > 0.0)) throw std::invalid_argument("Session: timeout_s must be > 0");
  if (config_.start_jitter_position < 0.0 || config_.start_jitter_yaw < 0.0) {
    throw std::invalid_argument("Session: start jitter must be >= 0");
  }
  reset_world();
}

void Session::reset_world() {
  SimConfig sim = config_.sim;
  std::mt19937_64 rng(seed_);
  const double jx = (2.0 * unit_uniform(rng) - 1.0) * config_.start_jitter_position;
  const double jy = (2.0 * unit_uniform(rng) - 1.0) * config_.start_jitter_position;
  const double jyaw = (2.0 * unit_uniform(rng) - 1.0) * config_.start_jitter_yaw;
  sim.box_start += Vec3(jx, jy, 0.0);
  sim.box_start_yaw += jyaw;

  const std::int64_t tick = world_.tick;
  world_ = make_world(sim, tracker_.scenario().box);
  world_.tick = tick;
  world_.clock = static_cast<double>(tick) * world_.dt;
  for (int i = 0; i < 2; ++i) {
    clutch_[i] = ClutchChannel(config_.sim.home_pose(i), config_.sim.workspace_clamp());
    world_.effectors[i].target = clutch_[i].target();
  }
  last_timestamp_ = {};
  drops_ = flips_ = 0;
  carried_ = drop_pending_ = flipped_ = grasp_spent_ = false;
}

void Session::apply(const InputMessage& input) {
  const int i = static_cast<int>(input.hand);
  if (!std::isfinite(input.timestamp)) throw std::invalid_argument("input: non-finite timestamp");
  if (last_timestamp_[i] && input.timestamp < *last_timestamp_[i]) {
    throw std::invalid_argument("input: timestamp for " + std::string(to_string(input.hand)) +
                                " hand went backwards");
  }
  if (!input.state.pose.p.allFinite() || !input.state.pose.q.coeffs().allFinite() ||
      !input.state.twist.is_finite()) {
    throw std::invalid_argument("input: non-finite hand state");
  }
  if (std::abs(input.state.pose.q.norm() - 1.0) > 1e-6) {
    throw std::invalid_argument("input: hand orientation is not a unit quaternion");
  }
  last_timestamp_[i] = input.timestamp;

  MotionState hand = input.state;
  hand.pose.q.normalize();
  world_.effectors[i].target = clutch_[i].update(hand, input.clutch);

  InputMessage logged = input;
  logged.timestamp = world_.clock;
  input_log_.push_back(logged);
}

void Session::release_clutches() {
  for (int i = 0; i < 2; ++i) {
    if (!clutch_[i].state().engaged) continue;
    world_.effectors[i].target = clutch_[i].release();
  }
}

void Session::disconnect() {
  release_clutches();
  last_timestamp_ = {};
}

void Session::control(const ControlMessage& message) {
  switch (message.command) {
    case ControlCommand::kStart:
      start();
      break;
    case ControlCommand::kStop:
      if (state_ == TrialState::kRunning) state_ = TrialState::kStopped;
      break;
    case ControlCommand::kSetCondition:
      if (!message.condition) throw std::invalid_argument("set-condition: missing condition");
      condition_ = *message.condition;
      break;
    case ControlCommand::kLoadScenario:
      if (!message.scenario) throw std::invalid_argument("load-scenario: missing scenario");
      if (state_ == TrialState::kRunning) {
        throw std::invalid_argument("load-scenario: a trial is running; stop it first");
      }
      tracker_ = TaskTracker(*message.scenario, config_.sim.dt);
      records_.clear();
      state_ = TrialState::kIdle;
      reset_world();
      break;
    case ControlCommand::kResetBoxUpright:
      reset_box_upright();
      break;
  }
}

void Session::start() {
  if (state_ == TrialState::kRunning) throw std::invalid_argument("start: trial already running");
  if (state_ != TrialState::kIdle) {
    throw std::invalid_argument("start: trial already ran; load a scenario to start again");
  }
  tracker_.start(world_.tick);
  state_ = tracker_.finished() ? TrialState::kFinished : TrialState::kRunning;
  drops_ = flips_ = 0;
}

void Session::reset_box_upright() {
  if (!world_.has_box) return;
  RigidBody& box = world_.box;
  const Vec3 old = box.pose.p;
  Vec3 p(old.x(), old.y(), world_.table_height + 0.5 * world_.box_spec.dims.z());

  if (const TargetSpec* t = tracker_.active_target()) {
    // The box may not end up closer to the target than it was.
    const double old_dist = std::max((old - t->pose.p).norm(), t->pos_tol);
    if ((p - t->pose.p).norm() < old_dist) {
      Eigen::Vector2d away(p.x() - t->pose.p.x(), p.y() - t->pose.p.y());
      if (away.norm() == 0.0) away = Eigen::Vector2d::UnitX();
      const double dz = p.z() - t->pose.p.z();
      const double h = std::sqrt(std::max(0.0, old_dist * old_dist - dz * dz));
      const Eigen::Vector2d xy = Eigen::Vector2d(t->pose.p.x(), t->pose.p.y()) + h * away.normalized();
      p.x() = xy.x();
      p.y() = xy.y();
      // Round-off guard: never strictly closer.
      if ((p - t->pose.p).norm() < old_dist) {
        const Eigen::Vector2d nudged = xy + 1e-12 * away.normalized();
        p.x() = nudged.x();
        p.y() = nudged.y();
      }
    }
  }
  box.pose = Pose(p, Quat(Eigen::AngleAxisd(yaw_of(box.pose.q), Vec3::UnitZ())));
  box.twist = Twist{};
  for (auto& m : world_.contact_memory) m = TangentialMemory{};
  drop_pending_ = carried_ = grasp_spent_ = false;
  flipped_ = false;
}

void Session::update_drop_flip() {
  if (!world_.has_box) return;
  const ContactSummary& c = world_.last_contacts;
  const bool effector_contact = c.effector_box_normal[0] > 0.0 || c.effector_box_normal[1] > 0.0;
  const double weight = world_.box.mass * world_.gravity;
  // Carried: touching an effector with the table bearing less than half the weight.
  const bool loaded = effector_contact && c.box_table_normal < 0.5 * weight;
  auto box_in_pad = [&](int i) {
    const Pose& pad = world_.effectors[i].body.pose;
    return Vec3(pad.q.conjugate() * (world_.box.pose.p - pad.p));
  };

  if (drop_pending_) {
    if (effector_contact) {
      drop_pending_ = false;  // caught again before landing
    } else if (c.box_table_normal > 0.0) {
      ++drops_;
      drop_pending_ = false;
    }
  }

  if (carried_) {
    if (!effector_contact) {
      carried_ = false;
      drop_pending_ = true;
    } else if (!loaded) {
      // The table has the weight again. Fine if it was set down; a drop if
      // the box slid through the grasp to get there.
      double slide = 0.0;
      for (int i = 0; i < 2; ++i) slide = std::max(slide, (box_in_pad(i) - grasp_anchor_[i]).norm());
      if (slide > kDropSlide) {
        ++drops_;
        grasp_spent_ = true;
      }
      carried_ = false;
    }
  } else if (!effector_contact) {
    grasp_spent_ = false;
  } else if (loaded && !grasp_spent_) {
    carried_ = true;
    for (int i = 0; i < 2; ++i) grasp_anchor_[i] = box_in_pad(i);
  }

  const double tilt = tilt_of(world_.box.pose);
  if (!flipped_ && tilt > kFlipTilt) {
    ++flips_;
    flipped_ = true;
  } else if (flipped_ && tilt < kFlipRearm) {
    flipped_ = false;
  }
}

void Session::close_target(int index, bool completed, std::int64_t elapsed_ticks) {
  TrialRecord r;
  r.agent_id = config_.agent_id;
  r.condition = condition_;
  r.task_type = tracker_.scenario().task_type;
  r.target_index = index;
  r.completed = completed;
  r.completion_time = static_cast<double>(elapsed_ticks) * world_.dt;
  r.drop_count = drops_;
  r.flip_count = flips_;
  records_.push_back(r);
  drops_ = flips_ = 0;
}

void Session::step() {
  step_in_place(world_);
  if (state_ != TrialState::kRunning) return;

  update_drop_flip();
  const int index = tracker_.current_index();
  const AdvanceResult r = tracker_.advance(world_.box.pose, world_.tick);
  if (r.completed) {
    close_target(index, true, r.completed->elapsed_ticks);
  } else {
    const std::int64_t elapsed = world_.tick - tracker_.presented_at();
    if (static_cast<double>(elapsed) * world_.dt >= config_.timeout_s) {
      close_target(index, false, elapsed);
      tracker_.skip(world_.tick);
    }
  }
  if (tracker_.finished()) state_ = TrialState::kFinished;
}

StateSnapshot Session::snapshot() const {
  StateSnapshot s;
  s.tick = world_.tick;
  s.clock = world_.clock;
  s.box = world_.box.pose;
  s.condition = condition_;
  for (int i = 0; i < 2; ++i) {
    const Effector& e = world_.effectors[i];
    std::optional<Pose> target;
    if (condition_ == Condition::kVis) target = e.target.pose;
    s.effectors[i] = EffectorSnapshot::make(e.body.pose, e.command, clutch_[i].state().engaged, target);
  }
  if (const TargetSpec* t = tracker_.active_target()) {
    s.target = ActiveTargetSnapshot{tracker_.current_index(), t->pose, t->pos_tol, t->rot_tol};
  }
  s.status.state = state_;
  s.status.target_index = tracker_.current_index();
  s.status.target_count = static_cast<int>(tracker_.scenario().targets.size());
  s.status.completed_count = 0;
  for (const auto& r : records_) s.status.completed_count += r.completed ? 1 : 0;
  s.status.elapsed_s = tracker_.started() && !tracker_.finished()
                           ? static_cast<double>(world_.tick - tracker_.presented_at()) * world_.dt
                           : 0.0;
  return s;
}

Observation Session::observe() const {
  Observation o;
  o.tick = world_.tick;
  o.clock = world_.clock;
  o.dt = world_.dt;
  o.box = world_.box.pose;
  o.box_twist = world_.box.twist;
  o.box_spec = world_.box_spec;
  o.table_height = world_.table_height;
  for (int i = 0; i < 2; ++i) {
    o.effector[i] = world_.effectors[i].body.pose;
    o.target[i] = world_.effectors[i].target.pose;
    o.box_contact[i] = world_.last_contacts.effector_box_normal[i] > 0.0;
  }
  o.box_table_normal = world_.last_contacts.box_table_normal;
  if (const TargetSpec* t = tracker_.active_target()) o.active_target = *t;
  o.target_index = tracker_.current_index();
  o.state = state_;
  o.task_type = tracker_.scenario().task_type;
  return o;
}

std::string Session::physics_line() const {
  std::string out;
  out.reserve(1024);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%" PRId64, world_.tick);
  out += buf;
  append_vec(out, world_.box.pose.p);
  append_quat(out, world_.box.pose.q);
  append_vec(out, world_.box.twist.v);
  append_vec(out, world_.box.twist.w);
  for (const Effector& e : world_.effectors) {
    append_vec(out, e.body.pose.p);
    append_quat(out, e.body.pose.q);
    append_vec(out, e.body.twist.v);
    append_vec(out, e.body.twist.w);
    append_vec(out, e.target.pose.p);
    append_quat(out, e.target.pose.q);
    append_vec(out, e.target.twist.v);
    append_vec(out, e.target.twist.w);
    append_vec(out, e.command.f);
    append_vec(out, e.command.tau);
  }
  return out;
}

}  // namespace teleop
