#include "teleop/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace teleop {

std::string_view to_string(TaskType t) {
  return t == TaskType::kLifting ? "lifting" : "sliding";
}

TaskType task_type_from_string(std::string_view name) {
  if (name == "lifting") return TaskType::kLifting;
  if (name == "sliding") return TaskType::kSliding;
  throw std::invalid_argument("unknown task type '" + std::string(name) + "'");
}

void BoxSpec::validate() const {
  if (!(dims.array() > 0.0).all() || !dims.allFinite()) {
    throw std::invalid_argument("BoxSpec: dimensions must be positive");
  }
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw std::invalid_argument("BoxSpec: mass must be positive");
  }
}

void TargetSpec::validate() const {
  if (!pose.is_valid()) throw std::invalid_argument("TargetSpec: invalid pose");
  if (!(pos_tol > 0.0)) throw std::invalid_argument("TargetSpec: pos_tol must be > 0");
  if (!(rot_tol > 0.0 && rot_tol < kPi)) {
    throw std::invalid_argument("TargetSpec: rot_tol must lie in (0, pi)");
  }
}

bool is_complete(const Pose& box_pose, const TargetSpec& target, bool yaw_symmetry) {
  if ((box_pose.p - target.pose.p).norm() >= target.pos_tol) return false;
  const Mat3 box_t = box_pose.rotation().transpose();
  const Mat3 r_target = target.pose.rotation();
  double err = rotation_vector(Mat3(box_t * r_target)).angle();
  if (yaw_symmetry) {
    err = std::min(err, rotation_vector(Mat3(box_t * target.symmetry * r_target)).angle());
  }
  return err < target.rot_tol;
}

namespace {

// Uniform double in [lo, hi) from the top 53 bits; stable across standard libraries.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) {
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

double symmetric_yaw_distance(double a, double b) { return std::abs(std::remainder(a - b, kPi)); }

void check_reach(const WorkspaceBounds& ws, double z_lo, double z_hi) {
  for (double x : {ws.x_min, ws.x_max}) {
    for (double y : {ws.y_min, ws.y_max}) {
      for (double z : {z_lo, z_hi}) {
        const Vec3 c(x, y, z);
        if ((c - ws.left_base).norm() > ws.reach || (c - ws.right_base).norm() > ws.reach) {
          throw std::invalid_argument("generate_scenario: workspace exceeds arm reach");
        }
      }
    }
  }
}

}  // namespace

Scenario generate_scenario(TaskType task_type, int count, std::uint64_t seed,
                           const WorkspaceBounds& ws, const BoxSpec& box) {
  box.validate();
  if (count < 0) throw std::invalid_argument("generate_scenario: count must be >= 0");

  Scenario scenario;
  scenario.task_type = task_type;
  scenario.seed = seed;
  scenario.box = box;
  if (count == 0) return scenario;

  if (!(ws.x_max > ws.x_min) || !(ws.y_max > ws.y_min)) {
    throw std::invalid_argument("generate_scenario: empty workspace");
  }
  if (std::hypot(ws.x_max - ws.x_min, ws.y_max - ws.y_min) < 2.0 * kMinTargetSpacing) {
    throw std::invalid_argument("generate_scenario: workspace too small for target spacing");
  }

  const double rest_z = ws.table_height + 0.5 * box.dims.z();
  const bool lifting = task_type == TaskType::kLifting;
  const double z_hi = lifting ? rest_z + kLiftClearanceMax : rest_z;
  check_reach(ws, rest_z, z_hi);

  std::mt19937_64 rng(seed);

  std::vector<double> clearances;
  if (lifting) {
    const int levels =
        static_cast<int>(std::lround((kLiftClearanceMax - kLiftClearanceMin) / kLiftClearanceStep)) + 1;
    if (count > levels) {
      throw std::invalid_argument("generate_scenario: at most " + std::to_string(levels) +
                                  " lifting targets have distinct heights");
    }
    std::vector<int> idx(levels);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < count; ++i) {
      const int j = i + static_cast<int>(below(rng, static_cast<std::uint64_t>(levels - i)));
      std::swap(idx[i], idx[j]);
      clearances.push_back(kLiftClearanceMin + idx[i] * kLiftClearanceStep);
    }
  }

  const double yaw_gap = 1.25 * kDefaultRotationTolerance;
  Vec3 prev = ws.start;
  double prev_yaw = 0.0;
  for (int i = 0; i < count; ++i) {
    Vec3 p;
    int attempts = 0;
    do {
      if (++attempts > 10000) {
        throw std::invalid_argument("generate_scenario: could not place target " + std::to_string(i));
      }
      p = Vec3(uniform(rng, ws.x_min, ws.x_max), uniform(rng, ws.y_min, ws.y_max), 0.0);
    } while (std::hypot(p.x() - prev.x(), p.y() - prev.y()) < kMinTargetSpacing);
    p.z() = lifting ? rest_z + clearances[i] : rest_z;

    double yaw;
    do {
      yaw = uniform(rng, -0.5 * kPi, 0.5 * kPi);
    } while (i % 2 == 1 && symmetric_yaw_distance(yaw, prev_yaw) <= yaw_gap);

    TargetSpec t;
    t.pose = Pose(p, Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())));
    scenario.targets.push_back(t);
    prev = p;
    prev_yaw = yaw;
  }
  return scenario;
}

TaskTracker::TaskTracker(Scenario scenario, double dt) : scenario_(std::move(scenario)), dt_(dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("TaskTracker: dt must be > 0");
  for (const auto& t : scenario_.targets) t.validate();
}

void TaskTracker::start(std::int64_t tick) {
  started_ = true;
  index_ = 0;
  presented_tick_ = tick;
  finished_ = scenario_.targets.empty();
}

const TargetSpec* TaskTracker::active_target() const {
  if (!started_ || finished_) return nullptr;
  return &scenario_.targets[static_cast<std::size_t>(index_)];
}

AdvanceResult TaskTracker::advance(const Pose& box_pose, std::int64_t tick) {
  AdvanceResult r;
  r.current_index = index_;
  const TargetSpec* target = active_target();
  if (target == nullptr || tick <= presented_tick_) return r;
  if (!is_complete(box_pose, *target, scenario_.box.yaw_symmetry)) return r;

  CompletionEvent ev;
  ev.target_index = index_;
  ev.tick = tick;
  ev.time = static_cast<double>(tick) * dt_;
  ev.elapsed_ticks = tick - presented_tick_;
  r.completed = ev;

  ++index_;
  presented_tick_ = tick;
  if (index_ >= static_cast<int>(scenario_.targets.size())) {
    finished_ = true;
    r.finished_now = true;
  }
  r.current_index = index_;
  return r;
}

bool TaskTracker::skip(std::int64_t tick) {
  if (active_target() == nullptr) return finished_;
  ++index_;
  presented_tick_ = tick;
  if (index_ >= static_cast<int>(scenario_.targets.size())) finished_ = true;
  return finished_;
}

}  // namespace teleop
