#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "teleop/geometry.hpp"

namespace teleop {

enum class TaskType { kLifting, kSliding };

std::string_view to_string(TaskType t);
/// Throws std::invalid_argument for unknown names.
TaskType task_type_from_string(std::string_view name);

struct BoxSpec {
  Vec3 dims{0.16, 0.16, 0.20};
  double mass = 0.635;
  bool yaw_symmetry = true;

  /// Throws std::invalid_argument unless dims > 0 and mass > 0.
  void validate() const;
};

inline constexpr double kDefaultPositionTolerance = 0.030;
inline constexpr double kDefaultRotationTolerance = 0.4;

/// A goal pose for the box (rendered as the green cuboid) with its tolerances.
struct TargetSpec {
  Pose pose;
  double pos_tol = kDefaultPositionTolerance;
  double rot_tol = kDefaultRotationTolerance;
  /// Half turn about the world vertical.
  Mat3 symmetry = rot_z(kPi);

  void validate() const;
};

struct Scenario {
  TaskType task_type = TaskType::kLifting;
  std::vector<TargetSpec> targets;
  std::uint64_t seed = 0;
  BoxSpec box;
};

/// Position error below pos_tol and orientation error below rot_tol, the
/// latter taken as the smaller of the direct and the half-turn-symmetric
/// alternative when the box has yaw symmetry.
bool is_complete(const Pose& box_pose, const TargetSpec& target, bool yaw_symmetry = true);

/// Region in which box targets are generated, plus the arm bases used for the
/// reachability precondition.
struct WorkspaceBounds {
  double x_min = 0.38;
  double x_max = 0.62;
  double y_min = -0.12;
  double y_max = 0.12;
  double table_height = 0.0;
  /// Box centre at the start of a trial; the first target keeps clear of it.
  Vec3 start{0.5, 0.0, 0.10};
  /// Shoulder positions of the two arms, 0.90 m apart.
  Vec3 left_base{0.0, 0.45, 0.33};
  Vec3 right_base{0.0, -0.45, 0.33};
  double reach = 0.9;
};

/// Lifting clearance range (box bottom above the table) and its resolution.
inline constexpr double kLiftClearanceMin = 0.05;
inline constexpr double kLiftClearanceMax = 0.25;
inline constexpr double kLiftClearanceStep = 0.001;
/// Horizontal spacing between consecutive targets (and from the start).
inline constexpr double kMinTargetSpacing = 0.06;

/// Deterministic in `seed`. Throws std::invalid_argument for an infeasible
/// request (count beyond distinct placements, workspace out of reach or too small).
Scenario generate_scenario(TaskType task_type, int count, std::uint64_t seed,
                           const WorkspaceBounds& workspace, const BoxSpec& box = {});

struct CompletionEvent {
  int target_index = 0;
  std::int64_t tick = 0;
  double time = 0.0;
  /// Ticks since the target was presented.
  std::int64_t elapsed_ticks = 0;
};

struct AdvanceResult {
  int current_index = 0;
  std::optional<CompletionEvent> completed;
  bool finished_now = false;
};

/// Sequential target presentation. A target is latched complete the first
/// tick `is_complete` holds and the next one is presented on the same tick.
class TaskTracker {
 public:
  TaskTracker() = default;
  TaskTracker(Scenario scenario, double dt);

  void start(std::int64_t tick);
  bool started() const { return started_; }
  bool finished() const { return finished_; }

  AdvanceResult advance(const Pose& box_pose, std::int64_t tick);

  /// Abandons the current target (timeout). Returns true if that finished the scenario.
  bool skip(std::int64_t tick);

  int current_index() const { return index_; }
  std::int64_t presented_at() const { return presented_tick_; }
  const Scenario& scenario() const { return scenario_; }
  const TargetSpec* active_target() const;

 private:
  Scenario scenario_;
  double dt_ = 1e-3;
  bool started_ = false;
  bool finished_ = false;
  int index_ = 0;
  std::int64_t presented_tick_ = 0;
};

}  // namespace teleop
