#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "teleop/harness.hpp"
#include "teleop/scenario_io.hpp"
#include "teleop/trace.hpp"

using namespace teleop;

namespace {

Scenario lift_scenario(double clearance = 0.2) {
  Scenario s;
  s.task_type = TaskType::kLifting;
  TargetSpec t;
  t.pose = Pose(Vec3(0.55, 0.05, 0.1 + clearance), rot_z(0.6));
  s.targets = {t};
  return s;
}

SessionConfig short_timeout(double seconds) {
  SessionConfig c;
  c.timeout_s = seconds;
  return c;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("teleop_test_" + name);
}

std::string csv_of(const std::vector<TrialRecord>& records) {
  std::ostringstream out;
  write_csv(records, out);
  return out.str();
}

}  // namespace

TEST_CASE("scripted lift with a firm squeeze completes a lifting target") {
  ScriptedPolicyParams p;
  p.squeeze_depth = 0.05;
  ScriptedGraspPolicy policy(TaskType::kLifting, p);
  TrialOptions o;
  o.session = short_timeout(30.0);
  o.snapshot_stride = 10;
  const TrialResult r = run_trial_detailed(lift_scenario(), policy, Condition::kVis, 1, o);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].completed);
  CHECK(r.records[0].completion_time > 0.0);
  CHECK(r.records[0].completion_time < 30.0);
  CHECK(r.records[0].drop_count == 0);
  CHECK(r.records[0].flip_count == 0);
  // The box really was carried: at least 0.1 m above its resting height.
  double highest = 0.0;
  for (const auto& s : r.snapshots) highest = std::max(highest, s.box.p.z() - 0.1);
  CHECK(highest >= 0.1);
}

TEST_CASE("scripted lift with a weak squeeze slips and drops the box") {
  ScriptedPolicyParams p;
  p.squeeze_depth = 0.015;
  ScriptedGraspPolicy policy(TaskType::kLifting, p);
  const auto records = run_trial(lift_scenario(), policy, Condition::kVis, 1, short_timeout(15.0));
  REQUIRE(records.size() == 1);
  CHECK_FALSE(records[0].completed);
  CHECK(records[0].drop_count >= 1);
}

TEST_CASE("scripted lift with no squeeze never lifts and times out") {
  ScriptedPolicyParams p;
  p.squeeze_depth = 0.0;
  ScriptedGraspPolicy policy(TaskType::kLifting, p);
  TrialOptions o;
  o.session = short_timeout(8.0);
  o.snapshot_stride = 10;
  const TrialResult r = run_trial_detailed(lift_scenario(), policy, Condition::kVis, 1, o);
  REQUIRE(r.records.size() == 1);
  CHECK_FALSE(r.records[0].completed);
  CHECK(r.records[0].completion_time == doctest::Approx(8.0));
  for (const auto& s : r.snapshots) CHECK(s.box.p.z() < 0.1 + 1e-3);
}

TEST_CASE("scripted slide completes sliding targets without lifting") {
  const Scenario s = generate_scenario(TaskType::kSliding, 3, 11, WorkspaceBounds{});
  ScriptedGraspPolicy policy(TaskType::kSliding);
  TrialOptions o;
  o.session = short_timeout(30.0);
  o.snapshot_stride = 10;
  const TrialResult r = run_trial_detailed(s, policy, Condition::kNovis, 2, o);
  REQUIRE(r.records.size() == 3);
  for (const auto& rec : r.records) {
    CHECK(rec.completed);
    CHECK(rec.task_type == TaskType::kSliding);
    CHECK(rec.condition == Condition::kNovis);
  }
  for (const auto& snap : r.snapshots) CHECK(snap.box.p.z() < 0.1 + 2e-3);
}

TEST_CASE("empty scenario yields no records") {
  ScriptedGraspPolicy policy(TaskType::kLifting);
  Scenario empty;
  const TrialResult r = run_trial_detailed(empty, policy, Condition::kVis, 0);
  CHECK(r.records.empty());
  CHECK(r.ticks == 0);
}

TEST_CASE("completion time is exactly elapsed ticks times dt") {
  ScriptedGraspPolicy policy(TaskType::kLifting);
  TrialOptions o;
  o.session = short_timeout(30.0);
  const TrialResult r = run_trial_detailed(lift_scenario(), policy, Condition::kVis, 5, o);
  REQUIRE(r.records.size() == 1);
  REQUIRE(r.records[0].completed);
  // The only target is presented at tick 0 and the run stops on its completion tick.
  CHECK(r.records[0].completion_time == static_cast<double>(r.ticks) * o.session.sim.dt);
}

TEST_CASE("runs are deterministic in the seed") {
  const Scenario s = generate_scenario(TaskType::kLifting, 2, 3, WorkspaceBounds{});
  auto run = [&](std::uint64_t seed) {
    ScriptedGraspPolicy policy(TaskType::kLifting);
    TrialOptions o;
    o.session = short_timeout(30.0);
    o.record_physics = true;
    return run_trial_detailed(s, policy, Condition::kVis, seed, o);
  };
  const TrialResult a = run(9), b = run(9), c = run(10);
  CHECK(csv_of(a.records) == csv_of(b.records));
  CHECK(a.physics_log == b.physics_log);
  CHECK(a.physics_log != c.physics_log);
}

TEST_CASE("vis and novis give identical physics for scripted runs") {
  const Scenario s = generate_scenario(TaskType::kSliding, 2, 8, WorkspaceBounds{});
  auto run = [&](Condition c) {
    ScriptedGraspPolicy policy(TaskType::kSliding);
    TrialOptions o;
    o.session = short_timeout(30.0);
    o.record_physics = true;
    return run_trial_detailed(s, policy, c, 4, o);
  };
  const TrialResult v = run(Condition::kVis), n = run(Condition::kNovis);
  CHECK(v.physics_log == n.physics_log);
  REQUIRE(v.records.size() == n.records.size());
  for (std::size_t i = 0; i < v.records.size(); ++i) {
    CHECK(v.records[i].completion_time == n.records[i].completion_time);
  }
}

TEST_CASE("replaying the recorded inputs reproduces the trial") {
  const Scenario s = generate_scenario(TaskType::kLifting, 2, 21, WorkspaceBounds{});
  ScriptedGraspPolicy policy(TaskType::kLifting);
  TrialOptions o;
  o.session = short_timeout(30.0);
  o.record_physics = true;
  const TrialResult live = run_trial_detailed(s, policy, Condition::kVis, 6, o);

  // Through the on-disk trace format.
  std::stringstream buf;
  write_trace(live.inputs, buf);
  ReplayPolicy replay(parse_trace(buf));
  const TrialResult again = run_trial_detailed(s, replay, Condition::kVis, 6, o);
  CHECK(csv_of(again.records) == csv_of(live.records));
  CHECK(again.physics_log == live.physics_log);
  CHECK(replay.exhausted());
}

TEST_CASE("CSV export") {
  SUBCASE("empty list writes only the header") {
    const auto path = temp_path("empty.csv");
    export_csv({}, path);
    std::ifstream in(path);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 1);
    CHECK(import_csv(path).empty());
  }
  SUBCASE("N records give N+1 lines and re-parse exactly") {
    std::mt19937_64 rng(71);
    std::vector<TrialRecord> records;
    for (int i = 0; i < 25; ++i) {
      TrialRecord r;
      r.agent_id = "p" + std::to_string(rng() % 100);
      r.condition = rng() % 2 ? Condition::kVis : Condition::kNovis;
      r.task_type = rng() % 2 ? TaskType::kLifting : TaskType::kSliding;
      r.target_index = i;
      r.completed = rng() % 3 != 0;
      r.completion_time = oracle::uniform(rng, 0.001, 120.0);
      r.drop_count = static_cast<int>(rng() % 4);
      r.flip_count = static_cast<int>(rng() % 2);
      records.push_back(r);
    }
    const auto path = temp_path("records.csv");
    export_csv(records, path);
    std::ifstream in(path);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 26);
    CHECK(import_csv(path) == records);
  }
  SUBCASE("unwritable path is an error") {
    CHECK_THROWS_AS(export_csv({}, "/nonexistent-dir/records.csv"), std::runtime_error);
  }
  SUBCASE("malformed content is rejected") {
    std::istringstream bad_header("a,b,c\n");
    CHECK_THROWS_AS(parse_csv(bad_header), std::invalid_argument);
    std::istringstream bad_row(std::string(kRecordCsvHeader) + "\nx,vis,lifting,zero,1,1.0,0,0\n");
    CHECK_THROWS_AS(parse_csv(bad_row), std::invalid_argument);
  }
}

TEST_CASE("trace files") {
  InputMessage m;
  m.timestamp = 0.125;
  m.hand = Hand::kRight;
  m.state.pose = Pose(Vec3(0.1, -0.2, 0.3), rot_y(0.3));
  m.state.twist.v = Vec3(1e-17, 2, 3);
  m.state.twist.w = Vec3(-1, 0.5, 1.0 / 3.0);
  m.clutch = true;
  std::stringstream buf;
  write_trace({m, m}, buf);
  const auto back = parse_trace(buf);
  REQUIRE(back.size() == 2);
  CHECK(back[0].timestamp == m.timestamp);
  CHECK(back[0].hand == Hand::kRight);
  CHECK(back[0].state.pose.p == m.state.pose.p);
  CHECK(back[0].state.pose.q.coeffs() == m.state.pose.q.coeffs());
  CHECK(back[0].state.twist.w == m.state.twist.w);
  CHECK(back[0].clutch);

  std::istringstream backwards(std::string(kTraceHeader) +
                               "\n1,left,0,0,0,1,0,0,0,0,0,0,0,0,0,1\n0.5,left,0,0,0,1,0,0,0,0,0,0,0,0,0,1\n");
  CHECK_THROWS_AS(parse_trace(backwards), std::invalid_argument);
  std::vector<InputMessage> unordered{m, m};
  unordered[1].timestamp = 0.0;
  CHECK_THROWS_AS(ReplayPolicy{unordered}, std::invalid_argument);
}

TEST_CASE("scenario files round-trip") {
  ScenarioFile f;
  f.scenario = generate_scenario(TaskType::kLifting, 4, 17, WorkspaceBounds{});
  f.session.timeout_s = 45.0;
  f.session.sim.contact.mu = 0.6;
  f.session.sim.clamp_enabled = false;
  const auto path = temp_path("scenario.json");
  save_scenario_file(f, path);
  const ScenarioFile g = load_scenario_file(path);
  REQUIRE(g.scenario.targets.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(g.scenario.targets[i].pose.p == f.scenario.targets[i].pose.p);
    CHECK(g.scenario.targets[i].pose.q.coeffs() == f.scenario.targets[i].pose.q.coeffs());
  }
  CHECK(g.scenario.seed == 17);
  CHECK(g.session.timeout_s == 45.0);
  CHECK(g.session.sim.contact.mu == 0.6);
  CHECK_FALSE(g.session.sim.clamp_enabled);

  CHECK_THROWS_AS(scenario_from_json(nlohmann::json::parse(R"({"targets": []})")), std::invalid_argument);
  CHECK_THROWS_AS(scenario_from_json(nlohmann::json::parse(
                      R"({"task_type": "lifting", "targets": [{"position": [0, 0]}]})")),
                  std::invalid_argument);
  const Scenario minimal = scenario_from_json(nlohmann::json::parse(
      R"({"task_type": "sliding", "targets": [{"position": [0.5, 0, 0.1], "yaw": 0.5}]})"));
  CHECK(minimal.targets[0].pos_tol == kDefaultPositionTolerance);
  CHECK(yaw_of(minimal.targets[0].pose.q) == doctest::Approx(0.5));
}

TEST_CASE("make_scripted_policy names") {
  CHECK(make_scripted_policy("scripted-lift") != nullptr);
  CHECK(make_scripted_policy("scripted-slide") != nullptr);
  CHECK_THROWS_AS(make_scripted_policy("replay"), std::invalid_argument);
}

TEST_CASE("min_jerk profile") {
  CHECK(min_jerk(0.0) == 0.0);
  CHECK(min_jerk(1.0) == 1.0);
  CHECK(min_jerk(0.5) == doctest::Approx(0.5));
  CHECK(min_jerk(2.0) == 1.0);
}
