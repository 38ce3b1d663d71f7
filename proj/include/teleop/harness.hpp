#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "teleop/policy.hpp"
#include "teleop/session.hpp"

namespace teleop {

struct TrialOptions {
  SessionConfig session;
  /// Append Session::physics_line() after every tick.
  bool record_physics = false;
  /// Keep a snapshot every `snapshot_stride` ticks (0 disables).
  int snapshot_stride = 0;
};

struct TrialResult {
  std::vector<TrialRecord> records;
  std::vector<InputMessage> inputs;
  std::string physics_log;
  std::vector<StateSnapshot> snapshots;
  std::int64_t ticks = 0;
};

/// Runs the scenario to the end in lockstep: policy, then inputs, then one tick.
/// Deterministic in (scenario, policy, condition, seed).
TrialResult run_trial_detailed(const Scenario& scenario, OperatorPolicy& policy, Condition condition,
                               std::uint64_t seed, const TrialOptions& options = {});

std::vector<TrialRecord> run_trial(const Scenario& scenario, OperatorPolicy& policy, Condition condition,
                                   std::uint64_t seed, const SessionConfig& config = {});

/// "scripted-lift", "scripted-slide"; replay policies are built from a trace.
std::unique_ptr<OperatorPolicy> make_scripted_policy(std::string_view name,
                                                     const ScriptedPolicyParams& params = {});

inline constexpr std::string_view kRecordCsvHeader =
    "agent_id,condition,task_type,target_index,completed,completion_time_s,drop_count,flip_count";

void write_csv(const std::vector<TrialRecord>& records, std::ostream& out);
/// Throws std::runtime_error if the file cannot be written.
void export_csv(const std::vector<TrialRecord>& records, const std::filesystem::path& path);

/// Throws std::invalid_argument on malformed content.
std::vector<TrialRecord> parse_csv(std::istream& in);
std::vector<TrialRecord> import_csv(const std::filesystem::path& path);

}  // namespace teleop
