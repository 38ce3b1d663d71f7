#include "teleop/harness.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace teleop {

TrialResult run_trial_detailed(const Scenario& scenario, OperatorPolicy& policy, Condition condition,
                               std::uint64_t seed, const TrialOptions& options) {
  Session session(scenario, options.session, condition, seed);
  TrialResult result;
  session.start();
  // Hard stop well past the point where every target must have timed out.
  const double horizon = options.session.timeout_s * static_cast<double>(scenario.targets.size() + 1);
  const auto max_ticks = static_cast<std::int64_t>(horizon / options.session.sim.dt) + 1;
  while (!session.done() && result.ticks < max_ticks) {
    for (const auto& input : policy.act(session.observe())) session.apply(input);
    session.step();
    ++result.ticks;
    if (options.record_physics) {
      result.physics_log += session.physics_line();
      result.physics_log += '\n';
    }
    if (options.snapshot_stride > 0 && session.tick() % options.snapshot_stride == 0) {
      result.snapshots.push_back(session.snapshot());
    }
  }
  result.records = session.records();
  result.inputs = session.input_log();
  return result;
}

std::vector<TrialRecord> run_trial(const Scenario& scenario, OperatorPolicy& policy, Condition condition,
                                   std::uint64_t seed, const SessionConfig& config) {
  TrialOptions options;
  options.session = config;
  return run_trial_detailed(scenario, policy, condition, seed, options).records;
}

std::unique_ptr<OperatorPolicy> make_scripted_policy(std::string_view name,
                                                     const ScriptedPolicyParams& params) {
  if (name == "scripted-lift") return std::make_unique<ScriptedGraspPolicy>(TaskType::kLifting, params);
  if (name == "scripted-slide") return std::make_unique<ScriptedGraspPolicy>(TaskType::kSliding, params);
  throw std::invalid_argument("unknown scripted policy '" + std::string(name) +
                              "' (expected scripted-lift|scripted-slide)");
}

void write_csv(const std::vector<TrialRecord>& records, std::ostream& out) {
  out << kRecordCsvHeader << '\n';
  char buf[64];
  for (const auto& r : records) {
    if (r.agent_id.find_first_of(",\"\n\r") != std::string::npos) {
      throw std::invalid_argument("export_csv: agent id may not contain commas, quotes or newlines");
    }
    std::snprintf(buf, sizeof buf, "%.17g", r.completion_time);
    out << r.agent_id << ',' << to_string(r.condition) << ',' << to_string(r.task_type) << ','
        << r.target_index << ',' << (r.completed ? 1 : 0) << ',' << buf << ',' << r.drop_count << ','
        << r.flip_count << '\n';
  }
}

void export_csv(const std::vector<TrialRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("export_csv: cannot open " + path.string() + " for writing");
  write_csv(records, out);
  out.flush();
  if (!out) throw std::runtime_error("export_csv: write to " + path.string() + " failed");
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int parse_int(const std::string& s, const char* what) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw std::invalid_argument(std::string("csv: bad ") + what + " '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const char* what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw std::invalid_argument(std::string("csv: bad ") + what + " '" + s + "'");
  return v;
}

}  // namespace

std::vector<TrialRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRecordCsvHeader) throw std::invalid_argument("csv: unexpected header '" + line + "'");
  std::vector<TrialRecord> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 8) throw std::invalid_argument("csv: expected 8 columns in '" + line + "'");
    TrialRecord r;
    r.agent_id = cells[0];
    r.condition = condition_from_string(cells[1]);
    r.task_type = task_type_from_string(cells[2]);
    r.target_index = parse_int(cells[3], "target_index");
    const int completed = parse_int(cells[4], "completed");
    if (completed != 0 && completed != 1) throw std::invalid_argument("csv: completed must be 0 or 1");
    r.completed = completed == 1;
    r.completion_time = parse_double(cells[5], "completion_time_s");
    r.drop_count = parse_int(cells[6], "drop_count");
    r.flip_count = parse_int(cells[7], "flip_count");
    out.push_back(r);
  }
  return out;
}

std::vector<TrialRecord> import_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("import_csv: cannot open " + path.string());
  return parse_csv(in);
}

}  // namespace teleop
