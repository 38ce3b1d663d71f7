// Headless trial runner and WebSocket gateway.
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "teleop/gateway.hpp"
#include "teleop/harness.hpp"
#include "teleop/scenario_io.hpp"
#include "teleop/trace.hpp"

using namespace teleop;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

bool all_completed(const Scenario& scenario, const std::vector<TrialRecord>& records) {
  std::size_t done = 0;
  for (const auto& r : records) done += r.completed ? 1 : 0;
  return done == scenario.targets.size();
}

void print_summary(const std::vector<TrialRecord>& records) {
  for (const auto& r : records) {
    std::printf("target %d: %s in %.3f s, drops %d, flips %d\n", r.target_index,
                r.completed ? "completed" : "timed out", r.completion_time, r.drop_count, r.flip_count);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-arm impedance teleoperation simulator"};
  std::string scenario_path, policy_name = "scripted-lift", condition_name = "vis", out_path;
  std::string trace_path, record_trace_path, state_log_path, address = "127.0.0.1";
  std::uint64_t seed = 0;
  bool headless = false, lockstep = false;
  double squeeze_depth = ScriptedPolicyParams{}.squeeze_depth;
  double timeout = 0.0;
  unsigned short port = 8765;

  app.add_option("--scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  app.add_flag("--headless", headless, "Run a scripted or replayed trial without a network operator");
  app.add_option("--policy", policy_name, "scripted-lift | scripted-slide | replay")
      ->check(CLI::IsMember({"scripted-lift", "scripted-slide", "replay"}));
  app.add_option("--trace", trace_path, "Input trace to replay (with --policy replay)");
  app.add_option("--condition", condition_name, "vis | novis")->check(CLI::IsMember({"vis", "novis"}));
  auto* seed_opt = app.add_option("--seed", seed, "Seed (defaults to the scenario seed)");
  app.add_option("--out", out_path, "Write trial records as CSV");
  app.add_option("--squeeze-depth", squeeze_depth, "Scripted grasp squeeze depth [m]")->check(CLI::NonNegativeNumber);
  app.add_option("--timeout", timeout, "Per-target timeout [s] (overrides the scenario)")->check(CLI::PositiveNumber);
  app.add_option("--record-trace", record_trace_path, "Write the applied operator inputs as a trace");
  app.add_option("--state-log", state_log_path, "Write the per-tick physical state (headless only)");
  app.add_option("--port", port, "Gateway port (0 picks one)");
  app.add_option("--address", address, "Gateway bind address");
  app.add_flag("--lockstep", lockstep, "Gateway: advance virtual time only on client frames");
  CLI11_PARSE(app, argc, argv);

  try {
    ScenarioFile file = load_scenario_file(scenario_path);
    if (timeout > 0.0) file.session.timeout_s = timeout;
    if (!seed_opt->count()) seed = file.scenario.seed;
    const Condition condition = condition_from_string(condition_name);

    if (headless) {
      std::unique_ptr<OperatorPolicy> policy;
      if (policy_name == "replay") {
        if (trace_path.empty()) throw std::invalid_argument("--policy replay needs --trace");
        policy = std::make_unique<ReplayPolicy>(load_trace(trace_path));
      } else {
        ScriptedPolicyParams params;
        params.squeeze_depth = squeeze_depth;
        policy = make_scripted_policy(policy_name, params);
      }
      TrialOptions options;
      options.session = file.session;
      options.record_physics = !state_log_path.empty();
      const TrialResult result = run_trial_detailed(file.scenario, *policy, condition, seed, options);
      if (!out_path.empty()) export_csv(result.records, out_path);
      if (!record_trace_path.empty()) save_trace(result.inputs, record_trace_path);
      if (!state_log_path.empty()) {
        std::ofstream log(state_log_path, std::ios::binary);
        if (!log) throw std::runtime_error("cannot open " + state_log_path + " for writing");
        log << result.physics_log;
      }
      print_summary(result.records);
      return all_completed(file.scenario, result.records) ? 0 : 1;
    }

    GatewayOptions options;
    options.address = address;
    options.port = port;
    options.lockstep = lockstep;
    Gateway gateway(Session(file.scenario, file.session, condition, seed), options);
    gateway.start();
    std::printf("serving ws://%s:%u/session (%s)\n", address.c_str(), gateway.port(),
                lockstep ? "lockstep" : "wall clock");
    std::fflush(stdout);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    gateway.stop();
    const auto& records = gateway.session().records();
    if (!out_path.empty()) export_csv(records, out_path);
    if (!record_trace_path.empty()) save_trace(gateway.session().input_log(), record_trace_path);
    print_summary(records);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "teleop_sim: %s\n", e.what());
    return 2;
  }
}
