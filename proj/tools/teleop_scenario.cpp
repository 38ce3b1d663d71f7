// Generates a seeded target sequence.
#include <cstdio>

#include <CLI11.hpp>

#include "teleop/scenario_io.hpp"

using namespace teleop;

int main(int argc, char** argv) {
  CLI::App app{"Generate a lifting or sliding scenario"};
  std::string task = "lifting", out;
  int count = 8;
  std::uint64_t seed = 1;
  double timeout = 120.0;
  app.add_option("--task", task, "lifting | sliding")->check(CLI::IsMember({"lifting", "sliding"}));
  app.add_option("--count", count, "Number of targets")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--timeout", timeout, "Per-target timeout [s]")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Output JSON file")->required();
  CLI11_PARSE(app, argc, argv);

  try {
    ScenarioFile file;
    file.scenario = generate_scenario(task_type_from_string(task), count, seed, WorkspaceBounds{});
    file.session.timeout_s = timeout;
    save_scenario_file(file, out);
    std::printf("wrote %d %s targets to %s\n", count, task.c_str(), out.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "teleop_scenario: %s\n", e.what());
    return 2;
  }
}
