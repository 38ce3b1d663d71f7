#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "teleop/session.hpp"
#include "teleop/tasks.hpp"

namespace teleop {

/// A scenario together with the world and session settings it runs under.
struct ScenarioFile {
  Scenario scenario;
  SessionConfig session;
};

nlohmann::json scenario_to_json(const Scenario& scenario);
/// Throws std::invalid_argument on missing or ill-typed fields.
Scenario scenario_from_json(const nlohmann::json& j);

nlohmann::json scenario_file_to_json(const ScenarioFile& file);
/// Optional "world" and "session" sections override the defaults.
ScenarioFile scenario_file_from_json(const nlohmann::json& j);

ScenarioFile load_scenario_file(const std::filesystem::path& path);
void save_scenario_file(const ScenarioFile& file, const std::filesystem::path& path);

}  // namespace teleop
