#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "teleop/session.hpp"

namespace teleop {

/// Input traces are CSV, one hand sample per row:
/// t,hand,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,clutch
inline constexpr std::string_view kTraceHeader = "t,hand,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,clutch";

void write_trace(const std::vector<InputMessage>& trace, std::ostream& out);
void save_trace(const std::vector<InputMessage>& trace, const std::filesystem::path& path);

/// Throws std::invalid_argument on malformed rows or non-monotone timestamps.
std::vector<InputMessage> parse_trace(std::istream& in);
std::vector<InputMessage> load_trace(const std::filesystem::path& path);

}  // namespace teleop
