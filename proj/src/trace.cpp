#include "teleop/trace.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace teleop {

void write_trace(const std::vector<InputMessage>& trace, std::ostream& out) {
  out << kTraceHeader << '\n';
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ',' << buf;
  };
  for (const auto& m : trace) {
    std::snprintf(buf, sizeof buf, "%.17g", m.timestamp);
    out << buf << ',' << to_string(m.hand);
    const Pose& p = m.state.pose;
    num(p.p.x());
    num(p.p.y());
    num(p.p.z());
    num(p.q.w());
    num(p.q.x());
    num(p.q.y());
    num(p.q.z());
    for (int k = 0; k < 3; ++k) num(m.state.twist.v[k]);
    for (int k = 0; k < 3; ++k) num(m.state.twist.w[k]);
    out << ',' << (m.clutch ? 1 : 0) << '\n';
  }
}

void save_trace(const std::vector<InputMessage>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_trace: cannot open " + path.string() + " for writing");
  write_trace(trace, out);
  out.flush();
  if (!out) throw std::runtime_error("save_trace: write to " + path.string() + " failed");
}

std::vector<InputMessage> parse_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("trace: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw std::invalid_argument("trace: unexpected header '" + line + "'");

  std::vector<InputMessage> out;
  std::array<std::optional<double>, 2> last;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 16) {
      throw std::invalid_argument("trace: row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " columns, expected 16");
    }
    std::array<double, 15> v{};
    for (int k = 0; k < 15; ++k) {
      if (k == 1) continue;
      std::size_t pos = 0;
      try {
        v[k] = std::stod(cells[k], &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != cells[k].size()) {
        throw std::invalid_argument("trace: row " + std::to_string(row) + ": bad number '" + cells[k] + "'");
      }
    }
    InputMessage m;
    m.timestamp = v[0];
    m.hand = hand_from_string(cells[1]);
    m.state.pose.p = Vec3(v[2], v[3], v[4]);
    m.state.pose.q = Quat(v[5], v[6], v[7], v[8]);
    m.state.twist.v = Vec3(v[9], v[10], v[11]);
    m.state.twist.w = Vec3(v[12], v[13], v[14]);
    if (cells[15] != "0" && cells[15] != "1") {
      throw std::invalid_argument("trace: row " + std::to_string(row) + ": clutch must be 0 or 1");
    }
    m.clutch = cells[15] == "1";
    const int i = static_cast<int>(m.hand);
    if (last[i] && m.timestamp < *last[i]) {
      throw std::invalid_argument("trace: row " + std::to_string(row) + ": timestamp goes backwards");
    }
    last[i] = m.timestamp;
    out.push_back(m);
  }
  return out;
}

std::vector<InputMessage> load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_trace: cannot open " + path.string());
  return parse_trace(in);
}

}  // namespace teleop
