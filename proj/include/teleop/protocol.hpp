#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "teleop/session.hpp"

namespace teleop {

/// Frames are JSON text messages carrying "v" (schema version) and "type".
/// The schema is described in protocol.md.
inline constexpr int kProtocolVersion = 1;

class ProtocolError : public std::runtime_error {
 public:
  /// `code` is one of "malformed", "version", "invalid".
  ProtocolError(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct ErrorFrame {
  std::string code;
  std::string message;
  bool operator==(const ErrorFrame&) const = default;
};

/// Lockstep mode only: run the simulation until its clock reaches `t`.
struct AdvanceFrame {
  double t = 0.0;
};

using ClientFrame = std::variant<InputMessage, ControlMessage, AdvanceFrame>;
using ServerFrame = std::variant<StateSnapshot, TrialRecord, ErrorFrame>;

std::string encode_input(const InputMessage& m);
std::string encode_control(const ControlMessage& m);
std::string encode_advance(const AdvanceFrame& m);
std::string encode_snapshot(const StateSnapshot& s);
std::string encode_record(const TrialRecord& r);
std::string encode_error(const ErrorFrame& e);

/// Throws ProtocolError. Unknown fields are ignored.
ClientFrame decode_client_frame(std::string_view text);
ServerFrame decode_server_frame(std::string_view text);

/// Convenience wrappers that also check the frame type.
InputMessage decode_input(std::string_view text);
StateSnapshot decode_snapshot(std::string_view text);

}  // namespace teleop
