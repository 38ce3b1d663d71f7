#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "teleop/protocol.hpp"
#include "teleop/session.hpp"

namespace teleop {

struct GatewayOptions {
  std::string address = "127.0.0.1";
  /// 0 picks a free port; see Gateway::port().
  unsigned short port = 8765;
  /// Virtual time driven by the client: input and advance frames move the
  /// clock forward, nothing else does. Otherwise the sim follows the wall clock.
  bool lockstep = false;
  double snapshot_rate_hz = 60.0;
  /// Largest single jump of virtual time accepted in lockstep mode.
  double max_advance_s = 600.0;
  /// Catch-up bound per scheduling pass in wall-clock mode.
  int max_catch_up_ticks = 250;
};

/// Serves one Session over a WebSocket at /session. A simulation thread owns
/// the session; the network thread talks to it only through an inbound and an
/// outbound queue.
class Gateway {
 public:
  Gateway(Session session, GatewayOptions options);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds and starts both threads. Throws std::runtime_error if the port cannot be bound.
  void start();
  /// Stops both threads; idempotent. The session is then safe to inspect.
  void stop();

  unsigned short port() const { return bound_port_; }
  bool running() const { return running_; }

  /// Thread-safe copies.
  std::vector<TrialRecord> records() const;
  std::optional<StateSnapshot> latest_snapshot() const;
  bool trial_done() const;

  /// Only valid after stop().
  const Session& session() const;

  // Used by the connection handler (network thread).
  struct Disconnect {};
  using Inbound = std::variant<InputMessage, ControlMessage, AdvanceFrame, Disconnect>;
  void push_inbound(Inbound item);
  /// Frames waiting to be written to the client.
  std::deque<std::string> take_outbound();

  struct Impl;

 private:
  void sim_loop();
  bool step_once();
  void advance_to(double t);
  void emit(std::string frame);
  void publish();

  Session session_;
  GatewayOptions options_;
  std::unique_ptr<Impl> impl_;
  std::thread io_thread_;
  std::thread sim_thread_;
  std::atomic<bool> running_{false};
  std::atomic<bool> stop_requested_{false};
  unsigned short bound_port_ = 0;

  std::mutex inbound_mutex_;
  std::condition_variable inbound_cv_;
  std::deque<Inbound> inbound_;

  std::mutex outbound_mutex_;
  std::deque<std::string> outbound_;

  mutable std::mutex state_mutex_;
  std::vector<TrialRecord> records_;
  std::optional<StateSnapshot> latest_;
  bool trial_done_ = false;

  // Simulation-thread state.
  std::size_t records_sent_ = 0;
  std::int64_t last_snapshot_slot_ = -1;
  bool faulted_ = false;
};

}  // namespace teleop
