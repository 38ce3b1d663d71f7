#include <doctest.h>

#include <chrono>
#include <json.hpp>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "teleop/gateway.hpp"
#include "teleop/harness.hpp"

using namespace teleop;

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using namespace std::chrono_literals;

namespace {

/// Minimal blocking client; reads give up after a timeout.
class Client {
 public:
  explicit Client(unsigned short port, const std::string& path = "/session") : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    beast::get_lowest_layer(ws_).connect(resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", path);
    ws_.text(true);
  }

  void send(const std::string& text) { ws_.write(net::buffer(text)); }

  /// Next frame, or nullopt on timeout or close.
  std::optional<std::string> read(std::chrono::milliseconds timeout = 2000ms) {
    std::optional<std::string> out;
    bool done = false;
    ws_.async_read(buffer_, [&](beast::error_code ec, std::size_t) {
      done = true;
      if (!ec) out = beast::buffers_to_string(buffer_.data());
      buffer_.consume(buffer_.size());
    });
    ioc_.restart();
    ioc_.run_for(timeout);
    if (!done) {
      beast::get_lowest_layer(ws_).cancel();
      ioc_.restart();
      ioc_.run();
    }
    return out;
  }

  /// Reads until a frame of `type` arrives; other frames are passed to `seen`.
  template <class F>
  std::optional<ServerFrame> read_until(const std::string& type, F&& seen,
                                        std::chrono::milliseconds timeout = 5000ms) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      auto text = read(std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now()));
      if (!text) return std::nullopt;
      if (nlohmann::json::parse(*text)["type"] == type) return decode_server_frame(*text);
      seen(*text);
    }
    return std::nullopt;
  }

  void close() {
    beast::error_code ignored;
    ws_.close(websocket::close_code::normal, ignored);
  }

 private:
  net::io_context ioc_;
  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
};

Scenario test_scenario() { return generate_scenario(TaskType::kLifting, 1, 13, WorkspaceBounds{}); }

GatewayOptions options(bool lockstep) {
  GatewayOptions o;
  o.port = 0;
  o.lockstep = lockstep;
  return o;
}

SessionConfig config() {
  SessionConfig c;
  c.timeout_s = 30.0;
  return c;
}

}  // namespace

TEST_CASE("without input the streamed effector targets stay frozen") {
  Gateway g(Session(test_scenario(), config(), Condition::kVis, 1), options(false));
  g.start();
  Client c(g.port());
  std::vector<StateSnapshot> snaps;
  while (snaps.size() < 15) {
    auto text = c.read();
    REQUIRE(text.has_value());
    auto f = decode_server_frame(*text);
    if (auto* s = std::get_if<StateSnapshot>(&f)) snaps.push_back(*s);
  }
  for (const auto& s : snaps) {
    for (int i = 0; i < 2; ++i) {
      REQUIRE(s.effectors[i].target.has_value());
      CHECK(s.effectors[i].target->p == snaps.front().effectors[i].target->p);
    }
  }
  // Roughly 60 Hz of simulated time between consecutive snapshots.
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    const double gap = snaps[k].clock - snaps[k - 1].clock;
    CHECK(gap > 0.0);
    CHECK(gap <= 1.0 / 60.0 + 1e-3 + 1e-9);
  }
  c.close();
  g.stop();
}

TEST_CASE("snapshot offsets on the wire equal target minus pose") {
  Gateway g(Session(test_scenario(), config(), Condition::kVis, 1), options(false));
  g.start();
  Client c(g.port());
  InputMessage m;
  m.hand = Hand::kLeft;
  m.clutch = true;
  c.send(encode_input(m));
  m.timestamp = 0.05;
  m.state.pose.p = Vec3(0.03, -0.01, 0.02);
  c.send(encode_input(m));
  int checked = 0;
  while (checked < 10) {
    auto text = c.read();
    REQUIRE(text.has_value());
    const auto j = nlohmann::json::parse(*text);
    if (j["type"] != "snapshot") continue;
    for (const auto& e : j["effectors"]) {
      REQUIRE(e.contains("offset"));
      for (int k = 0; k < 3; ++k) {
        CHECK(e["offset"][k].get<double>() ==
              e["target"]["p"][k].get<double>() - e["pose"]["p"][k].get<double>());
      }
    }
    ++checked;
  }
  c.close();
  g.stop();
}

TEST_CASE("a malformed frame gets one error and the stream continues") {
  Gateway g(Session(test_scenario(), config(), Condition::kVis, 1), options(true));
  g.start();
  Client c(g.port());
  c.send("{not json");
  auto text = c.read();
  REQUIRE(text.has_value());
  auto f = decode_server_frame(*text);
  REQUIRE(std::holds_alternative<ErrorFrame>(f));
  CHECK(std::get<ErrorFrame>(f).code == "malformed");

  c.send(R"({"v":7,"type":"advance","t":1})");
  text = c.read();
  REQUIRE(text.has_value());
  CHECK(std::get<ErrorFrame>(decode_server_frame(*text)).code == "version");

  c.send(encode_advance({0.1}));
  int snapshots = 0, errors = 0;
  while (auto t = c.read(300ms)) {
    auto frame = decode_server_frame(*t);
    if (std::holds_alternative<StateSnapshot>(frame)) ++snapshots;
    if (std::holds_alternative<ErrorFrame>(frame)) ++errors;
  }
  CHECK(snapshots == 7);  // slots 0..6 of 60 Hz within 0.1 s
  CHECK(errors == 0);
  c.close();
  g.stop();
  CHECK(g.session().tick() == 100);
}

TEST_CASE("lockstep live session reproduces the headless replay") {
  const Scenario sc = test_scenario();
  ScriptedGraspPolicy policy(TaskType::kLifting);
  TrialOptions o;
  o.session = config();
  o.record_physics = true;
  const TrialResult headless = run_trial_detailed(sc, policy, Condition::kVis, 4, o);
  REQUIRE(headless.records.size() == 1);
  REQUIRE(headless.records[0].completed);

  Gateway g(Session(sc, config(), Condition::kVis, 4), options(true));
  g.start();
  Client c(g.port());
  c.send(encode_control({ControlCommand::kStart, std::nullopt, std::nullopt}));
  for (const auto& m : headless.inputs) c.send(encode_input(m));
  c.send(encode_advance({static_cast<double>(headless.ticks + 10) * config().sim.dt}));
  int errors = 0;
  auto rec = c.read_until("record", [&](const std::string& t) {
    if (nlohmann::json::parse(t)["type"] == "error") ++errors;
  });
  REQUIRE(rec.has_value());
  CHECK(std::get<TrialRecord>(*rec) == headless.records[0]);
  CHECK(errors == 0);
  c.close();
  g.stop();
  CHECK(g.session().records() == headless.records);
}

TEST_CASE("disconnect releases the clutch and freezes the targets") {
  Gateway g(Session(test_scenario(), config(), Condition::kVis, 1), options(false));
  g.start();
  {
    Client c(g.port());
    InputMessage m;
    m.hand = Hand::kRight;
    m.clutch = true;
    c.send(encode_input(m));
    m.timestamp = 0.02;
    m.state.pose.p = Vec3(0.0, 0.0, 0.04);
    c.send(encode_input(m));
    std::this_thread::sleep_for(100ms);
    REQUIRE(g.latest_snapshot()->effectors[1].clutch);
    c.close();
  }
  std::this_thread::sleep_for(200ms);
  const StateSnapshot a = *g.latest_snapshot();
  std::this_thread::sleep_for(300ms);
  const StateSnapshot b = *g.latest_snapshot();
  CHECK(b.tick > a.tick);
  for (int i = 0; i < 2; ++i) {
    CHECK_FALSE(b.effectors[i].clutch);
    CHECK(b.effectors[i].target->p == a.effectors[i].target->p);
  }
  // A new operator can connect afterwards.
  Client again(g.port());
  auto text = again.read();
  REQUIRE(text.has_value());
  CHECK(std::holds_alternative<StateSnapshot>(decode_server_frame(*text)));
  again.close();
  g.stop();
}

TEST_CASE("a second operator is turned away") {
  Gateway g(Session(test_scenario(), config(), Condition::kVis, 1), options(true));
  g.start();
  Client first(g.port());
  Client second(g.port());
  auto text = second.read();
  REQUIRE(text.has_value());
  auto f = decode_server_frame(*text);
  REQUIRE(std::holds_alternative<ErrorFrame>(f));
  CHECK(std::get<ErrorFrame>(f).code == "busy");
  CHECK_FALSE(second.read(500ms).has_value());
  // The first one is unaffected.
  first.send(encode_advance({0.02}));
  text = first.read();
  REQUIRE(text.has_value());
  CHECK(std::holds_alternative<StateSnapshot>(decode_server_frame(*text)));
  first.close();
  g.stop();
}

TEST_CASE("other paths get 404") {
  Gateway g(Session(test_scenario(), config(), Condition::kVis, 1), options(true));
  g.start();
  net::io_context ioc;
  beast::tcp_stream stream(ioc);
  tcp::resolver resolver(ioc);
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(g.port())));
  http::request<http::empty_body> req(http::verb::get, "/other", 11);
  req.set(http::field::host, "127.0.0.1");
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  CHECK(res.result() == http::status::not_found);
  CHECK_THROWS(Client(g.port(), "/elsewhere"));
  g.stop();
}

TEST_CASE("invalid inputs are reported, not fatal") {
  Gateway g(Session(test_scenario(), config(), Condition::kVis, 1), options(true));
  g.start();
  Client c(g.port());
  InputMessage m;
  m.timestamp = 1.0;
  c.send(encode_input(m));
  m.timestamp = 0.5;
  c.send(encode_input(m));
  auto err = c.read_until("error", [](const std::string&) {});
  REQUIRE(err.has_value());
  CHECK(std::get<ErrorFrame>(*err).code == "invalid");
  c.send(encode_control({ControlCommand::kStart, std::nullopt, std::nullopt}));
  c.send(encode_control({ControlCommand::kStart, std::nullopt, std::nullopt}));
  err = c.read_until("error", [](const std::string&) {});
  REQUIRE(err.has_value());
  CHECK(std::get<ErrorFrame>(*err).code == "invalid");
  c.close();
  g.stop();
  CHECK(g.session().state() == TrialState::kRunning);
}
