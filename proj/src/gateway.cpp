#include "teleop/gateway.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace teleop {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

class Connection;

}  // namespace

struct Gateway::Impl {
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::weak_ptr<Connection> active;
};

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Gateway& gateway, std::weak_ptr<Connection>& active)
      : ws_(std::move(socket)), gateway_(gateway), active_(active) {}

  void run() {
    http::async_read(ws_.next_layer(), buffer_, request_,
                     beast::bind_front_handler(&Connection::on_request, shared_from_this()));
  }

  void send(std::string frame) {
    if (closing_) return;
    writes_.push_back(std::move(frame));
    if (writes_.size() == 1 && accepted_) do_write();
  }

  void close() {
    if (!accepted_ || closing_) return;
    closing_ = true;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

 private:
  void on_request(beast::error_code ec, std::size_t) {
    if (ec) return;
    if (!websocket::is_upgrade(request_) || request_.target() != "/session") {
      auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found,
                                                                      request_.version());
      res->set(http::field::content_type, "text/plain");
      res->body() = "websocket endpoint is /session\n";
      res->prepare_payload();
      http::async_write(ws_.next_layer(), *res,
                        [self = shared_from_this(), res](beast::error_code, std::size_t) {
                          beast::error_code ignored;
                          self->ws_.next_layer().socket().shutdown(tcp::socket::shutdown_both, ignored);
                        });
      return;
    }
    beast::get_lowest_layer(ws_).expires_never();
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.text(true);
    ws_.async_accept(request_, beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
  }

  void on_accept(beast::error_code ec) {
    if (ec) return;
    accepted_ = true;
    if (auto other = active_.lock(); other && other.get() != this) {
      // One operator per session.
      writes_.clear();
      writes_.push_back(encode_error({"busy", "another operator is already connected"}));
      close_after_write_ = true;
      do_write();
      return;
    }
    active_ = weak_from_this();
    owner_ = true;
    if (!writes_.empty()) do_write();
    do_read();
  }

  void do_read() {
    ws_.async_read(read_buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      on_gone();
      return;
    }
    const std::string text = beast::buffers_to_string(read_buffer_.data());
    read_buffer_.consume(read_buffer_.size());
    try {
      const ClientFrame frame = decode_client_frame(text);
      std::visit([this](const auto& f) { gateway_.push_inbound(f); }, frame);
    } catch (const ProtocolError& e) {
      send(encode_error({e.code(), e.what()}));
    }
    do_read();
  }

  void do_write() {
    ws_.async_write(net::buffer(writes_.front()),
                    beast::bind_front_handler(&Connection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      on_gone();
      return;
    }
    writes_.pop_front();
    if (!writes_.empty()) {
      do_write();
    } else if (close_after_write_) {
      close();
    }
  }

  void on_gone() {
    if (!owner_) return;
    owner_ = false;
    closing_ = true;
    writes_.clear();
    if (active_.lock().get() == this || active_.expired()) active_.reset();
    gateway_.push_inbound(Gateway::Disconnect{});
  }

  websocket::stream<beast::tcp_stream> ws_;
  Gateway& gateway_;
  std::weak_ptr<Connection>& active_;
  beast::flat_buffer buffer_;
  beast::flat_buffer read_buffer_;
  http::request<http::string_body> request_;
  std::deque<std::string> writes_;
  bool accepted_ = false;
  bool owner_ = false;
  bool closing_ = false;
  bool close_after_write_ = false;
};

void do_accept(Gateway& gateway, Gateway::Impl& impl) {
  impl.acceptor.async_accept(net::make_strand(impl.ioc), [&gateway, &impl](beast::error_code ec, tcp::socket s) {
    if (ec) return;  // acceptor closed
    std::make_shared<Connection>(std::move(s), gateway, impl.active)->run();
    do_accept(gateway, impl);
  });
}

}  // namespace

Gateway::Gateway(Session session, GatewayOptions options)
    : session_(std::move(session)), options_(std::move(options)), impl_(std::make_unique<Impl>()) {
  if (!(options_.snapshot_rate_hz > 0.0)) throw std::invalid_argument("gateway: snapshot rate must be > 0");
  if (!(options_.max_advance_s > 0.0)) throw std::invalid_argument("gateway: max_advance_s must be > 0");
}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
  if (running_) return;
  beast::error_code ec;
  const tcp::endpoint endpoint(net::ip::make_address(options_.address, ec), options_.port);
  if (ec) throw std::runtime_error("gateway: bad address '" + options_.address + "'");
  impl_->acceptor.open(endpoint.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(endpoint, ec);
  if (!ec) impl_->acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw std::runtime_error("gateway: cannot listen on " + options_.address + ":" +
                             std::to_string(options_.port) + ": " + ec.message());
  }
  bound_port_ = impl_->acceptor.local_endpoint().port();
  publish();
  running_ = true;
  stop_requested_ = false;
  do_accept(*this, *impl_);
  io_thread_ = std::thread([this] { impl_->ioc.run(); });
  sim_thread_ = std::thread([this] { sim_loop(); });
}

void Gateway::stop() {
  if (!running_) return;
  stop_requested_ = true;
  inbound_cv_.notify_all();
  if (sim_thread_.joinable()) sim_thread_.join();
  net::post(impl_->ioc, [this] {
    beast::error_code ignored;
    impl_->acceptor.close(ignored);
    if (auto c = impl_->active.lock()) c->close();
  });
  // Give the close handshake a moment, then tear the loop down.
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  impl_->ioc.stop();
  if (io_thread_.joinable()) io_thread_.join();
  running_ = false;
}

const Session& Gateway::session() const {
  if (running_) throw std::logic_error("gateway: session() is only available after stop()");
  return session_;
}

std::vector<TrialRecord> Gateway::records() const {
  std::lock_guard lock(state_mutex_);
  return records_;
}

std::optional<StateSnapshot> Gateway::latest_snapshot() const {
  std::lock_guard lock(state_mutex_);
  return latest_;
}

bool Gateway::trial_done() const {
  std::lock_guard lock(state_mutex_);
  return trial_done_;
}

void Gateway::push_inbound(Inbound item) {
  {
    std::lock_guard lock(inbound_mutex_);
    inbound_.push_back(std::move(item));
  }
  inbound_cv_.notify_one();
}

std::deque<std::string> Gateway::take_outbound() {
  std::lock_guard lock(outbound_mutex_);
  std::deque<std::string> out;
  out.swap(outbound_);
  return out;
}

void Gateway::emit(std::string frame) {
  {
    std::lock_guard lock(outbound_mutex_);
    outbound_.push_back(std::move(frame));
  }
  net::post(impl_->ioc, [this] {
    auto frames = take_outbound();
    auto c = impl_->active.lock();
    if (!c) return;
    for (auto& f : frames) c->send(std::move(f));
  });
}

void Gateway::publish() {
  const StateSnapshot snap = session_.snapshot();
  std::lock_guard lock(state_mutex_);
  latest_ = snap;
  records_ = session_.records();
  trial_done_ = session_.done();
}

bool Gateway::step_once() {
  if (faulted_) return false;
  try {
    session_.step();
  } catch (const SimulationFault& e) {
    faulted_ = true;
    emit(encode_error({"simulation-fault", std::string(e.what()) + "\n" + e.snapshot()}));
    publish();
    return false;
  }
  const auto& recs = session_.records();
  for (; records_sent_ < recs.size(); ++records_sent_) emit(encode_record(recs[records_sent_]));

  const auto slot = static_cast<std::int64_t>(
      std::floor(static_cast<double>(session_.tick()) * session_.world().dt * options_.snapshot_rate_hz));
  if (slot != last_snapshot_slot_) {
    last_snapshot_slot_ = slot;
    const StateSnapshot snap = session_.snapshot();
    emit(encode_snapshot(snap));
    std::lock_guard lock(state_mutex_);
    latest_ = snap;
    records_ = recs;
    trial_done_ = session_.done();
  }
  return true;
}

void Gateway::advance_to(double t) {
  if (t - session_.world().clock > options_.max_advance_s) {
    emit(encode_error({"invalid", "advance beyond " + std::to_string(options_.max_advance_s) +
                                      " s of virtual time in one frame"}));
    return;
  }
  while (session_.world().clock < t && !stop_requested_) {
    if (!step_once()) return;
  }
}

void Gateway::sim_loop() {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const std::int64_t tick0 = session_.tick();
  const double dt = session_.world().dt;

  while (!stop_requested_) {
    std::deque<Inbound> items;
    {
      std::unique_lock lock(inbound_mutex_);
      if (inbound_.empty()) {
        if (options_.lockstep) {
          inbound_cv_.wait(lock, [this] { return stop_requested_ || !inbound_.empty(); });
        } else {
          inbound_cv_.wait_for(lock, std::chrono::microseconds(500));
        }
      }
      items.swap(inbound_);
    }
    for (auto& item : items) {
      std::visit(
          [&](auto& m) {
            using T = std::decay_t<decltype(m)>;
            try {
              if constexpr (std::is_same_v<T, InputMessage>) {
                if (options_.lockstep) advance_to(m.timestamp);
                session_.apply(m);
              } else if constexpr (std::is_same_v<T, ControlMessage>) {
                session_.control(m);
                publish();
              } else if constexpr (std::is_same_v<T, AdvanceFrame>) {
                if (!options_.lockstep) throw std::invalid_argument("advance frames are only accepted in lockstep mode");
                advance_to(m.t);
                publish();
              } else {
                session_.disconnect();
              }
            } catch (const std::invalid_argument& e) {
              emit(encode_error({"invalid", e.what()}));
            }
          },
          item);
    }
    if (!options_.lockstep) {
      const double elapsed = std::chrono::duration<double>(clock::now() - t0).count();
      const auto due = tick0 + static_cast<std::int64_t>(elapsed / dt);
      for (int n = 0; session_.tick() < due && n < options_.max_catch_up_ticks; ++n) {
        if (!step_once()) break;
      }
    }
  }
  publish();
}

}  // namespace teleop
