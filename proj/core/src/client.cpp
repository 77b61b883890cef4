#include "weldcell/client.hpp"

#include <array>
#include <condition_variable>
#include <deque>
#include <future>
#include <mutex>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <fmt/core.h>

#include "weldcell/error.hpp"

namespace weldcell::msgbus {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

struct Client::Impl : std::enable_shared_from_this<Impl> {
  asio::io_context io;
  std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
  tcp::socket socket{io};
  std::thread thread;
  std::atomic<std::thread::id> io_thread_id{};

  std::array<unsigned char, kPrefixSize> header{};
  std::string body;
  std::deque<std::pair<std::string, std::shared_ptr<std::promise<void>>>> queue;

  std::mutex mutex;  // guards handlers, acks, next_id
  std::condition_variable ack_cv;
  std::set<std::string> subacks;
  std::set<std::string> unsubacks;
  MessageHandler message_handler;
  DisconnectHandler disconnect_handler;
  std::uint64_t next_id{1};
  std::atomic<bool> is_connected{false};
  bool disconnect_reported{false};

  bool on_io_thread() const { return std::this_thread::get_id() == io_thread_id; }

  void read_header() {
    asio::async_read(socket, asio::buffer(header), [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
      if (ec) return self->lost();
      const std::uint32_t n = read_prefix(self->header.data());
      if (n > kMaxFrameSize) return self->lost();
      self->body.resize(n);
      self->read_body();
    });
  }

  void read_body() {
    asio::async_read(socket, asio::buffer(body), [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
      if (ec) return self->lost();
      self->dispatch(self->body);
      self->read_header();
    });
  }

  void dispatch(const std::string& text) {
    Body parsed;
    try {
      parsed = parse_body(text);
    } catch (const Error&) {
      return;
    }
    if (auto* control = std::get_if<ControlFrame>(&parsed)) {
      std::lock_guard lock(mutex);
      if (control->op == ControlFrame::Op::SubAck) subacks.insert(control->topic);
      if (control->op == ControlFrame::Op::UnsubAck) unsubacks.insert(control->topic);
      ack_cv.notify_all();
      return;
    }
    MessageHandler handler;
    {
      std::lock_guard lock(mutex);
      handler = message_handler;
    }
    if (handler) handler(std::get<ProtocolMessage>(parsed));
  }

  void enqueue(std::string frame, std::shared_ptr<std::promise<void>> done) {
    if (!is_connected) {
      if (done) done->set_exception(std::make_exception_ptr(Error(ErrorCode::ConnectionLost, "not connected")));
      return;
    }
    const bool idle = queue.empty();
    queue.emplace_back(std::move(frame), std::move(done));
    if (idle) write_next();
  }

  void write_next() {
    asio::async_write(socket, asio::buffer(queue.front().first),
                      [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
                        if (ec) return self->lost();
                        if (self->queue.empty()) return;
                        if (auto& done = self->queue.front().second) done->set_value();
                        self->queue.pop_front();
                        if (!self->queue.empty()) self->write_next();
                      });
  }

  void lost() {
    is_connected = false;
    boost::system::error_code ec;
    socket.close(ec);
    for (auto& [frame, done] : queue) {
      if (done) done->set_exception(std::make_exception_ptr(Error(ErrorCode::ConnectionLost, "connection lost")));
    }
    queue.clear();
    DisconnectHandler handler;
    {
      std::lock_guard lock(mutex);
      if (disconnect_reported) return;
      disconnect_reported = true;
      handler = disconnect_handler;
      ack_cv.notify_all();
    }
    if (handler) handler();
  }

  void send(std::string frame) {
    if (!is_connected) throw Error(ErrorCode::ConnectionLost, "not connected to broker");
    if (on_io_thread()) {
      enqueue(std::move(frame), nullptr);
      return;
    }
    auto done = std::make_shared<std::promise<void>>();
    auto fut = done->get_future();
    asio::post(io, [self = shared_from_this(), frame = std::move(frame), done]() mutable {
      self->enqueue(std::move(frame), std::move(done));
    });
    fut.get();
  }

  void await_ack(std::set<std::string>& acks, const std::string& topic, std::chrono::milliseconds timeout) {
    if (on_io_thread()) throw Error(ErrorCode::IllegalState, "cannot wait for an acknowledgement from a callback");
    std::unique_lock lock(mutex);
    const bool ok = ack_cv.wait_for(lock, timeout, [&] { return acks.count(topic) > 0 || !is_connected; });
    if (!is_connected) throw Error(ErrorCode::ConnectionLost, "connection lost while waiting for acknowledgement");
    if (!ok) throw Error(ErrorCode::Timeout, fmt::format("no acknowledgement for topic '{}'", topic));
    acks.erase(topic);
  }
};

Client::Client() : impl_(std::make_shared<Impl>()) {}

Client::~Client() { close(); }

void Client::connect(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
  if (impl_->thread.joinable()) throw Error(ErrorCode::IllegalState, "client already connected");
  boost::system::error_code ec;
  tcp::resolver resolver(impl_->io);
  auto endpoints = resolver.resolve(host, std::to_string(port), ec);
  if (ec) throw Error(ErrorCode::ConnectionLost, fmt::format("cannot resolve {}: {}", host, ec.message()));

  // Connect asynchronously so the timeout is enforceable.
  std::promise<boost::system::error_code> result;
  auto fut = result.get_future();
  asio::async_connect(impl_->socket, endpoints,
                      [&result](boost::system::error_code e, const tcp::endpoint&) { result.set_value(e); });
  impl_->io.restart();
  std::thread runner([this] { impl_->io.run(); });
  if (fut.wait_for(timeout) != std::future_status::ready) {
    impl_->socket.close(ec);
    runner.join();
    throw Error(ErrorCode::ConnectionLost, fmt::format("timed out connecting to {}:{}", host, port));
  }
  runner.join();
  ec = fut.get();
  if (ec) throw Error(ErrorCode::ConnectionLost, fmt::format("cannot connect to {}:{}: {}", host, port, ec.message()));

  impl_->socket.set_option(tcp::no_delay(true), ec);
  impl_->is_connected = true;
  impl_->disconnect_reported = false;
  impl_->io.restart();
  impl_->work.emplace(impl_->io.get_executor());
  impl_->read_header();
  impl_->thread = std::thread([impl = impl_.get()] {
    impl->io_thread_id = std::this_thread::get_id();
    impl->io.run();
  });
}

void Client::subscribe(const std::string& topic, std::chrono::milliseconds timeout) {
  impl_->send(make_frame(to_body(ControlFrame{ControlFrame::Op::Subscribe, topic})));
  impl_->await_ack(impl_->subacks, topic, timeout);
}

void Client::unsubscribe(const std::string& topic, std::chrono::milliseconds timeout) {
  impl_->send(make_frame(to_body(ControlFrame{ControlFrame::Op::Unsubscribe, topic})));
  impl_->await_ack(impl_->unsubacks, topic, timeout);
}

std::uint64_t Client::publish(Command command, nlohmann::json payload, const std::string& topic) {
  ProtocolMessage m;
  m.topic = topic;
  m.command = command;
  m.payload = std::move(payload);
  m.timestamp = now_ms();
  {
    std::lock_guard lock(impl_->mutex);
    m.msg_id = impl_->next_id++;
  }
  publish(m);
  return m.msg_id;
}

void Client::publish(const ProtocolMessage& message) { impl_->send(encode(message)); }

void Client::send_raw(std::string bytes) { impl_->send(std::move(bytes)); }

void Client::on_message(MessageHandler handler) {
  std::lock_guard lock(impl_->mutex);
  impl_->message_handler = std::move(handler);
}

void Client::on_disconnect(DisconnectHandler handler) {
  std::lock_guard lock(impl_->mutex);
  impl_->disconnect_handler = std::move(handler);
}

bool Client::connected() const { return impl_->is_connected; }

void Client::close() {
  if (!impl_->thread.joinable()) return;
  {
    std::lock_guard lock(impl_->mutex);
    impl_->disconnect_reported = true;  // a deliberate close is not a loss
  }
  asio::post(impl_->io, [impl = impl_] {
    impl->is_connected = false;
    boost::system::error_code ec;
    impl->socket.shutdown(tcp::socket::shutdown_both, ec);
    impl->socket.close(ec);
  });
  impl_->work.reset();
  if (std::this_thread::get_id() == impl_->thread.get_id()) {
    impl_->thread.detach();
  } else {
    impl_->thread.join();
  }
}

}  // namespace weldcell::msgbus
