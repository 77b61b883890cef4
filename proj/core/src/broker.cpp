#include "weldcell/broker.hpp"

#include <array>
#include <deque>

#include <fmt/core.h>

#include "broker_impl.hpp"
#include "weldcell/error.hpp"
#include "weldcell/message.hpp"

namespace weldcell::msgbus {

namespace {

class TcpSession final : public Session {
 public:
  TcpSession(Broker::Impl& broker, tcp::socket socket) : Session(broker), socket_(std::move(socket)) {}

  void start() override { read_header(); }

  void deliver(std::shared_ptr<const std::string> body) override {
    if (closed_) return;
    const bool idle = queue_.empty();
    queue_.push_back(std::make_shared<const std::string>(make_frame(*body)));
    if (idle) write_next();
  }

  void close() override {
    if (closed_) return;
    closed_ = true;
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
  }

 private:
  void read_header() {
    auto self = std::static_pointer_cast<TcpSession>(shared_from_this());
    asio::async_read(socket_, asio::buffer(header_), [self](boost::system::error_code ec, std::size_t) {
      if (ec) return self->fail();
      const std::uint32_t n = read_prefix(self->header_.data());
      if (n > kMaxFrameSize) {
        self->broker_.log(fmt::format("dropping session: frame length {} exceeds limit", n));
        return self->fail();
      }
      self->body_.resize(n);
      self->read_body();
    });
  }

  void read_body() {
    auto self = std::static_pointer_cast<TcpSession>(shared_from_this());
    asio::async_read(socket_, asio::buffer(body_), [self](boost::system::error_code ec, std::size_t) {
      if (ec) return self->fail();
      self->broker_.on_body(self, self->body_);
      if (!self->closed_) self->read_header();
    });
  }

  void write_next() {
    auto self = std::static_pointer_cast<TcpSession>(shared_from_this());
    asio::async_write(socket_, asio::buffer(*queue_.front()),
                      [self](boost::system::error_code ec, std::size_t) {
                        if (ec) return self->fail();
                        self->queue_.pop_front();
                        if (!self->queue_.empty()) self->write_next();
                      });
  }

  void fail() {
    if (detached_) return;
    detached_ = true;
    close();
    queue_.clear();
    broker_.detach(shared_from_this());
  }

  tcp::socket socket_;
  std::array<unsigned char, kPrefixSize> header_{};
  std::string body_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool closed_{false};
  bool detached_{false};
};

}  // namespace

void Broker::Impl::attach(const std::shared_ptr<Session>& session) {
  sessions.insert(session);
  session_counter = sessions.size();
  session->start();
}

void Broker::Impl::detach(const std::shared_ptr<Session>& session) {
  for (auto& [topic, subs] : subscribers) subs.erase(session.get());
  sessions.erase(session);
  session_counter = sessions.size();
}

void Broker::Impl::on_body(const std::shared_ptr<Session>& from, const std::string& body) {
  Body parsed;
  try {
    parsed = parse_body(body);
  } catch (const Error& e) {
    log(fmt::format("dropping undecodable frame: {}", e.what()));
    return;
  }

  if (auto* control = std::get_if<ControlFrame>(&parsed)) {
    switch (control->op) {
      case ControlFrame::Op::Subscribe:
        subscribers[control->topic].insert(from.get());
        from->deliver(std::make_shared<const std::string>(
            to_body(ControlFrame{ControlFrame::Op::SubAck, control->topic})));
        break;
      case ControlFrame::Op::Unsubscribe:
        subscribers[control->topic].erase(from.get());
        from->deliver(std::make_shared<const std::string>(
            to_body(ControlFrame{ControlFrame::Op::UnsubAck, control->topic})));
        break;
      default:
        log("dropping unexpected acknowledgement from a client");
        break;
    }
    return;
  }

  const auto& message = std::get<ProtocolMessage>(parsed);
  auto it = subscribers.find(message.topic);
  if (it == subscribers.end()) return;
  auto shared = std::make_shared<const std::string>(body);
  for (Session* s : it->second) s->deliver(shared);
}

void Broker::Impl::accept_tcp() {
  acceptor->async_accept([this](boost::system::error_code ec, tcp::socket socket) {
    if (ec || closing) return;
    boost::system::error_code opt_ec;
    socket.set_option(tcp::no_delay(true), opt_ec);
    attach(std::make_shared<TcpSession>(*this, std::move(socket)));
    accept_tcp();
  });
}

namespace {

tcp::acceptor open_acceptor(asio::io_context& io, const std::string& address, std::uint16_t port) {
  boost::system::error_code ec;
  auto addr = asio::ip::make_address(address, ec);
  if (ec) throw Error(ErrorCode::InvalidArgument, fmt::format("invalid bind address '{}'", address));
  tcp::endpoint ep(addr, port);
  tcp::acceptor acc(io);
  acc.open(ep.protocol());
  acc.set_option(asio::socket_base::reuse_address(true));
  acc.bind(ep, ec);
  if (ec) {
    if (ec == asio::error::address_in_use) {
      throw Error(ErrorCode::AddressInUse, fmt::format("{}:{} is already in use", address, port));
    }
    throw Error(ErrorCode::IoError, fmt::format("bind {}:{} failed: {}", address, port, ec.message()));
  }
  acc.listen(asio::socket_base::max_listen_connections);
  return acc;
}

}  // namespace

Broker::Broker(BrokerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Broker::~Broker() { stop(); }

void Broker::start() {
  if (impl_->started.exchange(true)) throw Error(ErrorCode::IllegalState, "broker already started");
  try {
    impl_->acceptor.emplace(open_acceptor(impl_->io, impl_->options.bind_address, impl_->options.port));
    impl_->bound_port = impl_->acceptor->local_endpoint().port();
    if (impl_->options.ws_port) {
      impl_->ws_acceptor.emplace(
          open_acceptor(impl_->io, impl_->options.bind_address, *impl_->options.ws_port));
      impl_->bound_ws_port = impl_->ws_acceptor->local_endpoint().port();
    }
  } catch (...) {
    impl_->acceptor.reset();
    impl_->ws_acceptor.reset();
    impl_->started = false;
    throw;
  }

  impl_->work.emplace(impl_->io.get_executor());
  impl_->accept_tcp();
  if (impl_->ws_acceptor) impl_->accept_ws();
  impl_->thread = std::thread([impl = impl_.get()] { impl->io.run(); });
}

void Broker::stop() {
  if (!impl_->started || !impl_->thread.joinable()) return;
  asio::post(impl_->io, [impl = impl_.get()] {
    impl->closing = true;
    boost::system::error_code ec;
    if (impl->acceptor) impl->acceptor->close(ec);
    if (impl->ws_acceptor) impl->ws_acceptor->close(ec);
    auto sessions = impl->sessions;
    for (const auto& s : sessions) s->close();
    impl->sessions.clear();
    impl->subscribers.clear();
    impl->session_counter = 0;
  });
  impl_->work.reset();
  impl_->thread.join();
}

bool Broker::running() const { return impl_->started && impl_->thread.joinable(); }

std::uint16_t Broker::port() const { return impl_->bound_port; }

std::optional<std::uint16_t> Broker::ws_port() const { return impl_->bound_ws_port; }

std::size_t Broker::session_count() const { return impl_->session_counter; }

}  // namespace weldcell::msgbus
