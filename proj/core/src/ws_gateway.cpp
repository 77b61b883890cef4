#include <deque>

#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/core.h>

#include "broker_impl.hpp"
#include "weldcell/message.hpp"

namespace weldcell::msgbus {

namespace beast = boost::beast;
namespace websocket = beast::websocket;

namespace {

// Browser-facing session: the bus JSON body travels as one text frame.
class WsSession final : public Session {
 public:
  WsSession(Broker::Impl& broker, tcp::socket socket) : Session(broker), ws_(std::move(socket)) {}

  void start() override {
    ws_.read_message_max(kMaxFrameSize);
    ws_.text(true);
    auto self = std::static_pointer_cast<WsSession>(shared_from_this());
    ws_.async_accept([self](beast::error_code ec) {
      if (ec) return self->fail();
      self->open_ = true;
      if (!self->queue_.empty()) self->write_next();
      self->read();
    });
  }

  void deliver(std::shared_ptr<const std::string> body) override {
    if (closed_) return;
    const bool idle = queue_.empty();
    queue_.push_back(std::move(body));
    if (idle && open_) write_next();
  }

  void close() override {
    if (closed_) return;
    closed_ = true;
    beast::error_code ec;
    beast::get_lowest_layer(ws_).shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).close(ec);
  }

 private:
  void read() {
    auto self = std::static_pointer_cast<WsSession>(shared_from_this());
    ws_.async_read(buffer_, [self](beast::error_code ec, std::size_t) {
      if (ec) return self->fail();
      std::string body = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->broker_.on_body(self, body);
      if (!self->closed_) self->read();
    });
  }

  void write_next() {
    auto self = std::static_pointer_cast<WsSession>(shared_from_this());
    ws_.async_write(asio::buffer(*queue_.front()), [self](beast::error_code ec, std::size_t) {
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

  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool open_{false};
  bool closed_{false};
  bool detached_{false};
};

}  // namespace

std::shared_ptr<Session> make_ws_session(Broker::Impl& broker, tcp::socket socket) {
  return std::make_shared<WsSession>(broker, std::move(socket));
}

void Broker::Impl::accept_ws() {
  ws_acceptor->async_accept([this](boost::system::error_code ec, tcp::socket socket) {
    if (ec || closing) return;
    attach(make_ws_session(*this, std::move(socket)));
    accept_ws();
  });
}

}  // namespace weldcell::msgbus
