#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <thread>

#include <boost/asio.hpp>

#include "weldcell/broker.hpp"

namespace weldcell::msgbus {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

/// One connected peer. All methods run on the broker's io thread.
class Session : public std::enable_shared_from_this<Session> {
 public:
  explicit Session(Broker::Impl& broker) : broker_(broker) {}
  virtual ~Session() = default;

  virtual void start() = 0;
  /// Queues one JSON body for delivery in the session's wire framing.
  virtual void deliver(std::shared_ptr<const std::string> body) = 0;
  virtual void close() = 0;

 protected:
  Broker::Impl& broker_;
};

struct Broker::Impl {
  explicit Impl(BrokerOptions opts) : options(std::move(opts)) {}

  void on_body(const std::shared_ptr<Session>& from, const std::string& body);
  void attach(const std::shared_ptr<Session>& session);
  void detach(const std::shared_ptr<Session>& session);
  void log(const std::string& line) const {
    if (options.log) options.log(line);
  }

  void accept_tcp();
  void accept_ws();  // ws_gateway.cpp

  BrokerOptions options;
  asio::io_context io;
  std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
  std::optional<tcp::acceptor> acceptor;
  std::optional<tcp::acceptor> ws_acceptor;
  std::thread thread;

  // io-thread state
  std::set<std::shared_ptr<Session>> sessions;
  std::map<std::string, std::set<Session*>> subscribers;
  bool closing{false};

  std::atomic<bool> started{false};
  std::atomic<std::size_t> session_counter{0};
  std::uint16_t bound_port{0};
  std::optional<std::uint16_t> bound_ws_port;
};

std::shared_ptr<Session> make_ws_session(Broker::Impl& broker, tcp::socket socket);

}  // namespace weldcell::msgbus
