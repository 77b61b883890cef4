#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace weldcell::msgbus {

struct BrokerOptions {
  std::string bind_address{"127.0.0.1"};
  std::uint16_t port{0};  // 0 = ephemeral
  /// When set, also serves the same JSON bodies over WebSocket (one message
  /// per text frame, no length prefix). 0 = ephemeral.
  std::optional<std::uint16_t> ws_port;
  /// Receives one line per dropped frame or session error.
  std::function<void(const std::string&)> log;
};

/// Topic-based publish/subscribe broker. Every subscriber of a topic
/// receives each decodable message exactly once, in per-publisher order.
/// Frames that fail to decode are dropped, never forwarded.
class Broker {
 public:
  explicit Broker(BrokerOptions options = {});
  ~Broker();

  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  /// Binds and starts serving on a background thread. Throws AddressInUse
  /// when the port is taken and IllegalState when already started.
  void start();

  /// Closes every session and joins the service thread. Idempotent.
  void stop();

  [[nodiscard]] bool running() const;
  [[nodiscard]] std::uint16_t port() const;
  [[nodiscard]] std::optional<std::uint16_t> ws_port() const;
  [[nodiscard]] std::size_t session_count() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace weldcell::msgbus
