#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "weldcell/message.hpp"

namespace weldcell::msgbus {

/// TCP bus client. Callbacks run on the client's own io thread, in arrival
/// order; they may publish but must not call subscribe().
class Client {
 public:
  using MessageHandler = std::function<void(const ProtocolMessage&)>;
  using DisconnectHandler = std::function<void()>;

  Client();
  ~Client();

  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  /// Throws ConnectionLost when the broker is unreachable.
  void connect(const std::string& host, std::uint16_t port,
               std::chrono::milliseconds timeout = std::chrono::seconds(2));

  /// Blocks until the broker acknowledges; throws Timeout otherwise.
  void subscribe(const std::string& topic, std::chrono::milliseconds timeout = std::chrono::seconds(2));
  void unsubscribe(const std::string& topic, std::chrono::milliseconds timeout = std::chrono::seconds(2));

  /// Stamps msg_id (monotonic per client) and timestamp, then sends.
  /// Returns the assigned msg_id. Throws ConnectionLost once disconnected.
  std::uint64_t publish(Command command, nlohmann::json payload = nlohmann::json::object(),
                        const std::string& topic = std::string(kDefaultTopic));

  /// Sends the message exactly as given.
  void publish(const ProtocolMessage& message);

  /// Sends arbitrary bytes; used to exercise the broker's decode path.
  void send_raw(std::string bytes);

  void on_message(MessageHandler handler);
  void on_disconnect(DisconnectHandler handler);

  [[nodiscard]] bool connected() const;
  void close();

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

}  // namespace weldcell::msgbus
