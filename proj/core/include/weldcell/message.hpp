#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

namespace weldcell::msgbus {

/// Cell command set. Spelling on the wire matches to_string() exactly.
enum class Command {
  InterfaceReady,
  HandlerRobotReady,
  Capture,
  AnswerCapture,
  ProgramUpload,
  FTP_OK,
  FTP_NO_OK,
  Welding,
  EndWelding,
  Pickup,
  Pickuped,
  ErrorReport,
};

inline constexpr std::array<Command, 12> kAllCommands{
    Command::InterfaceReady, Command::HandlerRobotReady, Command::Capture,   Command::AnswerCapture,
    Command::ProgramUpload,  Command::FTP_OK,            Command::FTP_NO_OK, Command::Welding,
    Command::EndWelding,     Command::Pickup,            Command::Pickuped,  Command::ErrorReport,
};

std::string_view to_string(Command command) noexcept;
std::optional<Command> command_from_string(std::string_view name) noexcept;

inline constexpr std::string_view kDefaultTopic = "weldcell/job";
inline constexpr std::size_t kMaxFrameSize = 16u * 1024u * 1024u;
inline constexpr std::size_t kPrefixSize = 4;

struct ProtocolMessage {
  std::string topic{kDefaultTopic};
  Command command{Command::InterfaceReady};
  nlohmann::json payload = nlohmann::json::object();
  std::uint64_t msg_id{0};
  std::int64_t timestamp{0};  // ms since epoch

  bool operator==(const ProtocolMessage&) const = default;
};

std::int64_t now_ms();

/// JSON object text {topic, command, payload, msg_id, timestamp}; keys are
/// emitted in sorted order so equal messages encode to equal bytes.
std::string to_body(const ProtocolMessage& message);

/// Parses one JSON body. Throws DecodeError on invalid JSON, missing or
/// mistyped fields, unknown commands or a non-object payload.
ProtocolMessage from_body(std::string_view body);

/// Frame = 4-byte big-endian length + UTF-8 JSON body.
std::string encode(const ProtocolMessage& message);

/// Decodes exactly one frame. Throws FrameTooLarge when the prefix exceeds
/// 16 MiB and DecodeError for truncated frames or trailing bytes.
ProtocolMessage decode(std::string_view frame);

std::string make_frame(std::string_view body);
std::uint32_t read_prefix(const unsigned char* prefix) noexcept;

/// Broker control traffic. Control bodies carry an "op" key, which message
/// bodies never do.
struct ControlFrame {
  enum class Op { Subscribe, Unsubscribe, SubAck, UnsubAck };
  Op op;
  std::string topic;

  bool operator==(const ControlFrame&) const = default;
};

std::string to_body(const ControlFrame& control);

using Body = std::variant<ProtocolMessage, ControlFrame>;

/// Parses either kind of body; throws DecodeError.
Body parse_body(std::string_view body);

/// Thread-safe FIFO of messages with timed waits. Used as the single command
/// queue of the handler and as the operator's inbox.
class Inbox {
 public:
  void push(ProtocolMessage message);
  /// Wakes all waiters; subsequent pops return nullopt once drained.
  void close();

  std::optional<ProtocolMessage> pop(std::chrono::milliseconds timeout);

  /// Pops messages until one satisfies `pred`; non-matching messages are
  /// discarded. Returns nullopt on timeout or close.
  std::optional<ProtocolMessage> wait_for(const std::function<bool(const ProtocolMessage&)>& pred,
                                          std::chrono::milliseconds timeout);

  [[nodiscard]] std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<ProtocolMessage> queue_;
  bool closed_{false};
};

}  // namespace weldcell::msgbus
