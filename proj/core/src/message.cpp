#include "weldcell/message.hpp"

#include <fmt/core.h>

#include "weldcell/error.hpp"

namespace weldcell::msgbus {

using nlohmann::json;

std::string_view to_string(Command command) noexcept {
  switch (command) {
    case Command::InterfaceReady: return "InterfaceReady";
    case Command::HandlerRobotReady: return "HandlerRobotReady";
    case Command::Capture: return "Capture";
    case Command::AnswerCapture: return "AnswerCapture";
    case Command::ProgramUpload: return "ProgramUpload";
    case Command::FTP_OK: return "FTP_OK";
    case Command::FTP_NO_OK: return "FTP_NO_OK";
    case Command::Welding: return "Welding";
    case Command::EndWelding: return "EndWelding";
    case Command::Pickup: return "Pickup";
    case Command::Pickuped: return "Pickuped";
    case Command::ErrorReport: return "ErrorReport";
  }
  return "Unknown";
}

std::optional<Command> command_from_string(std::string_view name) noexcept {
  for (auto c : kAllCommands) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string to_body(const ProtocolMessage& m) {
  json j;
  j["topic"] = m.topic;
  j["command"] = std::string(to_string(m.command));
  j["payload"] = m.payload.is_null() ? json::object() : m.payload;
  j["msg_id"] = m.msg_id;
  j["timestamp"] = m.timestamp;
  return j.dump();
}

namespace {

json parse_json(std::string_view body) {
  json j = json::parse(body.begin(), body.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error(ErrorCode::DecodeError, "frame body is not valid JSON");
  if (!j.is_object()) throw Error(ErrorCode::DecodeError, "frame body is not a JSON object");
  return j;
}

ProtocolMessage message_from_json(const json& j) {
  auto field = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) throw Error(ErrorCode::DecodeError, fmt::format("missing field '{}'", key));
    return *it;
  };
  const auto& topic = field("topic");
  const auto& command = field("command");
  const auto& payload = field("payload");
  const auto& msg_id = field("msg_id");
  const auto& timestamp = field("timestamp");
  if (!topic.is_string() || topic.get_ref<const std::string&>().empty()) {
    throw Error(ErrorCode::DecodeError, "topic must be a non-empty string");
  }
  if (!command.is_string()) throw Error(ErrorCode::DecodeError, "command must be a string");
  if (!payload.is_object()) throw Error(ErrorCode::DecodeError, "payload must be a JSON object");
  if (!msg_id.is_number_unsigned() && !(msg_id.is_number_integer() && msg_id.get<std::int64_t>() >= 0)) {
    throw Error(ErrorCode::DecodeError, "msg_id must be a non-negative integer");
  }
  if (!timestamp.is_number_integer()) throw Error(ErrorCode::DecodeError, "timestamp must be an integer");
  if (j.size() != 5) throw Error(ErrorCode::DecodeError, "unexpected fields in message");

  auto cmd = command_from_string(command.get_ref<const std::string&>());
  if (!cmd) {
    throw Error(ErrorCode::DecodeError,
                fmt::format("unknown command '{}'", command.get_ref<const std::string&>()));
  }

  ProtocolMessage m;
  m.topic = topic.get<std::string>();
  m.command = *cmd;
  m.payload = payload;
  m.msg_id = msg_id.get<std::uint64_t>();
  m.timestamp = timestamp.get<std::int64_t>();
  return m;
}

}  // namespace

ProtocolMessage from_body(std::string_view body) {
  json j = parse_json(body);
  if (j.contains("op")) throw Error(ErrorCode::DecodeError, "control frame where a message was expected");
  return message_from_json(j);
}

std::uint32_t read_prefix(const unsigned char* p) noexcept {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

std::string make_frame(std::string_view body) {
  if (body.size() > kMaxFrameSize) {
    throw Error(ErrorCode::FrameTooLarge, fmt::format("frame body of {} bytes exceeds 16 MiB", body.size()));
  }
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(kPrefixSize + body.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(body);
  return out;
}

std::string encode(const ProtocolMessage& message) { return make_frame(to_body(message)); }

ProtocolMessage decode(std::string_view frame) {
  if (frame.size() < kPrefixSize) throw Error(ErrorCode::DecodeError, "truncated length prefix");
  const std::uint32_t n = read_prefix(reinterpret_cast<const unsigned char*>(frame.data()));
  if (n > kMaxFrameSize) {
    throw Error(ErrorCode::FrameTooLarge, fmt::format("declared frame length {} exceeds 16 MiB", n));
  }
  if (frame.size() < kPrefixSize + n) {
    throw Error(ErrorCode::DecodeError,
                fmt::format("truncated frame: {} of {} body bytes", frame.size() - kPrefixSize, n));
  }
  if (frame.size() > kPrefixSize + n) throw Error(ErrorCode::DecodeError, "trailing bytes after frame");
  return from_body(frame.substr(kPrefixSize));
}

std::string to_body(const ControlFrame& c) {
  const char* op = "subscribe";
  switch (c.op) {
    case ControlFrame::Op::Subscribe: op = "subscribe"; break;
    case ControlFrame::Op::Unsubscribe: op = "unsubscribe"; break;
    case ControlFrame::Op::SubAck: op = "suback"; break;
    case ControlFrame::Op::UnsubAck: op = "unsuback"; break;
  }
  return json{{"op", op}, {"topic", c.topic}}.dump();
}

Body parse_body(std::string_view body) {
  json j = parse_json(body);
  auto op = j.find("op");
  if (op == j.end()) return message_from_json(j);

  auto topic = j.find("topic");
  if (!op->is_string() || topic == j.end() || !topic->is_string() || j.size() != 2) {
    throw Error(ErrorCode::DecodeError, "malformed control frame");
  }
  const auto& name = op->get_ref<const std::string&>();
  ControlFrame c{ControlFrame::Op::Subscribe, topic->get<std::string>()};
  if (name == "subscribe") {
    c.op = ControlFrame::Op::Subscribe;
  } else if (name == "unsubscribe") {
    c.op = ControlFrame::Op::Unsubscribe;
  } else if (name == "suback") {
    c.op = ControlFrame::Op::SubAck;
  } else if (name == "unsuback") {
    c.op = ControlFrame::Op::UnsubAck;
  } else {
    throw Error(ErrorCode::DecodeError, fmt::format("unknown control op '{}'", name));
  }
  return c;
}

// -- Inbox ----------------------------------------------------------------------

void Inbox::push(ProtocolMessage message) {
  {
    std::scoped_lock lock(mutex_);
    if (closed_) return;
    queue_.push_back(std::move(message));
  }
  cv_.notify_all();
}

void Inbox::close() {
  {
    std::scoped_lock lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::optional<ProtocolMessage> Inbox::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  if (!cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; })) return std::nullopt;
  if (queue_.empty()) return std::nullopt;
  auto m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

std::optional<ProtocolMessage> Inbox::wait_for(const std::function<bool(const ProtocolMessage&)>& pred,
                                               std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline -
                                                                           std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    auto m = pop(left);
    if (!m) return std::nullopt;
    if (pred(*m)) return m;
  }
}

std::size_t Inbox::size() const {
  std::scoped_lock lock(mutex_);
  return queue_.size();
}

}  // namespace weldcell::msgbus
