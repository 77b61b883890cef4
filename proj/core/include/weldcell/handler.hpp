#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include <nlohmann/json.hpp>

#include "weldcell/capture.hpp"
#include "weldcell/client.hpp"
#include "weldcell/error.hpp"
#include "weldcell/message.hpp"
#include "weldcell/robotsim.hpp"

namespace weldcell::handler {

enum class HandlerState { AwaitingInterface, Ready, Captured, ProgramLoaded, Welding, Done };
std::string_view to_string(HandlerState state) noexcept;

struct WeldSchemeParams {
  double speed{8.0};  // mm/s
};

struct HandlerConfig {
  std::string bus_host{"127.0.0.1"};
  std::uint16_t bus_port{5883};
  std::string topic{msgbus::kDefaultTopic};
  SceneSource scene{SyntheticSource{}};
  planefind::RansacConfig ransac;
  robotsim::RobotConfig robot;
  double sample_rate{50.0};  // Hz
  std::map<int, WeldSchemeParams> weld_schemes{{1, {6.0}}, {2, {8.0}}, {3, {10.0}}};
  std::map<int, robotsim::WeaveScheme> weave_schemes{
      {0, {0, 0.0, 0.0}}, {1, {1, 2.0, 0.05}}, {2, {2, 3.0, 0.1}}};
};

/// Keys: bus ("host:port"), topic, scene {source: synthetic|file, ...},
/// ransac, robot {home: [x,y,z,w,p,r], v_joint_max, sample_rate},
/// weld_schemes {"id": {speed}}, weave_schemes {"id": {amplitude, frequency}}.
/// Missing keys keep their defaults.
HandlerConfig handler_config_from_json(const nlohmann::json& j);
HandlerConfig load_handler_config(const std::filesystem::path& path);

std::pair<std::string, std::uint16_t> parse_address(std::string_view host_port);

/// Robot-side service. Commands are handled one at a time on a worker
/// thread; the handler reacts only to operator commands, so its own
/// publications echoed back by the broker are ignored.
class Handler {
 public:
  explicit Handler(HandlerConfig config);
  ~Handler();

  Handler(const Handler&) = delete;
  Handler& operator=(const Handler&) = delete;

  /// Connects to the configured bus and starts serving.
  void start();
  void stop();

  [[nodiscard]] HandlerState state() const;
  [[nodiscard]] const robotsim::Robot& robot() const { return robot_; }
  /// Full-resolution cloud and geometry of the last successful capture.
  [[nodiscard]] std::optional<CaptureResult> last_capture() const;
  [[nodiscard]] std::optional<robotsim::ExecutionTrace> last_trace() const;

  /// Processes one message synchronously and returns what would be
  /// published, in order. Lets tests drive the state machine without a bus.
  std::vector<msgbus::ProtocolMessage> handle(const msgbus::ProtocolMessage& message);

 private:
  using Reply = std::pair<msgbus::Command, nlohmann::json>;

  std::vector<Reply> dispatch(const msgbus::ProtocolMessage& message);
  std::vector<Reply> on_interface_ready();
  std::vector<Reply> on_capture(const nlohmann::json& payload);
  std::vector<Reply> on_program_upload(const nlohmann::json& payload);
  std::vector<Reply> on_welding(const nlohmann::json& payload);
  std::vector<Reply> on_pickup();
  Reply fault(ErrorCode code, std::string_view message, msgbus::Command cause);
  void reset_robot();
  void worker_loop();

  HandlerConfig config_;
  robotsim::Robot robot_;
  msgbus::Client client_;

  mutable std::mutex mutex_;
  HandlerState state_{HandlerState::AwaitingInterface};
  std::optional<CaptureResult> capture_;
  std::optional<robotsim::ExecutionTrace> trace_;

  msgbus::Inbox inbox_;
  std::thread worker_;
  std::atomic<bool> running_{false};
};

}  // namespace weldcell::handler
