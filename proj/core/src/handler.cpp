#include "weldcell/handler.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include <fmt/core.h>

#include "weldcell/error.hpp"

namespace weldcell::handler {

using msgbus::Command;
using nlohmann::json;

std::string_view to_string(HandlerState state) noexcept {
  switch (state) {
    case HandlerState::AwaitingInterface: return "AwaitingInterface";
    case HandlerState::Ready: return "Ready";
    case HandlerState::Captured: return "Captured";
    case HandlerState::ProgramLoaded: return "ProgramLoaded";
    case HandlerState::Welding: return "Welding";
    case HandlerState::Done: return "Done";
  }
  return "?";
}

std::pair<std::string, std::uint16_t> parse_address(std::string_view host_port) {
  const auto colon = host_port.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("expected host:port, got '{}'", host_port));
  }
  const auto port_text = host_port.substr(colon + 1);
  unsigned port = 0;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port > 65535) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("invalid port in '{}'", host_port));
  }
  return {std::string(host_port.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

HandlerConfig handler_config_from_json(const json& j) {
  HandlerConfig c;
  try {
    if (j.contains("bus")) std::tie(c.bus_host, c.bus_port) = parse_address(j["bus"].get<std::string>());
    c.topic = j.value("topic", c.topic);

    if (j.contains("scene")) {
      const auto& s = j["scene"];
      const auto kind = s.value("source", std::string("synthetic"));
      if (kind == "file") {
        c.scene = FileSource{s.at("path").get<std::string>()};
      } else if (kind == "synthetic") {
        SyntheticSource syn;
        syn.sampling.points_per_plane = s.value("points_per_plane", syn.sampling.points_per_plane);
        syn.sampling.noise_sigma = s.value("noise_sigma", syn.sampling.noise_sigma);
        syn.sampling.outlier_fraction = s.value("outlier_fraction", syn.sampling.outlier_fraction);
        syn.sampling.rng_seed = s.value("seed", syn.sampling.rng_seed);
        syn.sampling.validate();
        c.scene = syn;
      } else {
        throw Error(ErrorCode::InvalidArgument, fmt::format("unknown scene source '{}'", kind));
      }
    }

    if (j.contains("ransac")) {
      const auto& r = j["ransac"];
      c.ransac.max_iterations = r.value("max_iterations", c.ransac.max_iterations);
      c.ransac.inlier_threshold = r.value("inlier_threshold", c.ransac.inlier_threshold);
      c.ransac.min_inliers = r.value("min_inliers", c.ransac.min_inliers);
      c.ransac.rng_seed = r.value("seed", c.ransac.rng_seed);
      c.ransac.validate();
    }

    if (j.contains("robot")) {
      const auto& r = j["robot"];
      if (r.contains("home")) {
        const auto h = r["home"].get<std::vector<double>>();
        if (h.size() != 6) throw Error(ErrorCode::InvalidArgument, "robot.home needs 6 values");
        c.robot.home = {0, h[0], h[1], h[2], h[3], h[4], h[5]};
      }
      c.robot.v_joint_max = r.value("v_joint_max", c.robot.v_joint_max);
      c.sample_rate = r.value("sample_rate", c.sample_rate);
    }

    if (j.contains("weld_schemes")) {
      c.weld_schemes.clear();
      for (const auto& [id, v] : j["weld_schemes"].items()) {
        c.weld_schemes[std::stoi(id)] = WeldSchemeParams{v.at("speed").get<double>()};
      }
    }
    if (j.contains("weave_schemes")) {
      c.weave_schemes.clear();
      for (const auto& [id, v] : j["weave_schemes"].items()) {
        const int n = std::stoi(id);
        c.weave_schemes[n] = {n, v.at("amplitude").get<double>(), v.at("frequency").get<double>()};
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("handler config: {}", e.what()));
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::InvalidArgument, "handler config: scheme ids must be integers");
  }
  return c;
}

HandlerConfig load_handler_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
  try {
    return handler_config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("{}: {}", path.string(), e.what()));
  }
}

Handler::Handler(HandlerConfig config) : config_(std::move(config)), robot_(config_.robot) {}

Handler::~Handler() { stop(); }

void Handler::start() {
  if (running_.exchange(true)) throw Error(ErrorCode::IllegalState, "handler already running");
  client_.on_message([this](const msgbus::ProtocolMessage& m) {
    switch (m.command) {
      case Command::InterfaceReady:
      case Command::Capture:
      case Command::ProgramUpload:
      case Command::Welding:
      case Command::Pickup:
        inbox_.push(m);
        break;
      default:
        break;
    }
  });
  try {
    client_.connect(config_.bus_host, config_.bus_port);
    client_.subscribe(config_.topic);
  } catch (...) {
    running_ = false;
    throw;
  }
  worker_ = std::thread([this] { worker_loop(); });
}

void Handler::stop() {
  if (!running_.exchange(false)) return;
  inbox_.close();
  if (worker_.joinable()) worker_.join();
  client_.close();
}

void Handler::worker_loop() {
  while (running_) {
    auto m = inbox_.pop(std::chrono::milliseconds(100));
    if (!m) continue;
    for (auto& reply : handle(*m)) {
      try {
        client_.publish(reply.command, reply.payload, reply.topic);
      } catch (const Error&) {
        running_ = false;
        return;
      }
    }
  }
}

HandlerState Handler::state() const {
  std::scoped_lock lock(mutex_);
  return state_;
}

std::optional<CaptureResult> Handler::last_capture() const {
  std::scoped_lock lock(mutex_);
  return capture_;
}

std::optional<robotsim::ExecutionTrace> Handler::last_trace() const {
  std::scoped_lock lock(mutex_);
  return trace_;
}

std::vector<msgbus::ProtocolMessage> Handler::handle(const msgbus::ProtocolMessage& message) {
  std::vector<msgbus::ProtocolMessage> out;
  if (message.topic != config_.topic) return out;
  for (auto& [command, payload] : dispatch(message)) {
    msgbus::ProtocolMessage m;
    m.topic = config_.topic;
    m.command = command;
    m.payload = std::move(payload);
    m.timestamp = msgbus::now_ms();
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Handler::Reply> Handler::dispatch(const msgbus::ProtocolMessage& message) {
  switch (message.command) {
    case Command::InterfaceReady: return on_interface_ready();
    case Command::Capture: return on_capture(message.payload);
    case Command::ProgramUpload: return on_program_upload(message.payload);
    case Command::Welding: return on_welding(message.payload);
    case Command::Pickup: return on_pickup();
    default: return {};
  }
}

Handler::Reply Handler::fault(ErrorCode code, std::string_view message, Command cause) {
  {
    std::scoped_lock lock(mutex_);
    if (state_ != HandlerState::AwaitingInterface) state_ = HandlerState::Ready;
  }
  reset_robot();
  return {Command::ErrorReport,
          json{{"code", std::string(weldcell::to_string(code))},
               {"message", std::string(message)},
               {"cause", std::string(msgbus::to_string(cause))}}};
}

void Handler::reset_robot() {
  switch (robot_.state()) {
    case robotsim::RobotState::Disconnected:
      robot_.connect();
      break;
    case robotsim::RobotState::Executing:
      break;
    default:
      robot_.go_home();
      break;
  }
}

namespace {

bool state_in(HandlerState s, std::initializer_list<HandlerState> allowed) {
  return std::find(allowed.begin(), allowed.end(), s) != allowed.end();
}

}  // namespace

std::vector<Handler::Reply> Handler::on_interface_ready() {
  if (state() == HandlerState::Welding) {
    return {fault(ErrorCode::IllegalState, "InterfaceReady while welding", Command::InterfaceReady)};
  }
  reset_robot();
  std::string source = "synthetic";
  if (const auto* f = std::get_if<FileSource>(&config_.scene)) {
    if (!std::filesystem::exists(f->path)) {
      return {fault(ErrorCode::LoadError, fmt::format("scene file {} not found", f->path.string()),
                    Command::InterfaceReady)};
    }
    source = f->path.string();
  } else if (std::holds_alternative<CloudSource>(config_.scene)) {
    source = "memory";
  }
  {
    std::scoped_lock lock(mutex_);
    capture_.reset();
    trace_.reset();
    state_ = HandlerState::Ready;
  }
  return {{Command::HandlerRobotReady,
           json{{"robot_state", std::string(robotsim::to_string(robot_.state()))}, {"scene_source", source}}}};
}

std::vector<Handler::Reply> Handler::on_capture(const json& payload) {
  const auto s = state();
  if (!state_in(s, {HandlerState::Ready, HandlerState::Captured})) {
    return {fault(ErrorCode::IllegalState, fmt::format("Capture not allowed in state {}", to_string(s)),
                  Command::Capture)};
  }
  scene::StructureKind kind = scene::StructureKind::U;
  try {
    if (payload.contains("structure")) {
      const auto text = payload["structure"].get<std::string>();
      if (text.size() != 1) throw Error(ErrorCode::InvalidArgument, "structure must be L or U");
      kind = scene::structure_from_char(text[0]);
    }
    auto result = capture_once(config_.scene, kind, config_.ransac);
    json body = to_json(result.payload);
    {
      std::scoped_lock lock(mutex_);
      capture_ = std::move(result);
      state_ = HandlerState::Captured;
    }
    return {{Command::AnswerCapture, std::move(body)}};
  } catch (const Error& e) {
    return {fault(e.code(), e.what(), Command::Capture)};
  } catch (const json::exception& e) {
    return {fault(ErrorCode::DecodeError, e.what(), Command::Capture)};
  }
}

std::vector<Handler::Reply> Handler::on_program_upload(const json& payload) {
  const auto s = state();
  if (s != HandlerState::Captured) {
    return {fault(ErrorCode::IllegalState, fmt::format("ProgramUpload not allowed in state {}", to_string(s)),
                  Command::ProgramUpload)};
  }
  const std::string name = payload.value("program_name", std::string());
  const auto text = payload.find("text");
  if (text == payload.end() || !text->is_string()) {
    return {{Command::FTP_NO_OK, json{{"program_name", name}, {"reason", "payload has no program text"}}}};
  }
  try {
    robot_.load_program(text->get<std::string>());
  } catch (const Error& e) {
    return {{Command::FTP_NO_OK, json{{"program_name", name}, {"reason", e.what()}}}};
  }
  {
    std::scoped_lock lock(mutex_);
    state_ = HandlerState::ProgramLoaded;
  }
  return {{Command::FTP_OK,
           json{{"program_name", name}, {"instructions", robot_.program()->instructions.size()}}}};
}

std::vector<Handler::Reply> Handler::on_welding(const json& payload) {
  const auto s = state();
  if (s != HandlerState::ProgramLoaded) {
    return {fault(ErrorCode::IllegalState, fmt::format("Welding not allowed in state {}", to_string(s)),
                  Command::Welding)};
  }
  const auto program = robot_.program();
  int weld_id = program->params.weld_scheme;
  int weave_id = program->params.weave_scheme;
  try {
    weld_id = payload.value("weld_scheme", weld_id);
    weave_id = payload.value("weave_scheme", weave_id);
  } catch (const json::exception& e) {
    return {fault(ErrorCode::DecodeError, e.what(), Command::Welding)};
  }
  const auto weld = config_.weld_schemes.find(weld_id);
  if (weld == config_.weld_schemes.end()) {
    return {fault(ErrorCode::UnknownScheme, fmt::format("unknown weld scheme {}", weld_id), Command::Welding)};
  }
  const auto weave = config_.weave_schemes.find(weave_id);
  if (weave == config_.weave_schemes.end()) {
    return {fault(ErrorCode::UnknownScheme, fmt::format("unknown weave scheme {}", weave_id), Command::Welding)};
  }

  {
    std::scoped_lock lock(mutex_);
    state_ = HandlerState::Welding;
  }
  robotsim::ExecuteOptions opts;
  opts.weld_scheme = weld_id;
  opts.weave = weave->second;
  opts.weld_speed = weld->second.speed;
  opts.sample_rate = config_.sample_rate;
  robotsim::ExecutionTrace trace;
  try {
    trace = robot_.execute(opts);
  } catch (const Error& e) {
    {
      std::scoped_lock lock(mutex_);
      state_ = HandlerState::Ready;
    }
    return {fault(e.code(), e.what(), Command::Welding)};
  }

  double welded = 0.0;
  for (const auto& instr : program->instructions) {
    if (instr.weld) welded += trace.path_length(instr.line_no);
  }
  json body{{"duration_s", trace.total},
            {"weld_moves", program->weld_count()},
            {"welded_path_mm", welded},
            {"simulate", program->params.simulate}};
  {
    std::scoped_lock lock(mutex_);
    trace_ = std::move(trace);
    state_ = HandlerState::Done;
  }
  return {{Command::EndWelding, std::move(body)}};
}

std::vector<Handler::Reply> Handler::on_pickup() {
  const auto s = state();
  if (s != HandlerState::Done) {
    return {fault(ErrorCode::IllegalState, fmt::format("Pickup not allowed in state {}", to_string(s)),
                  Command::Pickup)};
  }
  robot_.go_home();
  {
    std::scoped_lock lock(mutex_);
    state_ = HandlerState::AwaitingInterface;
  }
  return {{Command::Pickuped, json{{"robot_state", std::string(robotsim::to_string(robot_.state()))}}}};
}

}  // namespace weldcell::handler
