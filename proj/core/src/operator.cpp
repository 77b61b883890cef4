#include "weldcell/operator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <initializer_list>

#include <fmt/core.h>

#include "weldcell/broker.hpp"
#include "weldcell/client.hpp"

namespace weldcell::operator_cli {

using msgbus::Command;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

namespace {

json length_json(double mm) { return std::isinf(mm) ? json("max") : json(mm); }

double length_from(const json& j) {
  if (j.is_string()) return parse_length(j.get<std::string>());
  return j.get<double>();
}

}  // namespace

double parse_length(std::string_view text) {
  if (text == "max") return kFullSeam;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("length must be a number of mm or 'max', got '{}'", text));
  }
  if (v < 0.0) throw Error(ErrorCode::InvalidArgument, fmt::format("length must be >= 0, got {}", v));
  return v;
}

json to_json(const JobChoices& c) {
  return {{"structure", std::string(1, scene::to_char(c.structure))},
          {"length_h", length_json(c.length_h)},
          {"length_v", length_json(c.length_v)},
          {"weld_scheme", c.weld_scheme},
          {"weave_scheme", c.weave_scheme},
          {"simulate", c.simulate}};
}

JobChoices choices_from_json(const json& j) {
  try {
    JobChoices c;
    const auto s = j.at("structure").get<std::string>();
    if (s.size() != 1) throw Error(ErrorCode::InvalidArgument, "structure must be L or U");
    c.structure = scene::structure_from_char(s[0]);
    c.length_h = length_from(j.at("length_h"));
    c.length_v = length_from(j.at("length_v"));
    c.weld_scheme = j.value("weld_scheme", c.weld_scheme);
    c.weave_scheme = j.value("weave_scheme", c.weave_scheme);
    c.simulate = j.value("simulate", c.simulate);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("invalid choices: {}", e.what()));
  }
}

JobChoices resolve_lengths(const JobChoices& choices, const handler::CapturePayload& payload) {
  JobChoices c = choices;
  if (std::isinf(c.length_h)) c.length_h = payload.horizontal.length_max;
  if (std::isinf(c.length_v)) c.length_v = payload.vertical.length_max;
  return c;
}

std::string generate_program_text(const JobChoices& requested, const handler::CapturePayload& payload) {
  const auto choices = resolve_lengths(requested, payload);
  const auto seams = handler::select_seams(payload, choices.length_h, choices.length_v);
  weldprog::ProgramParams params;
  params.weld_scheme = choices.weld_scheme;
  params.weave_scheme = choices.weave_scheme;
  params.simulate = choices.simulate;
  const auto program = weldprog::generate_program(seams, params);

  const auto violations = weldprog::validate_program(program);
  if (!violations.empty()) {
    std::string text;
    for (const auto& v : violations) text += fmt::format("{}P[{}]: {}", text.empty() ? "" : "; ", v.register_index, v.message);
    throw Error(ErrorCode::WorkspaceViolation, text);
  }
  return weldprog::render_program(program);
}

json handle_generate_request(const json& request) {
  if (!request.is_object() || !request.contains("choices") || !request.contains("capture")) {
    throw Error(ErrorCode::InvalidArgument, "request needs 'choices' and 'capture'");
  }
  const auto choices = choices_from_json(request["choices"]);
  const auto payload = handler::payload_from_json(request["capture"]);
  return {{"program_text", generate_program_text(choices, payload)}};
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NoThreePlanes:
    case ErrorCode::NoPlaneFound:
    case ErrorCode::DegenerateFit:
    case ErrorCode::ParallelPlanes:
    case ErrorCode::DegenerateCorner:
    case ErrorCode::EmptySeam:
    case ErrorCode::UndefinedBisector:
    case ErrorCode::UnderdeterminedCalibration:
    case ErrorCode::DegenerateOrientation:
      return 3;
    case ErrorCode::InvalidArgument:
    case ErrorCode::WorkspaceViolation:
    case ErrorCode::LengthExceedsMax:
    case ErrorCode::EmptySelection:
    case ErrorCode::ParseError:
    case ErrorCode::UnknownScheme:
      return 4;
    default:
      return 2;
  }
}

namespace {

class Session {
 public:
  explicit Session(const OperatorConfig& config) : config_(config) {
    client_.on_message([this](const msgbus::ProtocolMessage& m) { inbox_.push(m); });
    client_.on_disconnect([this] { inbox_.close(); });
    client_.connect(config.bus_host, config.bus_port);
    client_.subscribe(config.topic);
  }

  void send(Command command, json payload = json::object()) {
    client_.publish(command, std::move(payload), config_.topic);
  }

  msgbus::ProtocolMessage expect(std::initializer_list<Command> wanted) {
    auto m = inbox_.wait_for(
        [&](const msgbus::ProtocolMessage& msg) {
          return msg.command == Command::ErrorReport ||
                 std::find(wanted.begin(), wanted.end(), msg.command) != wanted.end();
        },
        config_.step_timeout);
    if (!m) {
      if (!client_.connected()) throw Error(ErrorCode::ConnectionLost, "bus connection lost");
      throw Error(ErrorCode::Timeout,
                  fmt::format("no {} within {} ms", msgbus::to_string(*wanted.begin()), config_.step_timeout.count()));
    }
    if (m->command == Command::ErrorReport) {
      const auto name = m->payload.value("code", std::string("ProtocolError"));
      const auto code = error_code_from_string(name).value_or(ErrorCode::ProtocolError);
      throw Error(code, fmt::format("handler reported {}: {}", name, m->payload.value("message", std::string())));
    }
    return *m;
  }

 private:
  const OperatorConfig& config_;
  msgbus::Inbox inbox_;
  msgbus::Client client_;  // after inbox_: callbacks stop before the inbox goes away
};

}  // namespace

JobResult run_job(const JobChoices& choices, const OperatorConfig& config) {
  if (choices.length_h < 0.0 || choices.length_v < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "seam lengths must be >= 0");
  }
  Session bus(config);
  JobResult result;
  auto& t = result.timings;

  const auto t_start = Clock::now();
  bus.send(Command::InterfaceReady);
  bus.expect({Command::HandlerRobotReady});
  t.hmi_interaction_s = seconds_since(t_start) + config.hmi_delay_s;

  const auto t_capture = Clock::now();
  bus.send(Command::Capture, {{"structure", std::string(1, scene::to_char(choices.structure))}});
  const auto answer = bus.expect({Command::AnswerCapture});
  t.calculations_s = seconds_since(t_capture);
  result.capture = handler::payload_from_json(answer.payload);

  const auto t_create = Clock::now();
  result.program_text = generate_program_text(choices, result.capture);
  t.create_program_s = seconds_since(t_create);

  const auto t_send = Clock::now();
  const std::string program_name = "WELD";
  bus.send(Command::ProgramUpload, {{"program_name", program_name}, {"text", result.program_text}});
  const auto ack = bus.expect({Command::FTP_OK, Command::FTP_NO_OK});
  if (ack.command == Command::FTP_NO_OK) {
    throw Error(ErrorCode::LoadError,
                fmt::format("robot rejected the program: {}", ack.payload.value("reason", std::string())));
  }
  bus.send(Command::Welding, {{"weld_scheme", choices.weld_scheme},
                              {"weave_scheme", choices.weave_scheme},
                              {"simulate", choices.simulate}});
  t.send_execute_s = seconds_since(t_send);
  const double process_time = seconds_since(t_start) + config.hmi_delay_s;
  t.total_s = t.hmi_interaction_s + t.calculations_s + t.create_program_s + t.send_execute_s;

  bus.expect({Command::EndWelding});

  auto& r = result.record;
  r.timestamp = utc_timestamp();
  const auto resolved = resolve_lengths(choices, result.capture);
  r.vertical_welded_distance_cm = mm_to_cm(resolved.length_v);
  r.horizontal_welded_distance_cm = mm_to_cm(resolved.length_h);
  r.vertical_max_size_cm = mm_to_cm(result.capture.vertical.length_max);
  r.horizontal_max_size_cm = mm_to_cm(result.capture.horizontal.length_max);
  r.process_time_s = process_time;
  r.capture_time_s = result.capture.capture_time_s;
  r.structure_type = std::string(1, scene::to_char(choices.structure));
  r.welding_scheme = choices.weld_scheme;
  r.weave_sine_scheme = choices.weave_scheme;
  if (config.log_path) append_job_record(r, *config.log_path);

  bus.send(Command::Pickup);
  bus.expect({Command::Pickuped});
  return result;
}

BenchReport bench(int repeats, const JobChoices& choices, const OperatorConfig& config) {
  if (repeats < 1) throw Error(ErrorCode::InvalidArgument, "repeats must be >= 1");
  BenchReport report;
  for (int i = 0; i < repeats; ++i) report.runs.push_back(run_job(choices, config).timings);
  const double n = static_cast<double>(repeats);
  for (const auto& run : report.runs) {
    report.mean.hmi_interaction_s += run.hmi_interaction_s / n;
    report.mean.calculations_s += run.calculations_s / n;
    report.mean.create_program_s += run.create_program_s / n;
    report.mean.send_execute_s += run.send_execute_s / n;
    report.mean.total_s += run.total_s / n;
  }
  return report;
}

namespace {

std::array<double, 5> row(const StepTimings& t) {
  return {t.hmi_interaction_s, t.calculations_s, t.create_program_s, t.send_execute_s, t.total_s};
}

}  // namespace

void write_bench_text(const BenchReport& report, std::ostream& out) {
  out << fmt::format("{:<8}", "");
  for (auto c : kBenchColumns) out << fmt::format(" {:>20}", c);
  out << '\n';
  auto line = [&](const std::string& label, const StepTimings& t) {
    out << fmt::format("{:<8}", label);
    for (double v : row(t)) out << fmt::format(" {:>19.3f}s", v);
    out << '\n';
  };
  for (std::size_t i = 0; i < report.runs.size(); ++i) line(fmt::format("run {}", i + 1), report.runs[i]);
  line("mean", report.mean);
}

void write_bench_csv(const BenchReport& report, std::ostream& out) {
  for (std::size_t i = 0; i < kBenchColumns.size(); ++i) out << (i ? "," : "") << kBenchColumns[i];
  out << '\n';
  const auto values = row(report.mean);
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << fmt::format("{:.6f}", values[i]);
  out << '\n';
}

LocalCell::LocalCell(handler::HandlerConfig config) {
  msgbus::BrokerOptions opts;
  opts.bind_address = "127.0.0.1";
  broker_ = std::make_unique<msgbus::Broker>(opts);
  broker_->start();
  config.bus_host = "127.0.0.1";
  config.bus_port = broker_->port();
  topic_ = config.topic;
  handler_ = std::make_unique<handler::Handler>(std::move(config));
  handler_->start();
}

LocalCell::~LocalCell() {
  handler_->stop();
  broker_->stop();
}

std::uint16_t LocalCell::port() const { return broker_->port(); }

OperatorConfig LocalCell::operator_config() const {
  OperatorConfig c;
  c.bus_host = "127.0.0.1";
  c.bus_port = broker_->port();
  c.topic = topic_;
  return c;
}

}  // namespace weldcell::operator_cli
