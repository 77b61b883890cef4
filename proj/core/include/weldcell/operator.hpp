#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "weldcell/capture.hpp"
#include "weldcell/error.hpp"
#include "weldcell/handler.hpp"
#include "weldcell/job_log.hpp"

namespace weldcell::msgbus {
class Broker;
}

namespace weldcell::operator_cli {

/// Requests the whole measured seam; "max" in JSON and on the command line.
inline constexpr double kFullSeam = std::numeric_limits<double>::infinity();

/// What the operator picks in the three-step workflow.
struct JobChoices {
  scene::StructureKind structure{scene::StructureKind::U};
  double length_h{kFullSeam};  // mm from the corner; 0 leaves the seam out
  double length_v{kFullSeam};
  int weld_scheme{1};
  int weave_scheme{0};
  bool simulate{true};

  bool operator==(const JobChoices&) const = default;
};

nlohmann::json to_json(const JobChoices& choices);
/// Lengths are numbers or "max".
JobChoices choices_from_json(const nlohmann::json& j);

/// Replaces kFullSeam with the measured length_max of that seam.
JobChoices resolve_lengths(const JobChoices& choices, const handler::CapturePayload& payload);

/// Parses a CLI length: a number of mm or "max".
double parse_length(std::string_view text);
/// Program text for the given choices and AnswerCapture geometry. The CLI
/// job and the HTTP generate endpoint both go through here. Throws
/// LengthExceedsMax, EmptySelection or WorkspaceViolation.
std::string generate_program_text(const JobChoices& choices, const handler::CapturePayload& payload);

/// Request body {choices, capture} -> response body {program_text}.
nlohmann::json handle_generate_request(const nlohmann::json& request);

struct StepTimings {
  double hmi_interaction_s{0.0};
  double calculations_s{0.0};
  double create_program_s{0.0};
  double send_execute_s{0.0};
  double total_s{0.0};
};

struct OperatorConfig {
  std::string bus_host{"127.0.0.1"};
  std::uint16_t bus_port{5883};
  std::string topic{msgbus::kDefaultTopic};
  std::chrono::milliseconds step_timeout{std::chrono::seconds(30)};
  std::optional<std::filesystem::path> log_path;
  /// Added to the interaction step to stand in for a human at the panel.
  double hmi_delay_s{0.0};
};

struct JobResult {
  JobRecord record;
  StepTimings timings;
  std::string program_text;
  handler::CapturePayload capture;
};

/// Runs one job through the full protocol. Throws Error: Timeout or
/// ProtocolError for bus failures, the handler's code for an ErrorReport,
/// LengthExceedsMax/WorkspaceViolation before any upload, and LoadError when
/// the robot answers FTP_NO_OK. No record is written for a failed job.
JobResult run_job(const JobChoices& choices, const OperatorConfig& config);

/// Process exit status for a failure: 2 protocol, 3 geometry, 4 validation.
int exit_code_for(ErrorCode code) noexcept;

struct BenchReport {
  std::vector<StepTimings> runs;
  StepTimings mean;
};

BenchReport bench(int repeats, const JobChoices& choices, const OperatorConfig& config);

inline constexpr std::array<std::string_view, 5> kBenchColumns{
    "TP/HMI Interaction", "Calculations", "Create program", "Send/Execute program", "Total time"};

void write_bench_text(const BenchReport& report, std::ostream& out);
void write_bench_csv(const BenchReport& report, std::ostream& out);

/// Broker plus handler on loopback, for running the cell inside one process.
class LocalCell {
 public:
  explicit LocalCell(handler::HandlerConfig config = {});
  ~LocalCell();

  LocalCell(const LocalCell&) = delete;
  LocalCell& operator=(const LocalCell&) = delete;

  [[nodiscard]] std::uint16_t port() const;
  [[nodiscard]] handler::Handler& handler() { return *handler_; }
  [[nodiscard]] OperatorConfig operator_config() const;

 private:
  std::unique_ptr<msgbus::Broker> broker_;
  std::unique_ptr<handler::Handler> handler_;
  std::string topic_;
};

}  // namespace weldcell::operator_cli
