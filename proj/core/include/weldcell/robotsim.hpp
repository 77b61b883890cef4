#pragma once

#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "weldcell/geometry.hpp"
#include "weldcell/weldprog.hpp"

namespace weldcell::robotsim {

enum class RobotState { Disconnected, AtHome, ProgramLoaded, Executing, Finished };

std::string_view to_string(RobotState state) noexcept;

struct WeaveScheme {
  int id{0};
  double amplitude{0.0};  // mm
  double frequency{0.0};  // cycles per mm of travel
};

struct TraceSample {
  double time;  // s
  Point3 tcp;
  Eigen::Quaterniond orientation;
  int line_no;  // 0 for the initial sample
  bool welding;
};

struct ExecutionTrace {
  std::vector<TraceSample> samples;
  std::vector<double> per_instruction_durations;  // s, one per instruction
  double total{0.0};                               // s

  /// Polyline length of the samples belonging to `line_no`, including the
  /// segment from the previous instruction's last sample.
  [[nodiscard]] double path_length(int line_no) const;
};

struct RobotConfig {
  weldprog::PositionRegister home{0, 450.0, 350.0, 650.0, 180.0, 0.0, 0.0};
  double v_joint_max{1000.0};  // mm/s at 100%
};

struct ExecuteOptions {
  int weld_scheme{1};
  WeaveScheme weave;
  double weld_speed{8.0};    // mm/s, value of WELD_SPEED
  double sample_rate{50.0};  // Hz
  /// Called after each instruction completes, while the robot is Executing.
  std::function<void(const weldprog::Instruction&)> on_instruction;
};

/// Cartesian-space six-axis robot stand-in. Transitions:
/// Disconnected -> AtHome -> ProgramLoaded -> Executing -> Finished -> AtHome.
/// go_home from ProgramLoaded is an abort that discards the program.
/// All commands are serialized; a command issued in the wrong state throws
/// IllegalState and leaves the robot untouched.
class Robot {
 public:
  explicit Robot(RobotConfig config = {});

  void connect();
  void disconnect();

  /// Parses `text`; on success the robot is ProgramLoaded. A parse failure
  /// throws LoadError and leaves the state unchanged.
  void load_program(std::string_view text);

  ExecutionTrace execute(const ExecuteOptions& options);

  void go_home();

  [[nodiscard]] RobotState state() const;
  [[nodiscard]] Point3 tcp() const;
  [[nodiscard]] std::optional<weldprog::WeldProgram> program() const;
  [[nodiscard]] const RobotConfig& config() const { return config_; }
  /// Number of motion instructions ever executed; lets callers assert that
  /// a rejected command caused no motion.
  [[nodiscard]] std::size_t motion_count() const;

 private:
  void require(RobotState expected, std::string_view command) const;

  RobotConfig config_;
  mutable std::mutex mutex_;
  RobotState state_{RobotState::Disconnected};
  std::optional<weldprog::WeldProgram> program_;
  Point3 tcp_;
  Eigen::Quaterniond orientation_;
  std::size_t motion_count_{0};
};

/// Pure motion simulation of `program` starting at `start`; exposed for
/// tests and the benchmark. Joint moves take length / (percent/100 * v_jmax).
ExecutionTrace simulate(const weldprog::WeldProgram& program, const weldprog::PositionRegister& start,
                        const ExecuteOptions& options, double v_joint_max = 1000.0);

/// Writes `t,x,y,z,line_no,welding` rows.
void write_trace_csv(const ExecutionTrace& trace, std::ostream& out);

}  // namespace weldcell::robotsim
