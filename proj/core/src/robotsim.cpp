#include "weldcell/robotsim.hpp"

#include <cmath>
#include <ostream>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "weldcell/error.hpp"

namespace weldcell::robotsim {

std::string_view to_string(RobotState state) noexcept {
  switch (state) {
    case RobotState::Disconnected: return "Disconnected";
    case RobotState::AtHome: return "AtHome";
    case RobotState::ProgramLoaded: return "ProgramLoaded";
    case RobotState::Executing: return "Executing";
    case RobotState::Finished: return "Finished";
  }
  return "Unknown";
}

double ExecutionTrace::path_length(int line_no) const {
  double len = 0.0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].line_no == line_no) len += (samples[i].tcp - samples[i - 1].tcp).norm();
  }
  return len;
}

namespace {

Eigen::Quaterniond quat_of(const weldprog::PositionRegister& reg) {
  return Eigen::Quaterniond(reg.rotation()).normalized();
}

double segment_speed(const weldprog::Instruction& instr, const ExecuteOptions& opt, double v_jmax) {
  using Kind = weldprog::Speed::Kind;
  switch (instr.speed.kind) {
    case Kind::WeldSpeed: return opt.weld_speed;
    case Kind::MmPerSec: return static_cast<double>(instr.speed.value);
    case Kind::Percent: return static_cast<double>(instr.speed.value) / 100.0 * v_jmax;
  }
  return opt.weld_speed;
}

}  // namespace

ExecutionTrace simulate(const weldprog::WeldProgram& program, const weldprog::PositionRegister& start,
                        const ExecuteOptions& options, double v_joint_max) {
  if (!(options.sample_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample_rate must be > 0");
  if (!(options.weld_speed > 0.0)) throw Error(ErrorCode::InvalidArgument, "weld_speed must be > 0");
  if (options.weave.amplitude < 0.0 || options.weave.frequency < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "weave amplitude and frequency must be >= 0");
  }

  const double dt = 1.0 / options.sample_rate;
  const bool simulate_only = program.params.simulate;
  const bool weave_on = !simulate_only && options.weave.amplitude > 0.0;

  ExecutionTrace trace;
  Point3 pos = start.position();
  Eigen::Quaterniond rot = quat_of(start);
  double t = 0.0;
  trace.samples.push_back({0.0, pos, rot, 0, false});

  // Grid samples fall at k*dt; k is global so the grid does not depend on
  // instruction boundaries.
  std::size_t k = 1;

  for (const auto& instr : program.instructions) {
    const auto* reg = program.find(instr.position_index);
    if (reg == nullptr) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("P[{}] is not defined", instr.position_index));
    }
    const Point3 target = reg->position();
    const Eigen::Quaterniond target_rot = quat_of(*reg);
    const Vec3 delta = target - pos;
    const double length = delta.norm();
    const double duration = length / segment_speed(instr, options, v_joint_max);
    const bool welding = instr.weld && !simulate_only;

    Vec3 lateral = Vec3::Zero();
    if (weave_on && instr.weld && length > 0.0) {
      const Vec3 travel = delta / length;
      const Vec3 approach = (rot.slerp(0.5, target_rot) * Vec3::UnitZ());
      lateral = approach.cross(travel);
      if (lateral.norm() > 1e-12) lateral.normalize();
    }

    auto sample_at = [&](double u) -> TraceSample {
      Point3 p = pos + u * delta;
      if (lateral.squaredNorm() > 0.0) {
        const double s = u * length;
        p += options.weave.amplitude * std::sin(2.0 * kPi * options.weave.frequency * s) * lateral;
      }
      return {0.0, p, rot.slerp(u, target_rot), instr.line_no, welding};
    };

    const double t_end = t + duration;
    if (duration > 0.0) {
      for (; static_cast<double>(k) * dt < t_end - 1e-12; ++k) {
        const double ts = static_cast<double>(k) * dt;
        auto s = sample_at((ts - t) / duration);
        s.time = ts;
        trace.samples.push_back(s);
      }
      if (std::abs(static_cast<double>(k) * dt - t_end) <= 1e-12) ++k;
      auto s = sample_at(1.0);
      s.time = t_end;
      s.tcp = target + (s.tcp - (pos + delta));  // exact register + weave residue
      trace.samples.push_back(s);
    }

    trace.per_instruction_durations.push_back(duration);
    t = t_end;
    pos = target;
    rot = target_rot;
    if (options.on_instruction) options.on_instruction(instr);
  }

  double sum = 0.0;
  for (double d : trace.per_instruction_durations) sum += d;
  trace.total = sum;
  return trace;
}

void write_trace_csv(const ExecutionTrace& trace, std::ostream& out) {
  out << "t,x,y,z,line_no,welding\n";
  for (const auto& s : trace.samples) {
    fmt::print(out, "{},{},{},{},{},{}\n", s.time, s.tcp.x(), s.tcp.y(), s.tcp.z(), s.line_no,
               s.welding ? 1 : 0);
  }
}

// -- Robot ----------------------------------------------------------------------

Robot::Robot(RobotConfig config)
    : config_(std::move(config)), tcp_(config_.home.position()), orientation_(quat_of(config_.home)) {}

void Robot::require(RobotState expected, std::string_view command) const {
  if (state_ != expected) {
    throw Error(ErrorCode::IllegalState, fmt::format("{} not allowed in state {} (needs {})", command,
                                                     to_string(state_), to_string(expected)));
  }
}

void Robot::connect() {
  std::scoped_lock lock(mutex_);
  if (state_ == RobotState::Disconnected) {
    state_ = RobotState::AtHome;
    tcp_ = config_.home.position();
    orientation_ = quat_of(config_.home);
  }
}

void Robot::disconnect() {
  std::scoped_lock lock(mutex_);
  if (state_ == RobotState::Executing) throw Error(ErrorCode::IllegalState, "cannot disconnect while executing");
  state_ = RobotState::Disconnected;
  program_.reset();
}

void Robot::load_program(std::string_view text) {
  std::scoped_lock lock(mutex_);
  require(RobotState::AtHome, "load_program");
  try {
    program_ = weldprog::parse_program(text);
  } catch (const ParseError& e) {
    throw Error(ErrorCode::LoadError, fmt::format("program rejected: {}", e.what()));
  }
  state_ = RobotState::ProgramLoaded;
}

ExecutionTrace Robot::execute(const ExecuteOptions& options) {
  weldprog::WeldProgram prog;
  weldprog::PositionRegister start;
  {
    std::scoped_lock lock(mutex_);
    require(RobotState::ProgramLoaded, "execute");
    prog = *program_;
    const Vec3 wpr = weldprog::wpr_from_rotation(orientation_.toRotationMatrix());
    start = weldprog::PositionRegister{0, tcp_.x(), tcp_.y(), tcp_.z(), wpr.x(), wpr.y(), wpr.z()};
    state_ = RobotState::Executing;
  }

  ExecutionTrace trace;
  try {
    ExecuteOptions opts = options;
    opts.on_instruction = [&](const weldprog::Instruction& instr) {
      {
        std::scoped_lock lock(mutex_);
        ++motion_count_;
      }
      if (options.on_instruction) options.on_instruction(instr);
    };
    trace = simulate(prog, start, opts, config_.v_joint_max);
  } catch (...) {
    std::scoped_lock lock(mutex_);
    state_ = RobotState::ProgramLoaded;
    throw;
  }

  std::scoped_lock lock(mutex_);
  tcp_ = trace.samples.back().tcp;
  orientation_ = trace.samples.back().orientation;
  state_ = RobotState::Finished;
  return trace;
}

void Robot::go_home() {
  std::scoped_lock lock(mutex_);
  switch (state_) {
    case RobotState::Finished:
    case RobotState::AtHome:
    case RobotState::ProgramLoaded:
      break;
    default:
      throw Error(ErrorCode::IllegalState,
                  fmt::format("go_home not allowed in state {}", to_string(state_)));
  }
  program_.reset();
  tcp_ = config_.home.position();
  orientation_ = quat_of(config_.home);
  state_ = RobotState::AtHome;
}

RobotState Robot::state() const {
  std::scoped_lock lock(mutex_);
  return state_;
}

Point3 Robot::tcp() const {
  std::scoped_lock lock(mutex_);
  return tcp_;
}

std::optional<weldprog::WeldProgram> Robot::program() const {
  std::scoped_lock lock(mutex_);
  return program_;
}

std::size_t Robot::motion_count() const {
  std::scoped_lock lock(mutex_);
  return motion_count_;
}

}  // namespace weldcell::robotsim
