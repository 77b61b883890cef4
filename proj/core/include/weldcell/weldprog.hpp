#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "weldcell/geometry.hpp"
#include "weldcell/seamgeom.hpp"

namespace weldcell::weldprog {

/// Indexed pose: position in mm, orientation as fixed-axis w,p,r degrees
/// (R = Rz(r) * Ry(p) * Rx(w)).
struct PositionRegister {
  int index{1};
  double x{0}, y{0}, z{0};
  double w{0}, p{0}, r{0};

  [[nodiscard]] Point3 position() const { return {x, y, z}; }
  [[nodiscard]] Mat3 rotation() const;

  bool operator==(const PositionRegister&) const = default;
};

enum class Motion { Joint, Linear };

struct Speed {
  enum class Kind { Percent, MmPerSec, WeldSpeed };
  Kind kind{Kind::Percent};
  int value{0};  // unused for WeldSpeed

  static Speed percent(int v) { return {Kind::Percent, v}; }
  static Speed mm_per_sec(int v) { return {Kind::MmPerSec, v}; }
  static Speed weld() { return {Kind::WeldSpeed, 0}; }

  bool operator==(const Speed&) const = default;
};

struct Termination {
  enum class Kind { Fine, Cnt };
  Kind kind{Kind::Fine};
  int value{0};  // 0..100 for CNT

  static Termination fine() { return {Kind::Fine, 0}; }
  static Termination cnt(int v) { return {Kind::Cnt, v}; }

  bool operator==(const Termination&) const = default;
};

struct Instruction {
  int line_no{1};
  Motion motion{Motion::Linear};
  int position_index{1};
  Speed speed;
  Termination termination;
  bool weld{false};  // true iff speed is WELD_SPEED

  bool operator==(const Instruction&) const = default;
};

struct ProgramParams {
  int weld_scheme{1};
  int weave_scheme{0};
  bool simulate{false};

  bool operator==(const ProgramParams&) const = default;
};

struct WeldProgram {
  std::string name{"WELD"};
  std::vector<PositionRegister> positions;
  std::vector<Instruction> instructions;
  ProgramParams params;

  [[nodiscard]] const PositionRegister* find(int index) const;
  [[nodiscard]] std::size_t weld_count() const;

  bool operator==(const WeldProgram&) const = default;
};

// -- orientation helpers ------------------------------------------------------

/// Fixed-axis XYZ angles in degrees from a rotation matrix.
Vec3 wpr_from_rotation(const Mat3& rotation);
Mat3 rotation_from_wpr(double w, double p, double r);

// -- generation -----------------------------------------------------------------

struct SeamSelection {
  seamgeom::SeamSegment seam;
  double selected_length{0.0};  // mm, measured from the corner
  std::pair<Plane, Plane> planes;  // adjacent plates, outward normals
};

struct GenerateOptions {
  std::string name{"WELD"};
  double approach_offset{50.0};  // mm along the torch approach axis
  double travel_angle{seamgeom::kDefaultTravelAngle};
  int joint_percent{10};
  int approach_speed{100};  // mm/sec
  PositionRegister home{0, 450.0, 350.0, 650.0, 180.0, 0.0, 0.0};
};

/// Builds the job program. Horizontal seams are emitted before vertical ones
/// and every seam is welded in two passes split at its midpoint:
///   horizontal: start -> mid (weld), retreat, back to mid, mid -> end (weld)
///   vertical:   start -> mid (weld), move to end, end -> mid (weld)
/// The first seam is approached with a joint move, later seams with a linear
/// approach move, and the program ends with a joint move to home.
WeldProgram generate_program(std::span<const SeamSelection> seams, const ProgramParams& params,
                             const GenerateOptions& options = {});

// -- text form ------------------------------------------------------------------

std::string render_instruction(const Instruction& instr);
std::string render_program(const WeldProgram& program);

/// Inverse of render_program. Accepts trailing whitespace on any line and
/// nothing else; errors carry 1-based line and column.
WeldProgram parse_program(std::string_view text);

// -- validation -----------------------------------------------------------------

/// Closed reach box of the fixed-base arm; y is unconstrained.
struct Workspace {
  double x_min{0.0}, x_max{900.0};
  double z_min{0.0}, z_max{700.0};
};

struct Violation {
  int register_index;
  std::string message;
};

/// One violation per referenced register outside the workspace.
std::vector<Violation> validate_program(const WeldProgram& program, const Workspace& workspace = {});

}  // namespace weldcell::weldprog
