#include "weldcell/weldprog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include <fmt/core.h>

#include "weldcell/error.hpp"

namespace weldcell::weldprog {

Mat3 PositionRegister::rotation() const { return rotation_from_wpr(w, p, r); }

const PositionRegister* WeldProgram::find(int index) const {
  auto it = std::find_if(positions.begin(), positions.end(),
                         [&](const PositionRegister& reg) { return reg.index == index; });
  return it == positions.end() ? nullptr : &*it;
}

std::size_t WeldProgram::weld_count() const {
  return static_cast<std::size_t>(
      std::count_if(instructions.begin(), instructions.end(), [](const Instruction& i) { return i.weld; }));
}

Vec3 wpr_from_rotation(const Mat3& m) {
  const double cp = std::hypot(m(0, 0), m(1, 0));
  double w = 0.0, p = 0.0, r = 0.0;
  if (cp > 1e-9) {
    w = std::atan2(m(2, 1), m(2, 2));
    p = std::atan2(-m(2, 0), cp);
    r = std::atan2(m(1, 0), m(0, 0));
  } else {
    // Gimbal lock: p = +-90 deg, only w - r (or w + r) is observable.
    w = std::atan2(-m(1, 2), m(1, 1));
    p = std::atan2(-m(2, 0), cp);
    r = 0.0;
  }
  return {rad2deg(w), rad2deg(p), rad2deg(r)};
}

Mat3 rotation_from_wpr(double w, double p, double r) {
  return (Eigen::AngleAxisd(deg2rad(r), Vec3::UnitZ()) * Eigen::AngleAxisd(deg2rad(p), Vec3::UnitY()) *
          Eigen::AngleAxisd(deg2rad(w), Vec3::UnitX()))
      .toRotationMatrix();
}

// -- generation -----------------------------------------------------------------

namespace {

double quantize(double v) {
  double q = std::round(v * 1000.0) / 1000.0;
  return q == 0.0 ? 0.0 : q;  // drop negative zero
}

PositionRegister make_register(int index, const Point3& pos, const Mat3& rot) {
  const Vec3 wpr = wpr_from_rotation(rot);
  return PositionRegister{index,          quantize(pos.x()), quantize(pos.y()), quantize(pos.z()),
                          quantize(wpr.x()), quantize(wpr.y()), quantize(wpr.z())};
}

class ProgramBuilder {
 public:
  explicit ProgramBuilder(WeldProgram& prog) : prog_(prog) {}

  int add_register(const Point3& pos, const Mat3& rot) {
    const int index = static_cast<int>(prog_.positions.size()) + 1;
    prog_.positions.push_back(make_register(index, pos, rot));
    return index;
  }

  int add_register(PositionRegister reg) {
    reg.index = static_cast<int>(prog_.positions.size()) + 1;
    prog_.positions.push_back(reg);
    return reg.index;
  }

  void move(Motion motion, int reg, Speed speed, Termination term) {
    Instruction instr;
    instr.line_no = static_cast<int>(prog_.instructions.size()) + 1;
    instr.motion = motion;
    instr.position_index = reg;
    instr.speed = speed;
    instr.termination = term;
    instr.weld = speed.kind == Speed::Kind::WeldSpeed;
    prog_.instructions.push_back(instr);
  }

 private:
  WeldProgram& prog_;
};

}  // namespace

WeldProgram generate_program(std::span<const SeamSelection> seams, const ProgramParams& params,
                             const GenerateOptions& options) {
  if (seams.empty()) throw Error(ErrorCode::EmptySelection, "no seam selected");
  for (const auto& s : seams) {
    if (!(s.selected_length > 0.0)) {
      throw Error(ErrorCode::EmptySelection, "selected length must be positive");
    }
    if (s.selected_length < 1.0) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("selected length {} mm is below the 1 mm minimum", s.selected_length));
    }
    if (s.selected_length > s.seam.length_max) {
      throw Error(ErrorCode::LengthExceedsMax,
                  fmt::format("selected length {:.1f} mm exceeds the measured maximum {:.1f} mm",
                              s.selected_length, s.seam.length_max));
    }
  }

  std::vector<const SeamSelection*> order;
  for (const auto& s : seams) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](const SeamSelection* a, const SeamSelection* b) {
    return a->seam.orientation_class == seamgeom::OrientationClass::Horizontal &&
           b->seam.orientation_class == seamgeom::OrientationClass::Vertical;
  });

  WeldProgram prog;
  prog.name = options.name;
  prog.params = params;
  ProgramBuilder b(prog);

  const Speed approach = Speed::mm_per_sec(options.approach_speed);
  const Speed joint = Speed::percent(options.joint_percent);

  bool first = true;
  for (const SeamSelection* sel : order) {
    const auto& seam = sel->seam;
    const double half = 0.5 * sel->selected_length;
    const Point3 start = seamgeom::point_along_seam(seam.corner, seam.direction, 0.0);
    const Point3 mid = seamgeom::point_along_seam(seam.corner, seam.direction, half);
    const Point3 end = seamgeom::point_along_seam(seam.corner, seam.direction, sel->selected_length);

    auto pose = [&](const Point3& at, int sign) {
      return seamgeom::torch_pose_at(at, seam, sel->planes, sign, options.travel_angle);
    };
    auto backed_off = [&](const seamgeom::TorchPose& tp) -> Point3 {
      return tp.position - options.approach_offset * tp.approach_axis();
    };

    const auto start_pose = pose(start, +1);
    const auto mid_pose = pose(mid, +1);

    const int p_approach = b.add_register(backed_off(start_pose), start_pose.rotation);
    const int p_start = b.add_register(start, start_pose.rotation);
    const int p_mid = b.add_register(mid, mid_pose.rotation);

    b.move(first ? Motion::Joint : Motion::Linear, p_approach, first ? joint : approach,
           Termination::fine());
    b.move(Motion::Linear, p_start, approach, Termination::fine());
    b.move(Motion::Linear, p_mid, Speed::weld(), Termination::cnt(100));

    if (seam.orientation_class == seamgeom::OrientationClass::Horizontal) {
      const int p_retreat = b.add_register(backed_off(mid_pose), mid_pose.rotation);
      const auto end_pose = pose(end, +1);
      const int p_end = b.add_register(end, end_pose.rotation);
      b.move(Motion::Linear, p_retreat, approach, Termination::fine());
      b.move(Motion::Linear, p_mid, approach, Termination::fine());
      b.move(Motion::Linear, p_end, Speed::weld(), Termination::cnt(100));
    } else {
      const auto end_pose = pose(end, -1);
      const int p_end = b.add_register(end, end_pose.rotation);
      b.move(Motion::Linear, p_end, approach, Termination::fine());
      b.move(Motion::Linear, p_mid, Speed::weld(), Termination::cnt(100));
    }
    first = false;
  }

  const int p_home = b.add_register(options.home);
  b.move(Motion::Joint, p_home, joint, Termination::fine());
  return prog;
}

// -- rendering ------------------------------------------------------------------

namespace {

std::string render_speed(const Speed& s) {
  switch (s.kind) {
    case Speed::Kind::Percent: return fmt::format("{}%", s.value);
    case Speed::Kind::MmPerSec: return fmt::format("{} mm/sec", s.value);
    case Speed::Kind::WeldSpeed: return "WELD_SPEED";
  }
  return {};
}

std::string render_term(const Termination& t) {
  return t.kind == Termination::Kind::Fine ? std::string("FINE") : fmt::format("CNT{}", t.value);
}

}  // namespace

std::string render_instruction(const Instruction& instr) {
  return fmt::format("{}: {} P[{}] {} {};", instr.line_no, instr.motion == Motion::Joint ? 'J' : 'L',
                     instr.position_index, render_speed(instr.speed), render_term(instr.termination));
}

std::string render_program(const WeldProgram& program) {
  std::string out;
  out += fmt::format("/PROG {}\n", program.name);
  out += fmt::format("/PARAM weld_scheme={} weave_scheme={} simulate={}\n", program.params.weld_scheme,
                     program.params.weave_scheme, program.params.simulate ? "true" : "false");
  for (const auto& reg : program.positions) {
    out += fmt::format("P[{}] = {:.3f} {:.3f} {:.3f} {:.3f} {:.3f} {:.3f}\n", reg.index, reg.x, reg.y,
                       reg.z, reg.w, reg.p, reg.r);
  }
  out += '\n';
  for (const auto& instr : program.instructions) {
    out += render_instruction(instr);
    out += '\n';
  }
  return out;
}

// -- parsing --------------------------------------------------------------------

namespace {

/// Cursor over one line; columns are 1-based.
class LineCursor {
 public:
  LineCursor(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  [[nodiscard]] bool done() const { return pos_ >= text_.size(); }
  [[nodiscard]] std::size_t column() const { return pos_ + 1; }
  [[nodiscard]] std::string_view rest() const { return text_.substr(pos_); }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, column(), what); }
  [[noreturn]] void fail_at(std::size_t col, const std::string& what) const {
    throw ParseError(line_, col, what);
  }

  void expect(std::string_view lit, std::string_view what) {
    if (text_.substr(pos_, lit.size()) != lit) fail(fmt::format("expected {}", what));
    pos_ += lit.size();
  }

  bool accept(std::string_view lit) {
    if (text_.substr(pos_, lit.size()) == lit) {
      pos_ += lit.size();
      return true;
    }
    return false;
  }

  int integer(std::string_view what) {
    int v = 0;
    const char* b = text_.data() + pos_;
    auto [ptr, ec] = std::from_chars(b, text_.data() + text_.size(), v);
    if (ec != std::errc{} || ptr == b || *b == '-' || *b == '+') fail(fmt::format("expected {}", what));
    pos_ += static_cast<std::size_t>(ptr - b);
    return v;
  }

  double number(std::string_view what) {
    double v = 0.0;
    const char* b = text_.data() + pos_;
    auto [ptr, ec] = std::from_chars(b, text_.data() + text_.size(), v);
    if (ec != std::errc{} || ptr == b || !std::isfinite(v)) fail(fmt::format("expected {}", what));
    pos_ += static_cast<std::size_t>(ptr - b);
    return v;
  }

  std::string_view word() {
    std::size_t end = pos_;
    while (end < text_.size() && text_[end] != ' ') ++end;
    auto w = text_.substr(pos_, end - pos_);
    pos_ = end;
    return w;
  }

 private:
  std::string_view text_;
  std::size_t line_;
  std::size_t pos_{0};
};

std::string_view rtrim(std::string_view s) {
  auto e = s.find_last_not_of(" \t\r");
  return e == std::string_view::npos ? std::string_view{} : s.substr(0, e + 1);
}

PositionRegister parse_register(LineCursor& c) {
  PositionRegister reg;
  c.expect("P[", "'P['");
  reg.index = c.integer("register index");
  if (reg.index < 1) c.fail("register index must be >= 1");
  c.expect("] = ", "'] = '");
  double* fields[] = {&reg.x, &reg.y, &reg.z, &reg.w, &reg.p, &reg.r};
  for (std::size_t i = 0; i < 6; ++i) {
    if (i > 0) c.expect(" ", "' '");
    *fields[i] = c.number("coordinate");
  }
  if (!c.done()) c.fail("unexpected text after register");
  return reg;
}

void parse_params(LineCursor& c, ProgramParams& params) {
  c.expect("/PARAM ", "'/PARAM '");
  c.expect("weld_scheme=", "'weld_scheme='");
  params.weld_scheme = c.integer("weld scheme id");
  c.expect(" weave_scheme=", "' weave_scheme='");
  params.weave_scheme = c.integer("weave scheme id");
  c.expect(" simulate=", "' simulate='");
  if (c.accept("true")) {
    params.simulate = true;
  } else if (c.accept("false")) {
    params.simulate = false;
  } else {
    c.fail("expected true or false");
  }
  if (!c.done()) c.fail("unexpected text after parameters");
}

Instruction parse_instruction(LineCursor& c) {
  Instruction instr;
  instr.line_no = c.integer("line number");
  c.expect(": ", "': '");

  const std::size_t motion_col = c.column();
  if (c.accept("J")) {
    instr.motion = Motion::Joint;
  } else if (c.accept("L")) {
    instr.motion = Motion::Linear;
  } else {
    c.fail("unknown motion type (expected J or L)");
  }
  c.expect(" P[", "' P['");
  instr.position_index = c.integer("register index");
  c.expect("] ", "'] '");

  const std::size_t speed_col = c.column();
  if (c.accept("WELD_SPEED")) {
    instr.speed = Speed::weld();
  } else {
    auto tok = c.word();
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec == std::errc{} && ptr != tok.data() && std::string_view(ptr, tok.data() + tok.size() - ptr) == "%") {
      if (v < 1 || v > 100) c.fail_at(speed_col, "joint speed must be within 1..100%");
      instr.speed = Speed::percent(v);
    } else if (ec == std::errc{} && ptr == tok.data() + tok.size() && c.accept(" mm/sec")) {
      if (v < 1) c.fail_at(speed_col, "linear speed must be positive");
      instr.speed = Speed::mm_per_sec(v);
    } else {
      c.fail_at(speed_col, fmt::format("unknown speed token '{}'", tok));
    }
  }
  instr.weld = instr.speed.kind == Speed::Kind::WeldSpeed;
  if (instr.weld && instr.motion != Motion::Linear) {
    c.fail_at(motion_col, "WELD_SPEED requires a linear (L) move");
  }

  c.expect(" ", "' '");
  if (c.accept("FINE")) {
    instr.termination = Termination::fine();
  } else if (c.accept("CNT")) {
    const int v = c.integer("CNT value");
    if (v > 100) c.fail("CNT value must be within 0..100");
    instr.termination = Termination::cnt(v);
  } else {
    c.fail("unknown termination (expected FINE or CNTn)");
  }
  if (c.done()) c.fail("missing ';'");
  c.expect(";", "';'");
  if (!c.done()) c.fail("unexpected text after ';'");
  return instr;
}

}  // namespace

WeldProgram parse_program(std::string_view text) {
  WeldProgram prog;
  prog.name.clear();
  std::set<int> defined;
  bool in_body = false;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    auto raw = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    const auto line = rtrim(raw);
    if (line.empty()) continue;
    LineCursor c(line, line_no);

    if (line.front() >= '0' && line.front() <= '9') {
      in_body = true;
      Instruction instr = parse_instruction(c);
      const int expected = static_cast<int>(prog.instructions.size()) + 1;
      if (instr.line_no != expected) {
        throw ParseError(line_no, 1, fmt::format("line number {} out of sequence (expected {})",
                                                 instr.line_no, expected));
      }
      if (!defined.contains(instr.position_index)) {
        throw ParseError(line_no, 0,
                         fmt::format("instruction references undefined register P[{}]",
                                     instr.position_index));
      }
      prog.instructions.push_back(instr);
    } else if (in_body) {
      c.fail("unexpected header line after instructions");
    } else if (line.starts_with("/PROG ")) {
      prog.name = std::string(line.substr(6));
      if (prog.name.empty() || prog.name.find(' ') != std::string::npos) c.fail("invalid program name");
    } else if (line.starts_with("/PARAM")) {
      parse_params(c, prog.params);
    } else if (line.starts_with("P[")) {
      auto reg = parse_register(c);
      if (!defined.insert(reg.index).second) {
        throw ParseError(line_no, 1, fmt::format("duplicate register P[{}]", reg.index));
      }
      prog.positions.push_back(reg);
    } else {
      c.fail("unrecognized line");
    }
  }

  if (prog.instructions.empty()) {
    // A trailing newline terminates the last line rather than opening a new one.
    const std::size_t last = line_no - (text.ends_with('\n') ? 1 : 0);
    throw ParseError(std::max<std::size_t>(last, 1), 0, "program has no instructions");
  }
  if (prog.name.empty()) prog.name = "WELD";
  return prog;
}

// -- validation -----------------------------------------------------------------

std::vector<Violation> validate_program(const WeldProgram& program, const Workspace& ws) {
  std::set<int> referenced;
  for (const auto& instr : program.instructions) referenced.insert(instr.position_index);

  std::vector<Violation> out;
  for (int idx : referenced) {
    const auto* reg = program.find(idx);
    if (reg == nullptr) {
      out.push_back({idx, fmt::format("P[{}] is not defined", idx)});
      continue;
    }
    const bool x_ok = reg->x >= ws.x_min && reg->x <= ws.x_max;
    const bool z_ok = reg->z >= ws.z_min && reg->z <= ws.z_max;
    if (!x_ok || !z_ok) {
      out.push_back({idx, fmt::format("P[{}] at x={:.1f} z={:.1f} is outside the {}x{} mm workspace", idx,
                                      reg->x, reg->z, ws.x_max - ws.x_min, ws.z_max - ws.z_min)});
    }
  }
  return out;
}

}  // namespace weldcell::weldprog
