#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "weldcell/error.hpp"
#include "weldcell/weldprog.hpp"

using namespace weldcell;
using namespace weldcell::weldprog;
using seamgeom::OrientationClass;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string golden() { return read_file(std::string(WELDCELL_TEST_DATA) + "/u_structure.wp"); }

// Ground-truth U job: base z=100, back wall y=150, side wall x=150, corner
// at (150,150,100). Outward normals point into the open side of the U.
std::vector<SeamSelection> u_job(double length_h = 600.0, double length_v = 400.0) {
  const Point3 corner(150, 150, 100);
  const Plane base{Vec3::UnitZ(), 100.0};
  const Plane back{Vec3::UnitY(), 150.0};
  const Plane side{Vec3::UnitX(), 150.0};

  SeamSelection h;
  h.seam = {corner, Vec3::UnitX(), 600.0, {0, 1}, OrientationClass::Horizontal};
  h.selected_length = length_h;
  h.planes = {base, back};

  SeamSelection v;
  v.seam = {corner, Vec3::UnitZ(), 400.0, {1, 2}, OrientationClass::Vertical};
  v.selected_length = length_v;
  v.planes = {back, side};
  return {v, h};  // deliberately out of order
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

ParseError parse_error_of(std::string_view text) {
  try {
    parse_program(text);
  } catch (const ParseError& e) {
    return e;
  }
  ADD_FAILURE() << "no parse error";
  return ParseError(0, 0, "none");
}

std::size_t file_line_of(const std::string& text, std::string_view needle) {
  const auto pos = text.find(needle);
  return static_cast<std::size_t>(std::count(text.begin(), text.begin() + pos, '\n')) + 1;
}

}  // namespace

TEST(Render, InstructionForms) {
  EXPECT_EQ(render_instruction({3, Motion::Linear, 3, Speed::weld(), Termination::cnt(100), true}),
            "3: L P[3] WELD_SPEED CNT100;");
  EXPECT_EQ(render_instruction({1, Motion::Joint, 1, Speed::percent(10), Termination::fine(), false}),
            "1: J P[1] 10% FINE;");
  EXPECT_EQ(render_instruction({2, Motion::Linear, 2, Speed::mm_per_sec(100), Termination::fine(), false}),
            "2: L P[2] 100 mm/sec FINE;");
}

TEST(Golden, ParsesToTwelveInstructionsWithFourWelds) {
  const auto prog = parse_program(golden());
  EXPECT_EQ(prog.name, "USTRUCT");
  ASSERT_EQ(prog.instructions.size(), 12u);
  EXPECT_EQ(prog.weld_count(), 4u);
  std::vector<int> weld_lines;
  for (const auto& i : prog.instructions) {
    if (i.weld) weld_lines.push_back(i.line_no);
  }
  EXPECT_EQ(weld_lines, (std::vector<int>{3, 6, 9, 11}));
  EXPECT_EQ(prog.instructions[4].position_index, 3);  // revisits P[3]
  EXPECT_EQ(prog.instructions[6].motion, Motion::Joint);
  EXPECT_EQ(prog.params, (ProgramParams{1, 0, true}));
}

TEST(Golden, RenderReproducesTheFileByteForByte) {
  EXPECT_EQ(render_program(parse_program(golden())), golden());
}

TEST(Parse, UnknownSpeedTokenAtItsLine) {
  auto text = golden();
  const std::string good = "3: L P[3] WELD_SPEED CNT100;";
  const auto at = text.find(good);
  text.replace(at, good.size(), "3: L P[3] WELDSPEED CNT100;");
  const auto e = parse_error_of(text);
  EXPECT_EQ(e.line(), file_line_of(text, "3: L P[3] WELDSPEED"));
  EXPECT_EQ(e.column(), 11u);
  EXPECT_NE(std::string(e.what()).find("WELDSPEED"), std::string::npos);
}

TEST(Parse, UnknownSpeedTokenInBareBody) {
  // Three register lines come first, so instruction 3 sits on line 6.
  const std::string text =
      "P[1] = 0 0 0 0 0 0\nP[2] = 0 0 0 0 0 0\nP[3] = 0 0 0 0 0 0\n"
      "1: J P[1] 10% FINE;\n2: L P[2] 100 mm/sec FINE;\n3: L P[3] WELDSPEED CNT100;\n";
  EXPECT_EQ(parse_error_of(text).line(), 6u);
}

TEST(Parse, RejectsMalformedInput) {
  EXPECT_EQ(parse_error_of("").line(), 1u);
  EXPECT_EQ(parse_error_of("P[1] = 0 0 0 0 0 0\n").line(), 1u);
  EXPECT_EQ(parse_error_of("P[1] = 0 0 0 0 0 0\n1: L P[1] 100 mm/sec FINE\n").line(), 2u);  // missing ';'
  EXPECT_EQ(parse_error_of("P[1] = 0 0 0 0 0 0\n1: J P[1] WELD_SPEED CNT100;\n").line(), 2u);
  EXPECT_EQ(parse_error_of("P[1] = 0 0 0 0 0 0\n1: L P[2] 100 mm/sec FINE;\n").line(), 2u);
  EXPECT_EQ(parse_error_of("P[1] = 0 0 0 0 0 0\n2: L P[1] 100 mm/sec FINE;\n").line(), 2u);
  EXPECT_EQ(parse_error_of("P[1] = 0 0 0 0 0 0\nP[1] = 1 0 0 0 0 0\n").line(), 2u);
  EXPECT_EQ(parse_error_of("P[1] = 0 0 0 0 0 0\n1: L P[1] 100 mm/sec CNT101;\n").line(), 2u);
  EXPECT_EQ(parse_error_of("P[1] = 0 0 0 0 0 0\n1: J P[1] 0% FINE;\n").line(), 2u);
  EXPECT_EQ(parse_error_of("P[1] = 0 0 0 0 0 0\n1: L P[1] 100 mm/sec FINE; x\n").line(), 2u);
  EXPECT_EQ(parse_error_of("P[1] = 0 0 0 0 0 0\n1: L P[1] 100 mm/sec FINE;\nP[2] = 0 0 0 0 0 0\n").line(), 3u);
}

TEST(Parse, TrailingWhitespaceAccepted) {
  const auto prog = parse_program("P[1] = 1 2 3 0 0 0  \r\n1: L P[1] 100 mm/sec FINE;  \t\n");
  ASSERT_EQ(prog.instructions.size(), 1u);
  EXPECT_EQ(prog.name, "WELD");
  EXPECT_DOUBLE_EQ(prog.positions[0].y, 2.0);
}

TEST(Generate, CanonicalShape) {
  const auto prog = generate_program(u_job(), {1, 0, true});
  ASSERT_EQ(prog.instructions.size(), 12u);
  EXPECT_EQ(prog.positions.size(), 10u);
  std::vector<int> weld_lines;
  for (const auto& i : prog.instructions) {
    if (i.weld) weld_lines.push_back(i.line_no);
  }
  EXPECT_EQ(weld_lines, (std::vector<int>{3, 6, 9, 11}));
  EXPECT_EQ(render_instruction(prog.instructions[2]), "3: L P[3] WELD_SPEED CNT100;");
  EXPECT_EQ(render_instruction(prog.instructions[0]), "1: J P[1] 10% FINE;");
  EXPECT_EQ(render_instruction(prog.instructions[11]), "12: J P[10] 10% FINE;");
  for (std::size_t i = 0; i < prog.instructions.size(); ++i) {
    EXPECT_EQ(prog.instructions[i].line_no, static_cast<int>(i) + 1);
  }
  EXPECT_TRUE(validate_program(prog).empty());
}

TEST(Generate, HorizontalSeamWeldedFirstAndPassesTileTheSeam) {
  const auto prog = generate_program(u_job(), {});
  auto pos = [&](int instr) { return prog.find(prog.instructions[instr - 1].position_index)->position(); };
  // Horizontal: 2 -> 3 and 5 -> 6 along x; vertical: 8 -> 9 and 10 -> 11 along z.
  EXPECT_LT((pos(2) - Point3(150, 150, 100)).norm(), 1e-9);
  EXPECT_LT((pos(3) - Point3(450, 150, 100)).norm(), 1e-9);
  EXPECT_LT((pos(5) - pos(3)).norm(), 1e-9);
  EXPECT_LT((pos(6) - Point3(750, 150, 100)).norm(), 1e-9);
  EXPECT_LT((pos(8) - Point3(150, 150, 100)).norm(), 1e-9);
  EXPECT_LT((pos(9) - Point3(150, 150, 300)).norm(), 1e-9);
  EXPECT_LT((pos(10) - Point3(150, 150, 500)).norm(), 1e-9);
  EXPECT_LT((pos(11) - pos(9)).norm(), 1e-9);
  // Approach points sit 50 mm off the seam on the open side.
  EXPECT_NEAR((pos(1) - pos(2)).norm(), 50.0, 1e-3);
  EXPECT_GT(pos(1).y(), 150.0);
  EXPECT_GT(pos(1).z(), 100.0);
}

TEST(Generate, HomeRegisterIsLast) {
  const auto prog = generate_program(u_job(), {});
  const auto& home = prog.positions.back();
  EXPECT_EQ(home.index, 10);
  EXPECT_EQ(home.position(), Point3(450, 350, 650));
  EXPECT_EQ(home.w, 180.0);
}

TEST(Generate, SingleSeamJob) {
  const auto job = u_job();
  const auto prog = generate_program(std::span(job).first(1), {});
  EXPECT_EQ(prog.instructions.size(), 6u);
  EXPECT_EQ(prog.weld_count(), 2u);
}

TEST(Generate, SelectionErrors) {
  EXPECT_EQ(code_of([] { generate_program({}, {}); }), ErrorCode::EmptySelection);
  EXPECT_EQ(code_of([] { generate_program(u_job(0.0, 400.0), {}); }), ErrorCode::EmptySelection);
  EXPECT_EQ(code_of([] { generate_program(u_job(600.5, 400.0), {}); }), ErrorCode::LengthExceedsMax);
  EXPECT_EQ(code_of([] { generate_program(u_job(600.0, 0.5), {}); }), ErrorCode::InvalidArgument);
  EXPECT_NO_THROW(generate_program(u_job(600.0, 400.0), {}));
}

TEST(Generate, TorchOrientationMatchesRegister) {
  const auto job = u_job();
  const auto prog = generate_program(job, {});
  // P[3] is the horizontal mid point: approach bisects +y and +z, pointing
  // into the joint.
  const Mat3 r = prog.find(3)->rotation();
  const Vec3 tilted = r.col(2);
  const Vec3 bisector = -(Vec3::UnitY() + Vec3::UnitZ()).normalized();
  EXPECT_NEAR(angle_between_deg(tilted, bisector), seamgeom::kDefaultTravelAngle, 0.01);
  EXPECT_GT(r.col(0).x(), 0.9);
}

TEST(Validate, WorkspaceBoundsAreClosed) {
  WeldProgram prog;
  prog.positions = {{1, 900.0, 0, 700.0, 0, 0, 0}, {2, 950.0, 0, 100.0, 0, 0, 0},
                    {3, 100.0, 0, 700.5, 0, 0, 0}, {4, 900.001, 0, 0, 0, 0, 0}};
  for (int i = 1; i <= 4; ++i) {
    prog.instructions.push_back({i, Motion::Linear, i, Speed::mm_per_sec(100), Termination::fine(), false});
  }
  const auto v = validate_program(prog);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0].register_index, 2);
  EXPECT_EQ(v[1].register_index, 3);
  EXPECT_EQ(v[2].register_index, 4);
}

TEST(Validate, UnreferencedRegistersAreIgnored) {
  WeldProgram prog;
  prog.positions = {{1, 100.0, 0, 100.0, 0, 0, 0}, {2, 5000.0, 0, 100.0, 0, 0, 0}};
  prog.instructions.push_back({1, Motion::Joint, 1, Speed::percent(10), Termination::fine(), false});
  EXPECT_TRUE(validate_program(prog).empty());
}

TEST(Validate, ShiftedJobIsFlagged) {
  auto job = u_job();
  for (auto& s : job) {
    s.seam.corner.x() += 300.0;
    s.planes.second.d += s.planes.second.normal.x() * 300.0;
    s.planes.first.d += s.planes.first.normal.x() * 300.0;
  }
  const auto v = validate_program(generate_program(job, {}));
  EXPECT_FALSE(v.empty());
}

TEST(Wpr, RoundTripAndConvention) {
  EXPECT_LT((rotation_from_wpr(0, 0, 90) * Vec3::UnitX() - Vec3::UnitY()).norm(), 1e-12);
  EXPECT_LT((rotation_from_wpr(90, 0, 0) * Vec3::UnitY() - Vec3::UnitZ()).norm(), 1e-12);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-179.0, 179.0), pitch(-89.0, 89.0);
  for (int i = 0; i < 500; ++i) {
    const Mat3 r = rotation_from_wpr(u(rng), pitch(rng), u(rng));
    const Vec3 wpr = wpr_from_rotation(r);
    EXPECT_LT((rotation_from_wpr(wpr.x(), wpr.y(), wpr.z()) - r).norm(), 1e-9);
  }
  const Mat3 lock = rotation_from_wpr(30, 90, 0);
  const Vec3 wpr = wpr_from_rotation(lock);
  EXPECT_LT((rotation_from_wpr(wpr.x(), wpr.y(), wpr.z()) - lock).norm(), 1e-9);
}

TEST(RoundTrip, ThousandRandomGeneratedPrograms) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> coord(-400.0, 400.0), len(1.0, 500.0), ang(0.0, 2 * kPi);
  std::uniform_int_distribution<int> scheme(1, 3), weave(0, 2), coin(0, 1), nseams(1, 3);
  int checked = 0;
  while (checked < 1000) {
    const Mat3 frame = Eigen::AngleAxisd(ang(rng), Vec3(coord(rng), coord(rng), coord(rng)).normalized())
                           .toRotationMatrix();
    const Point3 corner(coord(rng), coord(rng), coord(rng));
    std::vector<SeamSelection> seams;
    const int n = nseams(rng);
    for (int k = 0; k < n; ++k) {
      SeamSelection s;
      const Vec3 dir = frame.col(k % 3);
      const Vec3 na = frame.col((k + 1) % 3), nb = frame.col((k + 2) % 3);
      s.seam.corner = corner;
      s.seam.direction = dir;
      s.seam.length_max = len(rng);
      s.seam.orientation_class = seamgeom::classify(dir);
      s.selected_length = std::max(1.0, s.seam.length_max * std::uniform_real_distribution<double>(0.1, 1.0)(rng));
      s.planes = {{na, na.dot(corner)}, {nb, nb.dot(corner)}};
      seams.push_back(s);
    }
    GenerateOptions opts;
    opts.name = "JOB" + std::to_string(checked);
    opts.joint_percent = std::uniform_int_distribution<int>(1, 100)(rng);
    const auto prog = generate_program(seams, {scheme(rng), weave(rng), coin(rng) == 1}, opts);
    const auto text = render_program(prog);
    const auto back = parse_program(text);
    ASSERT_EQ(back, prog) << text;
    ASSERT_EQ(render_program(back), text);
    ++checked;
  }
}
