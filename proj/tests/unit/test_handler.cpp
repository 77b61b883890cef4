#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "weldcell/capture.hpp"
#include "weldcell/error.hpp"
#include "weldcell/handler.hpp"
#include "weldcell/operator.hpp"
#include "weldcell/weldprog.hpp"

using namespace weldcell;
using namespace weldcell::handler;
using msgbus::Command;
using msgbus::ProtocolMessage;

namespace {

ProtocolMessage msg(Command c, nlohmann::json payload = nlohmann::json::object()) {
  ProtocolMessage m;
  m.command = c;
  m.payload = std::move(payload);
  return m;
}

// Runs one command and returns the single reply.
ProtocolMessage step(Handler& h, Command c, nlohmann::json payload = nlohmann::json::object()) {
  auto out = h.handle(msg(c, std::move(payload)));
  EXPECT_EQ(out.size(), 1u) << msgbus::to_string(c);
  return out.empty() ? ProtocolMessage{} : out.front();
}

std::string program_for(const ProtocolMessage& answer) {
  operator_cli::JobChoices choices;
  return operator_cli::generate_program_text(choices, payload_from_json(answer.payload));
}

scene::PointCloud two_plate_cloud() {
  auto cap = scene::generate_structure(scene::canonical_structure(), scene::canonical_sampling());
  scene::PointCloud out;
  for (std::size_t i = 0; i < cap.cloud.size(); ++i) {
    if (cap.cloud.labels[i] == 2) continue;
    out.points.push_back(cap.cloud.points[i]);
    out.labels.push_back(cap.cloud.labels[i]);
  }
  return out;
}

void expect_error(const ProtocolMessage& reply, ErrorCode code, Command cause) {
  EXPECT_EQ(reply.command, Command::ErrorReport);
  EXPECT_EQ(reply.payload.value("code", ""), to_string(code));
  EXPECT_EQ(reply.payload.value("cause", ""), msgbus::to_string(cause));
  EXPECT_FALSE(reply.payload.value("message", "").empty());
}

}  // namespace

TEST(HandlerStates, HappyPath) {
  Handler h(HandlerConfig{});
  EXPECT_EQ(h.state(), HandlerState::AwaitingInterface);

  auto r = step(h, Command::InterfaceReady);
  EXPECT_EQ(r.command, Command::HandlerRobotReady);
  EXPECT_EQ(r.payload["robot_state"], "AtHome");
  EXPECT_EQ(h.state(), HandlerState::Ready);

  const auto answer = step(h, Command::Capture, {{"structure", "U"}});
  ASSERT_EQ(answer.command, Command::AnswerCapture);
  EXPECT_EQ(h.state(), HandlerState::Captured);
  const auto payload = payload_from_json(answer.payload);
  EXPECT_EQ(payload.structure, 'U');
  EXPECT_LE(payload.cloud.size(), kMaxPayloadPoints);
  EXPECT_EQ(payload.cloud_points, 50000u);

  r = step(h, Command::ProgramUpload, {{"program_name", "JOB"}, {"text", program_for(answer)}});
  EXPECT_EQ(r.command, Command::FTP_OK);
  EXPECT_EQ(r.payload["instructions"], 12);
  EXPECT_EQ(h.state(), HandlerState::ProgramLoaded);

  r = step(h, Command::Welding);
  EXPECT_EQ(r.command, Command::EndWelding);
  EXPECT_EQ(r.payload["weld_moves"], 4);
  EXPECT_GT(r.payload["duration_s"].get<double>(), 0.0);
  EXPECT_EQ(h.state(), HandlerState::Done);
  EXPECT_EQ(h.robot().motion_count(), 12u);
  ASSERT_TRUE(h.last_trace().has_value());

  r = step(h, Command::Pickup);
  EXPECT_EQ(r.command, Command::Pickuped);
  EXPECT_EQ(r.payload["robot_state"], "AtHome");
  EXPECT_EQ(h.state(), HandlerState::AwaitingInterface);
}

TEST(HandlerStates, WeldedPathMatchesSelectedLengths) {
  Handler h(HandlerConfig{});
  step(h, Command::InterfaceReady);
  const auto answer = step(h, Command::Capture);
  const auto payload = payload_from_json(answer.payload);
  step(h, Command::ProgramUpload, {{"text", program_for(answer)}});
  const auto r = step(h, Command::Welding);
  // Horizontal welded twice by halves, vertical likewise: one full length each.
  const double expected = payload.horizontal.length_max + payload.vertical.length_max;
  EXPECT_NEAR(r.payload["welded_path_mm"].get<double>(), expected, 0.01);
}

TEST(HandlerStates, OutOfOrderWeldingCausesNoMotion) {
  Handler h(HandlerConfig{});
  step(h, Command::InterfaceReady);
  expect_error(step(h, Command::Welding), ErrorCode::IllegalState, Command::Welding);
  EXPECT_EQ(h.robot().motion_count(), 0u);
  EXPECT_EQ(h.state(), HandlerState::Ready);

  step(h, Command::Capture);
  expect_error(step(h, Command::Welding), ErrorCode::IllegalState, Command::Welding);
  EXPECT_EQ(h.robot().motion_count(), 0u);
}

TEST(HandlerStates, CommandsBeforeInterfaceReadyAreRejected) {
  Handler h(HandlerConfig{});
  for (auto c : {Command::Capture, Command::ProgramUpload, Command::Welding, Command::Pickup}) {
    expect_error(step(h, c), ErrorCode::IllegalState, c);
    EXPECT_EQ(h.state(), HandlerState::AwaitingInterface);
  }
}

TEST(HandlerStates, NonOperatorCommandsAndOtherTopicsAreIgnored) {
  Handler h(HandlerConfig{});
  for (auto c : {Command::HandlerRobotReady, Command::AnswerCapture, Command::FTP_OK, Command::FTP_NO_OK,
                 Command::EndWelding, Command::Pickuped, Command::ErrorReport}) {
    EXPECT_TRUE(h.handle(msg(c)).empty());
  }
  auto m = msg(Command::InterfaceReady);
  m.topic = "elsewhere";
  EXPECT_TRUE(h.handle(m).empty());
  EXPECT_EQ(h.state(), HandlerState::AwaitingInterface);
}

TEST(HandlerStates, BadProgramIsFtpNoOk) {
  Handler h(HandlerConfig{});
  step(h, Command::InterfaceReady);
  step(h, Command::Capture);
  auto r = step(h, Command::ProgramUpload, {{"program_name", "X"}, {"text", "1: L P[1] FAST FINE;"}});
  EXPECT_EQ(r.command, Command::FTP_NO_OK);
  EXPECT_EQ(r.payload["program_name"], "X");
  EXPECT_EQ(h.state(), HandlerState::Captured);
  r = step(h, Command::ProgramUpload, {{"program_name", "X"}});
  EXPECT_EQ(r.command, Command::FTP_NO_OK);
}

TEST(HandlerStates, UnknownSchemeRejectedBeforeMotion) {
  Handler h(HandlerConfig{});
  step(h, Command::InterfaceReady);
  const auto answer = step(h, Command::Capture);
  step(h, Command::ProgramUpload, {{"text", program_for(answer)}});
  expect_error(step(h, Command::Welding, {{"weld_scheme", 99}}), ErrorCode::UnknownScheme, Command::Welding);
  EXPECT_EQ(h.robot().motion_count(), 0u);
  EXPECT_EQ(h.state(), HandlerState::Ready);
}

TEST(HandlerStates, RecaptureIsAllowed) {
  Handler h(HandlerConfig{});
  step(h, Command::InterfaceReady);
  EXPECT_EQ(step(h, Command::Capture).command, Command::AnswerCapture);
  EXPECT_EQ(step(h, Command::Capture).command, Command::AnswerCapture);
  EXPECT_EQ(h.state(), HandlerState::Captured);
}

TEST(HandlerCapture, TwoPlateSceneIsNoThreePlanes) {
  HandlerConfig cfg;
  cfg.scene = CloudSource{two_plate_cloud()};
  Handler h(cfg);
  step(h, Command::InterfaceReady);
  expect_error(step(h, Command::Capture), ErrorCode::NoThreePlanes, Command::Capture);
  EXPECT_EQ(h.state(), HandlerState::Ready);
  EXPECT_EQ(h.robot().motion_count(), 0u);
}

TEST(HandlerCapture, DeterministicAcrossHandlers) {
  Handler a(HandlerConfig{}), b(HandlerConfig{});
  step(a, Command::InterfaceReady);
  step(b, Command::InterfaceReady);
  auto pa = step(a, Command::Capture).payload;
  auto pb = step(b, Command::Capture).payload;
  pa.erase("capture_time_s");
  pb.erase("capture_time_s");
  EXPECT_EQ(pa, pb);
}

TEST(HandlerCapture, FileSourceMatchesInMemoryCloud) {
  const auto dir = std::filesystem::temp_directory_path() / "weldcell_handler_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "scene.ply";
  const auto cloud = scene::generate_structure(scene::canonical_structure(), scene::canonical_sampling()).cloud;
  scene::save_cloud(cloud, path, scene::CloudFormat::PlyAscii);

  HandlerConfig file_cfg;
  file_cfg.scene = FileSource{path};
  Handler h(file_cfg);
  auto r = step(h, Command::InterfaceReady);
  EXPECT_EQ(r.payload["scene_source"], path.string());
  const auto from_file = payload_from_json(step(h, Command::Capture).payload);

  HandlerConfig mem_cfg;
  mem_cfg.scene = CloudSource{cloud};
  Handler m(mem_cfg);
  step(m, Command::InterfaceReady);
  const auto from_memory = payload_from_json(step(m, Command::Capture).payload);
  EXPECT_LT((from_file.corner - from_memory.corner).norm(), 1e-3);
  EXPECT_NEAR(from_file.horizontal.length_max, from_memory.horizontal.length_max, 1e-3);
  std::filesystem::remove_all(dir);
}

TEST(HandlerCapture, MissingSceneFileFaults) {
  HandlerConfig cfg;
  cfg.scene = FileSource{"/nonexistent/scene.ply"};
  Handler h(cfg);
  expect_error(step(h, Command::InterfaceReady), ErrorCode::LoadError, Command::InterfaceReady);
  EXPECT_EQ(h.state(), HandlerState::AwaitingInterface);
}

TEST(HandlerConfigJson, ParsesAllSections) {
  const auto j = nlohmann::json::parse(R"({
    "bus": "10.0.0.2:7000",
    "topic": "cell/a",
    "scene": {"source": "synthetic", "points_per_plane": 2000, "noise_sigma": 0.1, "seed": 3},
    "ransac": {"max_iterations": 500, "inlier_threshold": 1.5},
    "robot": {"home": [400, 300, 600, 180, 0, 0], "v_joint_max": 800, "sample_rate": 25},
    "weld_schemes": {"4": {"speed": 12}},
    "weave_schemes": {"5": {"amplitude": 1.5, "frequency": 0.2}}
  })");
  const auto c = handler_config_from_json(j);
  EXPECT_EQ(c.bus_host, "10.0.0.2");
  EXPECT_EQ(c.bus_port, 7000);
  EXPECT_EQ(c.topic, "cell/a");
  const auto& syn = std::get<SyntheticSource>(c.scene);
  EXPECT_EQ(syn.sampling.points_per_plane, 2000u);
  EXPECT_DOUBLE_EQ(syn.sampling.noise_sigma, 0.1);
  EXPECT_EQ(syn.sampling.rng_seed, 3u);
  EXPECT_EQ(c.ransac.max_iterations, 500u);
  EXPECT_DOUBLE_EQ(c.ransac.inlier_threshold, 1.5);
  EXPECT_DOUBLE_EQ(c.robot.home.x, 400.0);
  EXPECT_DOUBLE_EQ(c.robot.v_joint_max, 800.0);
  EXPECT_DOUBLE_EQ(c.sample_rate, 25.0);
  EXPECT_DOUBLE_EQ(c.weld_schemes.at(4).speed, 12.0);
  EXPECT_DOUBLE_EQ(c.weave_schemes.at(5).amplitude, 1.5);
  EXPECT_EQ(c.weave_schemes.at(5).id, 5);
}

TEST(HandlerConfigJson, DefaultsAndErrors) {
  const auto c = handler_config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.bus_port, 5883);
  EXPECT_EQ(c.weld_schemes.size(), 3u);
  EXPECT_THROW(handler_config_from_json(nlohmann::json::parse(R"({"scene": {"source": "camera"}})")), Error);
  EXPECT_THROW(parse_address("localhost"), Error);
  EXPECT_THROW(parse_address("localhost:99999"), Error);
  EXPECT_EQ(parse_address("localhost:1883"), (std::pair<std::string, std::uint16_t>{"localhost", 1883}));
}
