#include <benchmark/benchmark.h>

#include <random>

#include "weldcell/calib.hpp"
#include "weldcell/capture.hpp"
#include "weldcell/message.hpp"
#include "weldcell/planefind.hpp"
#include "weldcell/robotsim.hpp"
#include "weldcell/scene.hpp"
#include "weldcell/weldprog.hpp"

using namespace weldcell;

namespace {

const scene::Capture& canonical() {
  static const auto cap = scene::generate_structure(scene::canonical_structure(), scene::canonical_sampling());
  return cap;
}

const handler::CapturePayload& canonical_payload() {
  static const auto payload = [] {
    const auto a = handler::analyze(canonical().cloud, planefind::RansacConfig{});
    return handler::make_payload(a, canonical().cloud, 'U', 0.0);
  }();
  return payload;
}

weldprog::WeldProgram canonical_program() {
  const auto& p = canonical_payload();
  return weldprog::generate_program(handler::select_seams(p, p.horizontal.length_max, p.vertical.length_max), {});
}

void BM_GenerateScene(benchmark::State& state) {
  auto sampling = scene::canonical_sampling();
  sampling.points_per_plane = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(scene::generate_structure(scene::canonical_structure(), sampling));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 3);
}
BENCHMARK(BM_GenerateScene)->Arg(5000)->Arg(15000)->Unit(benchmark::kMillisecond);

void BM_FitPlaneLsq(benchmark::State& state) {
  const auto& cloud = canonical().cloud;
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.labels[i] == 0) pts.push_back(cloud.points[i]);
  }
  for (auto _ : state) benchmark::DoNotOptimize(planefind::fit_plane_lsq(pts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}
BENCHMARK(BM_FitPlaneLsq);

void BM_ExtractPlanes(benchmark::State& state) {
  planefind::RansacConfig cfg;
  cfg.max_iterations = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(planefind::extract_planes(canonical().cloud, cfg));
}
BENCHMARK(BM_ExtractPlanes)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_AnalyzeCapture(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(handler::analyze(canonical().cloud, planefind::RansacConfig{}));
}
BENCHMARK(BM_AnalyzeCapture)->Unit(benchmark::kMillisecond);

void BM_SolveTcp(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ang(-0.6, 0.6);
  const Vec3 offset(12, -4, 180);
  std::vector<calib::FlangePose> poses;
  for (int i = 0; i < state.range(0); ++i) {
    const Mat3 r = (Eigen::AngleAxisd(ang(rng), Vec3::UnitX()) * Eigen::AngleAxisd(ang(rng), Vec3::UnitY()) *
                    Eigen::AngleAxisd(5 * ang(rng), Vec3::UnitZ()))
                       .toRotationMatrix();
    poses.push_back({Point3(600, 50, 120) - r * offset, r});
  }
  for (auto _ : state) benchmark::DoNotOptimize(calib::solve_tcp_offset(poses));
}
BENCHMARK(BM_SolveTcp)->Arg(4)->Arg(16);

void BM_GenerateAndRender(benchmark::State& state) {
  canonical_payload();
  for (auto _ : state) benchmark::DoNotOptimize(weldprog::render_program(canonical_program()));
}
BENCHMARK(BM_GenerateAndRender);

void BM_ParseProgram(benchmark::State& state) {
  const auto text = weldprog::render_program(canonical_program());
  for (auto _ : state) benchmark::DoNotOptimize(weldprog::parse_program(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseProgram);

void BM_EncodeDecodeAnswerCapture(benchmark::State& state) {
  msgbus::ProtocolMessage m;
  m.command = msgbus::Command::AnswerCapture;
  m.payload = handler::to_json(canonical_payload());
  for (auto _ : state) {
    const auto frame = msgbus::encode(m);
    benchmark::DoNotOptimize(msgbus::decode(frame));
    state.SetBytesProcessed(state.bytes_processed() + static_cast<std::int64_t>(frame.size()));
  }
}
BENCHMARK(BM_EncodeDecodeAnswerCapture)->Unit(benchmark::kMillisecond);

void BM_SimulateWeave(benchmark::State& state) {
  auto prog = canonical_program();
  prog.params.simulate = false;
  robotsim::ExecuteOptions opts;
  opts.weave = {1, 2.0, 0.05};
  opts.sample_rate = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(robotsim::simulate(prog, prog.positions.back(), opts));
}
BENCHMARK(BM_SimulateWeave)->Arg(50)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
