#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "weldcell/broker.hpp"
#include "weldcell/calib.hpp"
#include "weldcell/handler.hpp"
#include "weldcell/operator.hpp"
#include "weldcell/scene.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>

#include "generate_server.hpp"

namespace wc = weldcell;
namespace op = weldcell::operator_cli;

namespace {

std::atomic<bool> g_stop{false};

void wait_for_signal() {
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

// Flange poses, one per row: x,y,z then the rotation matrix row-major
// (12 columns). A leading header row starting with "x" is skipped.
std::vector<wc::calib::FlangePose> read_poses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw wc::Error(wc::ErrorCode::IoError, fmt::format("cannot open {}", path));
  std::vector<wc::calib::FlangePose> poses;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == 'x') continue;
    std::array<double, 12> v{};
    std::istringstream row(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(row, cell, ',')) {
      if (k == v.size()) throw wc::ParseError(n, 0, "expected 12 values");
      try {
        std::size_t used = 0;
        v[k] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw wc::ParseError(n, 0, fmt::format("invalid number '{}'", cell));
      }
      ++k;
    }
    if (k != v.size()) throw wc::ParseError(n, 0, fmt::format("expected 12 values, found {}", k));
    wc::Mat3 r;
    r << v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11];
    poses.push_back({{v[0], v[1], v[2]}, r});
  }
  return poses;
}

struct JobArgs {
  std::string structure{"U"};
  std::string length_h{"max"};
  std::string length_v{"max"};
  int weld_scheme{1};
  int weave_scheme{0};
  bool simulate{false};
  std::string bus;
  std::string handler_config;
  double hmi_delay{0.0};
  int timeout_s{30};

  void add_to(CLI::App* app) {
    app->add_option("--structure", structure, "Structure type")->check(CLI::IsMember({"L", "U"}));
    app->add_option("--length-h", length_h, "Horizontal weld length from the corner: mm, 0 to skip, or max");
    app->add_option("--length-v", length_v, "Vertical weld length from the corner: mm, 0 to skip, or max");
    app->add_option("--weld-scheme", weld_scheme, "Welding scheme id");
    app->add_option("--weave-scheme", weave_scheme, "Weave sine scheme id");
    app->add_flag("--simulate", simulate, "Dry run without arc or weave");
    app->add_option("--bus", bus, "Broker host:port; omitted runs broker and handler in-process");
    app->add_option("--handler-config", handler_config, "Handler JSON config for the in-process cell");
    app->add_option("--hmi-delay", hmi_delay, "Synthetic operator time added to the interaction step, s");
    app->add_option("--timeout", timeout_s, "Per-step timeout, s");
  }

  op::JobChoices choices() const {
    op::JobChoices c;
    c.structure = wc::scene::structure_from_char(structure[0]);
    c.length_h = op::parse_length(length_h);
    c.length_v = op::parse_length(length_v);
    c.weld_scheme = weld_scheme;
    c.weave_scheme = weave_scheme;
    c.simulate = simulate;
    return c;
  }
};

// Connects to --bus, or brings up a private cell when none is given.
template <typename Fn>
int with_cell(const JobArgs& args, Fn&& fn) {
  std::unique_ptr<op::LocalCell> cell;
  op::OperatorConfig cfg;
  if (args.bus.empty()) {
    auto hcfg = args.handler_config.empty() ? wc::handler::HandlerConfig{}
                                            : wc::handler::load_handler_config(args.handler_config);
    cell = std::make_unique<op::LocalCell>(std::move(hcfg));
    cfg = cell->operator_config();
  } else {
    std::tie(cfg.bus_host, cfg.bus_port) = wc::handler::parse_address(args.bus);
  }
  cfg.hmi_delay_s = args.hmi_delay;
  cfg.step_timeout = std::chrono::seconds(args.timeout_s);
  return fn(cfg);
}

int run_operator(const JobArgs& args, const std::string& log) {
  return with_cell(args, [&](op::OperatorConfig cfg) {
    if (!log.empty()) cfg.log_path = log;
    const auto result = op::run_job(args.choices(), cfg);
    const auto& r = result.record;
    fmt::print("job done: structure {} | horizontal {:.1f} / {:.1f} cm | vertical {:.1f} / {:.1f} cm | process {:.3f} s\n",
               r.structure_type, r.horizontal_welded_distance_cm, r.horizontal_max_size_cm,
               r.vertical_welded_distance_cm, r.vertical_max_size_cm, r.process_time_s);
    return 0;
  });
}

int run_bench(const JobArgs& args, int repeats, const std::string& csv) {
  return with_cell(args, [&](op::OperatorConfig cfg) {
    const auto report = op::bench(repeats, args.choices(), cfg);
    op::write_bench_text(report, std::cout);
    if (!csv.empty()) {
      std::ofstream out(csv);
      if (!out) throw wc::Error(wc::ErrorCode::IoError, fmt::format("cannot write {}", csv));
      op::write_bench_csv(report, out);
    }
    return 0;
  });
}

int run_calib(const std::string& poses_path, const std::string& orient_path) {
  const auto poses = read_poses(poses_path);
  if (orient_path.empty()) {
    const auto s = wc::calib::solve_tcp_offset(poses);
    fmt::print("tcp offset (flange): {:.4f} {:.4f} {:.4f} mm\n", s.offset.x(), s.offset.y(), s.offset.z());
    fmt::print("reference point:     {:.4f} {:.4f} {:.4f} mm\n", s.reference_point.x(), s.reference_point.y(),
               s.reference_point.z());
    fmt::print("residual rms:        {:.4f} mm\n", s.residual);
    return 0;
  }
  const auto orient = read_poses(orient_path);
  if (orient.size() != 3) {
    throw wc::Error(wc::ErrorCode::InvalidArgument, "--orient needs exactly 3 poses: origin, +X, +Z");
  }
  const auto f = wc::calib::solve_tool_frame(poses, orient[0], orient[1], orient[2]);
  const auto wpr = wc::weldprog::wpr_from_rotation(f.rotation);
  fmt::print("tcp offset (flange): {:.4f} {:.4f} {:.4f} mm\n", f.offset.x(), f.offset.y(), f.offset.z());
  fmt::print("tool w,p,r:          {:.4f} {:.4f} {:.4f} deg\n", wpr.x(), wpr.y(), wpr.z());
  fmt::print("residual rms:        {:.4f} mm\n", f.residual);
  return 0;
}

int run_broker(const std::string& bind, int ws_port) {
  wc::msgbus::BrokerOptions opts;
  std::tie(opts.bind_address, opts.port) = wc::handler::parse_address(bind);
  if (ws_port >= 0) opts.ws_port = static_cast<std::uint16_t>(ws_port);
  opts.log = [](const std::string& line) { fmt::print(stderr, "broker: {}\n", line); };
  wc::msgbus::Broker broker(opts);
  broker.start();
  fmt::print("broker listening on {}:{}", opts.bind_address, broker.port());
  if (broker.ws_port()) fmt::print(", websocket on port {}", *broker.ws_port());
  fmt::print("\n");
  std::fflush(stdout);
  wait_for_signal();
  broker.stop();
  return 0;
}

int run_handler(const std::string& config_path, const std::string& bus) {
  auto cfg = config_path.empty() ? wc::handler::HandlerConfig{} : wc::handler::load_handler_config(config_path);
  if (!bus.empty()) std::tie(cfg.bus_host, cfg.bus_port) = wc::handler::parse_address(bus);
  wc::handler::Handler handler(cfg);
  handler.start();
  fmt::print("handler connected to {}:{} on topic {}\n", cfg.bus_host, cfg.bus_port, cfg.topic);
  std::fflush(stdout);
  wait_for_signal();
  handler.stop();
  return 0;
}

int run_scene(const std::string& structure, const std::string& out, std::uint64_t seed, std::size_t points) {
  auto spec = wc::scene::default_structure(wc::scene::structure_from_char(structure[0]));
  auto sampling = wc::scene::canonical_sampling();
  sampling.rng_seed = seed;
  sampling.points_per_plane = points;
  const auto capture = wc::scene::generate_structure(spec, sampling);
  const bool csv = out.size() >= 4 && out.substr(out.size() - 4) == ".csv";
  wc::scene::save_cloud(capture.cloud, out, csv ? wc::scene::CloudFormat::Csv : wc::scene::CloudFormat::PlyAscii);
  fmt::print("wrote {} points to {}\n", capture.cloud.size(), out);
  return 0;
}

int run_serve_generate(const std::string& bind) {
  const auto [host, port] = wc::handler::parse_address(bind);
  op::GenerateServer server;
  const auto bound = server.start(host, port);
  fmt::print("generate endpoint on http://{}:{}/generate\n", host, bound);
  std::fflush(stdout);
  wait_for_signal();
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale fillet welding cell: capture, seam planning, program generation and execution"};
  app.require_subcommand(1);

  JobArgs job;
  std::string log;
  auto* operator_cmd = app.add_subcommand("operator", "Run one welding job through the bus");
  job.add_to(operator_cmd);
  operator_cmd->add_option("--log", log, "Append the job record to this CSV");

  JobArgs bench_job;
  int repeats = 5;
  std::string bench_csv;
  auto* bench_cmd = app.add_subcommand("bench", "Time the key steps over repeated jobs");
  bench_job.add_to(bench_cmd);
  bench_cmd->add_option("--repeats", repeats, "Number of jobs")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--csv", bench_csv, "Also write the mean row as CSV");

  std::string poses, orient;
  auto* calib_cmd = app.add_subcommand("calib", "Solve the torch TCP from flange poses touching one point");
  calib_cmd->add_option("--poses", poses, "CSV of flange poses: x,y,z,r11..r33 (12 columns)")->required()->check(CLI::ExistingFile);
  calib_cmd->add_option("--orient", orient, "CSV of 3 poses: origin, +X point, +Z point")->check(CLI::ExistingFile);

  std::string broker_bind = "127.0.0.1:5883";
  int ws_port = -1;
  auto* broker_cmd = app.add_subcommand("broker", "Run the message broker");
  broker_cmd->add_option("--bind", broker_bind, "host:port");
  broker_cmd->add_option("--ws-port", ws_port, "Also serve WebSocket clients on this port");

  std::string handler_cfg, handler_bus;
  auto* handler_cmd = app.add_subcommand("handler", "Run the robot handler service");
  handler_cmd->add_option("--config", handler_cfg, "Handler JSON config")->check(CLI::ExistingFile);
  handler_cmd->add_option("--bus", handler_bus, "Broker host:port, overrides the config");

  std::string scene_structure = "U", scene_out;
  std::uint64_t scene_seed = 7;
  std::size_t scene_points = 15000;
  auto* scene_cmd = app.add_subcommand("scene", "Write a synthetic capture to PLY or CSV");
  scene_cmd->add_option("--structure", scene_structure, "Structure type")->check(CLI::IsMember({"L", "U"}));
  scene_cmd->add_option("--out", scene_out, "Output path (.ply or .csv)")->required();
  scene_cmd->add_option("--seed", scene_seed, "Generator seed");
  scene_cmd->add_option("--points-per-plane", scene_points, "Samples per plate");

  std::string generate_bind = "127.0.0.1:8088";
  auto* serve_cmd = app.add_subcommand("serve-generate", "Serve POST /generate for the browser panel");
  serve_cmd->add_option("--bind", generate_bind, "host:port");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*operator_cmd) return run_operator(job, log);
    if (*bench_cmd) return run_bench(bench_job, repeats, bench_csv);
    if (*calib_cmd) return run_calib(poses, orient);
    if (*broker_cmd) return run_broker(broker_bind, ws_port);
    if (*handler_cmd) return run_handler(handler_cfg, handler_bus);
    if (*scene_cmd) return run_scene(scene_structure, scene_out, scene_seed, scene_points);
    if (*serve_cmd) return run_serve_generate(generate_bind);
  } catch (const wc::Error& e) {
    fmt::print(stderr, "error [{}]: {}\n", wc::to_string(e.code()), e.what());
    return op::exit_code_for(e.code());
  }
  return 0;
}
