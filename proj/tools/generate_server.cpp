#include "generate_server.hpp"

#include <thread>

#include "weldcell/operator.hpp"

// Must follow the Eigen-based headers: <resolv.h> defines _res.
#include <fmt/core.h>
#include <httplib.h>

namespace weldcell::operator_cli {

struct GenerateServer::Impl {
  httplib::Server server;
  std::thread thread;
};

GenerateServer::GenerateServer() : impl_(std::make_unique<Impl>()) {
  auto& server = impl_->server;
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server.Options("/generate", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "POST");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  server.Post("/generate", [](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json reply;
    try {
      reply = handle_generate_request(nlohmann::json::parse(req.body));
    } catch (const nlohmann::json::exception& e) {
      res.status = 400;
      reply = {{"error", "DecodeError"}, {"message", e.what()}};
    } catch (const Error& e) {
      const bool malformed = e.code() == ErrorCode::DecodeError || e.code() == ErrorCode::InvalidArgument;
      res.status = malformed ? 400 : 422;
      reply = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
    }
    res.set_content(reply.dump(), "application/json");
  });
}

GenerateServer::~GenerateServer() { stop(); }

std::uint16_t GenerateServer::start(const std::string& host, std::uint16_t port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw Error(ErrorCode::AddressInUse, fmt::format("cannot listen on {}:{}", host, port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return static_cast<std::uint16_t>(bound);
}

void GenerateServer::stop() {
  if (!impl_->thread.joinable()) return;
  impl_->server.stop();
  impl_->thread.join();
}

}  // namespace weldcell::operator_cli
