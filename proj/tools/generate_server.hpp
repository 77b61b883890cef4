#pragma once

#include <cstdint>
#include <memory>
#include <string>

namespace weldcell::operator_cli {

/// Localhost HTTP front for program generation: POST /generate with
/// {choices, capture} answers {program_text}. Malformed bodies get 400,
/// domain errors 422, both as {error, message}.
class GenerateServer {
 public:
  GenerateServer();
  ~GenerateServer();

  GenerateServer(const GenerateServer&) = delete;
  GenerateServer& operator=(const GenerateServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Throws AddressInUse when the bind fails.
  std::uint16_t start(const std::string& host, std::uint16_t port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace weldcell::operator_cli
