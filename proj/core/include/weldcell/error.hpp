#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace weldcell {

enum class ErrorCode {
  InvalidArgument,
  WorkspaceViolation,
  ParseError,
  DegenerateFit,
  NoPlaneFound,
  NoThreePlanes,
  ParallelPlanes,
  DegenerateCorner,
  EmptySeam,
  UndefinedBisector,
  UnderdeterminedCalibration,
  DegenerateOrientation,
  EmptySelection,
  LengthExceedsMax,
  IllegalState,
  LoadError,
  AddressInUse,
  ConnectionLost,
  FrameTooLarge,
  DecodeError,
  ProtocolError,
  Timeout,
  UnknownScheme,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;
std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept;

/// Base exception for every failure raised by the library. The code is the
/// stable, machine-readable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the cloud and program readers. `line` and `column` are 1-based
/// positions in the input text; column is 0 when not meaningful.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what);

  [[nodiscard]] std::size_t line() const noexcept { return line_; }
  [[nodiscard]] std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace weldcell
