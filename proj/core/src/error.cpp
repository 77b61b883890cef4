#include "weldcell/error.hpp"

#include <fmt/core.h>

namespace weldcell {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::WorkspaceViolation: return "WorkspaceViolation";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::NoPlaneFound: return "NoPlaneFound";
    case ErrorCode::NoThreePlanes: return "NoThreePlanes";
    case ErrorCode::ParallelPlanes: return "ParallelPlanes";
    case ErrorCode::DegenerateCorner: return "DegenerateCorner";
    case ErrorCode::EmptySeam: return "EmptySeam";
    case ErrorCode::UndefinedBisector: return "UndefinedBisector";
    case ErrorCode::UnderdeterminedCalibration: return "UnderdeterminedCalibration";
    case ErrorCode::DegenerateOrientation: return "DegenerateOrientation";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::LengthExceedsMax: return "LengthExceedsMax";
    case ErrorCode::IllegalState: return "IllegalState";
    case ErrorCode::LoadError: return "LoadError";
    case ErrorCode::AddressInUse: return "AddressInUse";
    case ErrorCode::ConnectionLost: return "ConnectionLost";
    case ErrorCode::FrameTooLarge: return "FrameTooLarge";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::UnknownScheme: return "UnknownScheme";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept {
  for (int i = 0; i <= static_cast<int>(ErrorCode::IoError); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& what)
    : Error(ErrorCode::ParseError,
            column > 0 ? fmt::format("line {}, column {}: {}", line, column, what)
                       : fmt::format("line {}: {}", line, what)),
      line_(line),
      column_(column) {}

}  // namespace weldcell
