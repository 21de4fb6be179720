#include "capmat/error.hpp"

namespace capmat {

std::string_view toString(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::DegenerateLattice: return "DegenerateLattice";
    case ErrorKind::OverlapDetected: return "OverlapDetected";
    case ErrorKind::LevelTooLarge: return "LevelTooLarge";
    case ErrorKind::GammaPointRequested: return "GammaPointRequested";
    case ErrorKind::SupportOutsideTruncation: return "SupportOutsideTruncation";
    case ErrorKind::NonPositiveDefect: return "NonPositiveDefect";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::MissingCoefficient: return "MissingCoefficient";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::NegativeEigenvalue: return "NegativeEigenvalue";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::CutoffInsufficient: return "CutoffInsufficient";
    case ErrorKind::QuadratureUnconverged: return "QuadratureUnconverged";
    case ErrorKind::BandDataInsufficient: return "BandDataInsufficient";
    case ErrorKind::NoInGapEigenvalue: return "NoInGapEigenvalue";
  }
  return "Unknown";
}

bool isValidationError(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::IllConditioned:
    case ErrorKind::CutoffInsufficient:
    case ErrorKind::QuadratureUnconverged:
    case ErrorKind::BandDataInsufficient:
    case ErrorKind::NoInGapEigenvalue:
      return false;
    default:
      return true;
  }
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(toString(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace capmat
