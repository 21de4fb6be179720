#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace capmat {

enum class ErrorKind {
  // validation failures (bad input, inconsistent configuration)
  InvalidArgument,
  ConfigInvalid,
  DegenerateLattice,
  OverlapDetected,
  LevelTooLarge,
  GammaPointRequested,
  SupportOutsideTruncation,
  NonPositiveDefect,
  LengthMismatch,
  MissingCoefficient,
  InsufficientData,
  ZeroVector,
  NegativeEigenvalue,
  // numerical failures
  IllConditioned,
  CutoffInsufficient,
  QuadratureUnconverged,
  BandDataInsufficient,
  NoInGapEigenvalue,
};

std::string_view toString(ErrorKind kind) noexcept;

/// True for errors caused by the caller's input rather than by the numerics.
bool isValidationError(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace capmat
