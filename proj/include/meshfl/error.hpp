#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace meshfl {

/// Every failure the library reports is an `Error` carrying one of these codes.
enum class Errc {
  InvalidSize,
  InvalidIndex,
  GenerationFailed,
  NotSymmetric,
  SelfLoop,
  Disconnected,
  InvalidFraction,
  UnknownTrainer,
  EmptyData,
  Diverged,
  InsufficientData,
  ShapeMismatch,
  TooFewVectors,
  PayloadTooLarge,
  UnknownType,
  Truncated,
  VersionMismatch,
  ConnectFailed,
  AlreadyConnected,
  StartFailed,
  RoundAborted,
  UnknownField,
  InvalidScenario,
  DeployFailed,
  IoError,
  ParseError,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace meshfl
