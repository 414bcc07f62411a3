#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hearth {

/// Failure reasons shared by every module. Protocol code reports failures by
/// throwing `Error`; verification predicates return bool instead.
enum class Errc {
  // primitives
  InvalidLabel,
  InvalidHex,
  Truncated,
  Malformed,
  // merkle / mht
  EmptyTree,
  IndexOutOfRange,
  AlreadyRegistered,
  UnknownUser,
  Busy,
  CounterDesync,
  GatewayAuthFailed,
  HistoryMismatch,
  UserAuthFailed,
  ConfirmFailed,
  // dors
  InvalidParams,
  ForestExhausted,
  // dhs
  LocalAuthFailed,
  CardLocked,
  MalformedPacket,
  IdentifierMismatch,
  TagInvalid,
  AgreeFailed,
  // context
  UnknownFactor,
  InvalidWeights,
  DegenerateTraining,
  NoSchemeAvailable,
  // gateway
  NotVerified,
  Forbidden,
  InvalidTransition,
  AuthFailed,
  SessionExpired,
  UnknownDevice,
  UnknownSession,
  AuthenticatedDecryptionFailed,
  ConfigError,
  // harness
  ScriptError,
  MessageDropped,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  explicit Error(Errc code) : std::runtime_error(std::string(to_string(code))), code_(code) {}
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace hearth
