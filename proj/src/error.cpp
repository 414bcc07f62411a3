#include "hearth/error.hpp"

namespace hearth {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::InvalidHex: return "InvalidHex";
    case Errc::Truncated: return "Truncated";
    case Errc::Malformed: return "Malformed";
    case Errc::EmptyTree: return "EmptyTree";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::AlreadyRegistered: return "AlreadyRegistered";
    case Errc::UnknownUser: return "UnknownUser";
    case Errc::Busy: return "Busy";
    case Errc::CounterDesync: return "CounterDesync";
    case Errc::GatewayAuthFailed: return "GatewayAuthFailed";
    case Errc::HistoryMismatch: return "HistoryMismatch";
    case Errc::UserAuthFailed: return "UserAuthFailed";
    case Errc::ConfirmFailed: return "ConfirmFailed";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::ForestExhausted: return "ForestExhausted";
    case Errc::LocalAuthFailed: return "LocalAuthFailed";
    case Errc::CardLocked: return "CardLocked";
    case Errc::MalformedPacket: return "MalformedPacket";
    case Errc::IdentifierMismatch: return "IdentifierMismatch";
    case Errc::TagInvalid: return "TagInvalid";
    case Errc::AgreeFailed: return "AgreeFailed";
    case Errc::UnknownFactor: return "UnknownFactor";
    case Errc::InvalidWeights: return "InvalidWeights";
    case Errc::DegenerateTraining: return "DegenerateTraining";
    case Errc::NoSchemeAvailable: return "NoSchemeAvailable";
    case Errc::NotVerified: return "NotVerified";
    case Errc::Forbidden: return "Forbidden";
    case Errc::InvalidTransition: return "InvalidTransition";
    case Errc::AuthFailed: return "AuthFailed";
    case Errc::SessionExpired: return "SessionExpired";
    case Errc::UnknownDevice: return "UnknownDevice";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::AuthenticatedDecryptionFailed: return "AuthenticatedDecryptionFailed";
    case Errc::ConfigError: return "ConfigError";
    case Errc::ScriptError: return "ScriptError";
    case Errc::MessageDropped: return "MessageDropped";
  }
  return "Unknown";
}

}  // namespace hearth
