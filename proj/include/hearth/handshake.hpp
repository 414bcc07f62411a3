#pragma once

#include <string_view>

#include "hearth/bytes.hpp"
#include "hearth/dhs_auth.hpp"
#include "hearth/dors_auth.hpp"
#include "hearth/mht_auth.hpp"

namespace hearth {

/// Carries one protocol message between two parties. Implementations may
/// record, delay, mutate or drop (by throwing) what passes through.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual Bytes carry(std::string_view from, std::string_view to, std::string_view label, Bytes message) = 0;
  /// Called once per run with "ok" or the failure reason.
  virtual void outcome(std::string_view /*result*/) {}
};

class DirectChannel final : public Channel {
 public:
  Bytes carry(std::string_view, std::string_view, std::string_view, Bytes message) override { return message; }
};

struct HandshakeKeys {
  Key256 client;
  Key256 server;
};

inline constexpr std::string_view kUserParty = "user";
inline constexpr std::string_view kGatewayParty = "gateway";
inline constexpr std::string_view kEdgeParty = "edge";

/// Full M1..M4 run. On `CounterDesync` the user asks for the gateway's
/// counter and retries once if `mht::resync` reconciles the histories.
HandshakeKeys run_mht(mht::UserState& user, mht::Gateway& gateway, RandomSource& src, Channel& ch);

HandshakeKeys run_dors(dors::UserState& user, dors::GatewayState& gateway, RandomSource& src, Channel& ch);

/// Login on the card (local password check) through session agreement.
HandshakeKeys run_dhs(dhs::SmartCardState& card, dhs::EdgeServerDb& edge, std::string_view password,
                      RandomSource& src, Channel& ch);

}  // namespace hearth
