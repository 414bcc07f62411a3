#include "hearth/handshake.hpp"

namespace hearth {

namespace {

template <typename F>
HandshakeKeys reporting(Channel& ch, F&& run) {
  try {
    HandshakeKeys keys = run();
    ch.outcome("ok");
    return keys;
  } catch (const Error& e) {
    ch.outcome(to_string(e.code()));
    throw;
  }
}

HandshakeKeys mht_once(mht::UserState& user, mht::Gateway& gw, RandomSource& src, Channel& ch) {
  auto m1_out = mht::initiate(user, src).encode();
  try {
    auto m1 = mht::M1::decode(ch.carry(kUserParty, kGatewayParty, "M1", std::move(m1_out)));
    auto m2 = mht::M2::decode(ch.carry(kGatewayParty, kUserParty, "M2", gw.challenge(m1, src).encode()));
    auto m3 = mht::M3::decode(ch.carry(kUserParty, kGatewayParty, "M3", mht::respond(user, m2).encode()));
    auto [m4_out, server_key] = gw.finalize(m1.uid, m3);
    auto m4 = mht::M4::decode(ch.carry(kGatewayParty, kUserParty, "M4", m4_out.encode()));
    return {mht::confirm(user, m4), server_key};
  } catch (...) {
    mht::abandon(user);
    throw;
  }
}

}  // namespace

HandshakeKeys run_mht(mht::UserState& user, mht::Gateway& gateway, RandomSource& src, Channel& ch) {
  return reporting(ch, [&] {
    try {
      return mht_once(user, gateway, src, ch);
    } catch (const Error& e) {
      if (e.code() != Errc::CounterDesync) throw;
      const auto received =
          mht::ResyncHint::decode(ch.carry(kGatewayParty, kUserParty, "RESYNC", gateway.hint(user.uid).encode()));
      if (!mht::resync(user, received)) throw;
      return mht_once(user, gateway, src, ch);
    }
  });
}

HandshakeKeys run_dors(dors::UserState& user, dors::GatewayState& gw, RandomSource& src, Channel& ch) {
  return reporting(ch, [&] {
    WireWriter hello;
    hello.str16(user.uid);
    const auto hello_wire = ch.carry(kUserParty, kGatewayParty, "HELLO", std::move(hello).bytes());
    WireReader hr(hello_wire);
    if (hr.str16() != gw.uid) throw Error(Errc::UnknownUser);
    const auto challenge =
        dors::ChallengeMessage::decode(ch.carry(kGatewayParty, kUserParty, "CHALLENGE", dors::challenge(gw, src).encode()));
    const auto sig_wire = ch.carry(kUserParty, kGatewayParty, "SIGNATURE", dors::respond(user, challenge).encode());
    try {
      dors::Signature sig;
      try {
        sig = dors::Signature::decode(sig_wire, gw.pub.params);
      } catch (const Error&) {
        gw.pending_challenge.reset();
        throw Error(Errc::AuthFailed, "malformed signature");
      }
      auto [tag, server_key] = dors::accept(gw, sig);
      const auto tag_wire = ch.carry(kGatewayParty, kUserParty, "CONFIRM", Bytes(tag.raw().begin(), tag.raw().end()));
      return HandshakeKeys{dors::confirm(user, Digest256::from_span(tag_wire)), server_key};
    } catch (...) {
      dors::abandon(user);
      throw;
    }
  });
}

HandshakeKeys run_dhs(dhs::SmartCardState& card, dhs::EdgeServerDb& edge, std::string_view password,
                      RandomSource& src, Channel& ch) {
  auto once = [&](bool via_unconfirmed) {
    auto login = dhs::login(card, card.uid, password, src, via_unconfirmed);
    try {
      auto login_wire = ch.carry(kUserParty, kEdgeParty, "LOGIN", login.encode());
      auto challenge_wire = ch.carry(kEdgeParty, kUserParty, "CHALLENGE",
                                     edge.verify(dhs::Ipv6Packet::decode(login_wire), src).encode());
      auto response = dhs::agree(card, dhs::Challenge::decode(challenge_wire));
      auto response_wire = ch.carry(kUserParty, kEdgeParty, "AGREE", response.encode());
      auto [confirm, server_key] = edge.agree(dhs::Ipv6Packet::decode(response_wire));
      auto confirm_wire = ch.carry(kEdgeParty, kUserParty, "CONFIRM", confirm.encode());
      return HandshakeKeys{dhs::complete(card, dhs::EdgeConfirm::decode(confirm_wire)), server_key};
    } catch (...) {
      dhs::abandon(card);
      throw;
    }
  };
  return reporting(ch, [&] {
    try {
      return once(false);
    } catch (const Error& e) {
      // The edge moved to the state of a run whose confirmation was lost.
      if (e.code() != Errc::IdentifierMismatch || !card.unconfirmed) throw;
      return once(true);
    }
  });
}

}  // namespace hearth
