#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "hearth/dhs_auth.hpp"
#include "hearth/handshake.hpp"

namespace hearth::dhs {
namespace {

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Malformed;
}

std::uint64_t reference_iid(std::string_view uid, const Nonce128& n, const Key256& secret) {
  const auto h = hash(concat({secret.view(), as_bytes(uid), n.view()}));
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | h[static_cast<std::size_t>(i)];
  return v;
}

TEST(DhsInitialize, SeededIsReproducible) {
  auto a = RandomSource::seeded(1), b = RandomSource::seeded(1), c = RandomSource::seeded(2);
  const auto ha = initialize(a);
  EXPECT_EQ(ha.master_secret, initialize(b).master_secret);
  EXPECT_NE(ha.master_secret, initialize(c).master_secret);
  EXPECT_TRUE(ha.registered.empty());
}

TEST(DhsIid, DeterministicFreshAndTruncated) {
  const Key256 s = key_from_digest(hash("s"));
  const Nonce128 n1 = Nonce128::from_hex("000102030405060708090a0b0c0d0e0f");
  const Nonce128 n2 = Nonce128::from_hex("0f0e0d0c0b0a09080706050403020100");
  EXPECT_EQ(generate_iid("alice", n1, s), generate_iid("alice", n1, s));
  EXPECT_NE(generate_iid("alice", n1, s), generate_iid("alice", n2, s));
  EXPECT_EQ(generate_iid("alice", n1, s).value, reference_iid("alice", n1, s));
}

TEST(DhsPacket, EncapsulationInverse) {
  auto src = RandomSource::seeded(8);
  const auto zero = encapsulate(as_bytes("x"), InterfaceIdentifier{0});
  for (int i = 8; i < 16; ++i) EXPECT_EQ(zero.address()[static_cast<std::size_t>(i)], 0);
  for (int i = 0; i < 200; ++i) {
    const auto raw = src.bytes(8);
    WireReader r(raw);
    const InterfaceIdentifier iid{r.u64()};
    const auto payload = src.bytes(static_cast<std::size_t>(i) * 20);
    const auto packet = encapsulate(payload, iid, 0x2001'0db8'0000'0000ULL + static_cast<std::uint64_t>(i));
    const auto [got, body] = decapsulate(Ipv6Packet::decode(packet.encode()));
    EXPECT_EQ(got, iid);
    EXPECT_EQ(body, payload);
    EXPECT_EQ(packet.encode().size(), 8u + 8 + 4 + payload.size());
  }
  const auto p1 = encapsulate(as_bytes("y"), InterfaceIdentifier{42}, 1);
  const auto p2 = encapsulate(as_bytes("y"), InterfaceIdentifier{42}, 2);
  EXPECT_EQ(decapsulate(p1).first, decapsulate(p2).first);
}

TEST(DhsPacket, LargePayloadRoundTrip) {
  const Bytes payload(4096, 0xab);
  const auto p = encapsulate(payload, InterfaceIdentifier{~0ULL});
  EXPECT_EQ(Ipv6Packet::decode(p.encode()), p);
}

TEST(DhsPacket, TruncatedIsMalformed) {
  auto wire = encapsulate(as_bytes("payload"), InterfaceIdentifier{7}).encode();
  wire.pop_back();
  EXPECT_EQ(code_of([&] { Ipv6Packet::decode(wire); }), Errc::MalformedPacket);
  EXPECT_EQ(code_of([&] { Ipv6Packet::decode(Bytes(10, 0)); }), Errc::MalformedPacket);
}

struct DhsFixture : ::testing::Test {
  RandomSource src = RandomSource::seeded(12);
  HomeServerState home = initialize(src);
  Registration reg = register_user(home, "bob", "pw", src);
  SmartCardState& card = reg.card;
  EdgeServerDb edge;
  DirectChannel direct;

  void SetUp() override { edge.insert("bob", reg.edge_entry); }
  HandshakeKeys run() { return run_dhs(card, edge, "pw", src, direct); }
};

TEST_F(DhsFixture, RegistrationConstruction) {
  EXPECT_EQ(card.current_iid, edge.entry("bob").current_iid);
  EXPECT_EQ(card.card_secret, kdf(home.master_secret, "card", as_bytes("bob")));
  EXPECT_EQ(edge.entry("bob").edge_share, kdf(home.master_secret, "edge", as_bytes("bob")));
  EXPECT_NE(card.card_secret, edge.entry("bob").edge_share);
  EXPECT_EQ(code_of([&] { register_user(home, "bob", "pw", src); }), Errc::AlreadyRegistered);
  EXPECT_EQ(code_of([&] { edge.insert("bob", reg.edge_entry); }), Errc::AlreadyRegistered);
}

TEST_F(DhsFixture, PasswordNeverStored) {
  const auto bytes = serialize(card);
  const auto pw = as_bytes("pw");
  EXPECT_EQ(std::search(bytes.begin(), bytes.end(), pw.begin(), pw.end()), bytes.end());
}

TEST_F(DhsFixture, LoginCarriesCurrentIid) {
  const auto p = login(card, "bob", "pw", src);
  EXPECT_EQ(p.iid, card.current_iid);
  const auto payload = LoginPayload::decode(p.payload);
  WireWriter w;
  w.u64(p.prefix).u64(p.iid.value);
  EXPECT_EQ(payload.auth_tag, mac(card.link_key, concat({w.bytes(), payload.n_u.view()})));
}

TEST_F(DhsFixture, WrongPasswordAndLockout) {
  EXPECT_EQ(code_of([&] { login(card, "bob", "nope", src); }), Errc::LocalAuthFailed);
  EXPECT_FALSE(card.pending);
  EXPECT_EQ(code_of([&] { login(card, "bob", "nope", src); }), Errc::LocalAuthFailed);
  EXPECT_EQ(code_of([&] { login(card, "bob", "nope", src); }), Errc::CardLocked);
  EXPECT_EQ(code_of([&] { login(card, "bob", "pw", src); }), Errc::CardLocked);
}

TEST_F(DhsFixture, HonestAgreement) {
  const auto login_packet = login(card, "bob", "pw", src);
  const auto challenge = edge.verify(login_packet, src);
  const auto [confirm, edge_key] = edge.agree(agree(card, challenge));
  const auto card_key = complete(card, confirm);
  EXPECT_EQ(card_key, edge_key);
  EXPECT_EQ(card.current_iid, edge.entry("bob").current_iid);
  EXPECT_NE(card.current_iid, login_packet.iid);
  EXPECT_EQ(card.current_iid, generate_iid("bob", challenge.n_e, card.card_secret));
}

TEST_F(DhsFixture, StaleIidAfterSession) {
  const auto old = login(card, "bob", "pw", src);
  abandon(card);
  run();
  EXPECT_EQ(code_of([&] { edge.verify(old, src); }), Errc::IdentifierMismatch);
}

TEST_F(DhsFixture, ForgedTag) {
  auto p = login(card, "bob", "pw", src);
  auto payload = LoginPayload::decode(p.payload);
  payload.auth_tag = hash("forged");
  p.payload = payload.encode();
  EXPECT_EQ(code_of([&] { edge.verify(p, src); }), Errc::TagInvalid);
}

TEST_F(DhsFixture, TamperedChallengeFailsAgreement) {
  const auto before = card.current_iid;
  auto challenge = edge.verify(login(card, "bob", "pw", src), src);
  challenge.n_e.mutable_view()[0] ^= 1;
  EXPECT_EQ(code_of([&] { edge.agree(agree(card, challenge)); }), Errc::AgreeFailed);
  EXPECT_EQ(edge.entry("bob").current_iid, before);
  abandon(card);
  const auto k = run();
  EXPECT_EQ(k.client, k.server);
}

TEST_F(DhsFixture, SessionsDistinct) {
  std::set<Key256> keys;
  std::set<InterfaceIdentifier> iids{card.current_iid};
  for (int i = 0; i < 25; ++i) {
    const auto k = run();
    ASSERT_EQ(k.client, k.server);
    keys.insert(k.client);
    iids.insert(card.current_iid);
    ASSERT_EQ(card.current_iid, edge.entry("bob").current_iid);
  }
  EXPECT_EQ(keys.size(), 25u);
  EXPECT_EQ(iids.size(), 26u);
}

TEST_F(DhsFixture, PasswordUpdate) {
  const auto before = card.current_iid;
  EXPECT_EQ(code_of([&] { password_update(card, "wrong", "new", src); }), Errc::LocalAuthFailed);
  EXPECT_EQ(card.current_iid, before);
  password_update(card, "pw", "new", src);
  EXPECT_NE(card.current_iid, before);
  EXPECT_EQ(card.card_secret, kdf(home.master_secret, "card", as_bytes("bob")));
  EXPECT_EQ(code_of([&] { login(card, "bob", "pw", src); }), Errc::LocalAuthFailed);
  // The edge follows the rotated identifier through the shared link key.
  const auto k = run_dhs(card, edge, "new", src, direct);
  EXPECT_EQ(k.client, k.server);
}

TEST_F(DhsFixture, LostConfirmationRecovers) {
  const auto challenge = edge.verify(login(card, "bob", "pw", src), src);
  edge.agree(agree(card, challenge));
  abandon(card);
  ASSERT_TRUE(card.unconfirmed);
  const auto k = run();
  EXPECT_EQ(k.client, k.server);
  EXPECT_EQ(card.current_iid, edge.entry("bob").current_iid);
}

TEST_F(DhsFixture, SerializationRoundTrip) {
  run();
  EXPECT_EQ(serialize(deserialize_card(serialize(card))), serialize(card));
  EXPECT_EQ(EdgeServerDb::deserialize(edge.serialize()).serialize(), edge.serialize());
}

}  // namespace
}  // namespace hearth::dhs
