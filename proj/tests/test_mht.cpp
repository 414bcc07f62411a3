#include <gtest/gtest.h>

#include <set>

#include "hearth/handshake.hpp"
#include "hearth/mht_auth.hpp"

namespace hearth::mht {
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

struct MhtFixture : ::testing::Test {
  Key256 master = key_from_digest(hash("master"));
  RandomSource src = RandomSource::seeded(5);
  Gateway gw;
  UserState user = gw.enroll("alice", master);
  DirectChannel direct;

  GatewayState& g() { return gw.state("alice"); }
  HandshakeKeys run() { return run_mht(user, gw, src, direct); }
};

TEST_F(MhtFixture, RegistrationIsSymmetric) {
  EXPECT_EQ(user.tree.root(), g().tree.root());
  EXPECT_EQ(user.tree.root(), genesis_leaf("alice"));
  EXPECT_EQ(genesis_leaf("alice"), hash("genesisalice"));
  EXPECT_EQ(user.txn_counter, 0u);
  EXPECT_EQ(g().txn_counter, 0u);
  EXPECT_EQ(user.shared_key, kdf(master, "mht-user", as_bytes("alice")));
  EXPECT_EQ(user.shared_key, g().shared_key);
}

TEST_F(MhtFixture, DuplicateEnrolment) {
  EXPECT_EQ(code_of([&] { gw.enroll("alice", master); }), Errc::AlreadyRegistered);
}

TEST_F(MhtFixture, DistinctUsersDistinctKeys) {
  const auto bob = gw.enroll("bob", master);
  EXPECT_NE(bob.shared_key, user.shared_key);
}

TEST_F(MhtFixture, InitiateCounterAndBusy) {
  EXPECT_EQ(initiate(user, src).counter, 0u);
  EXPECT_EQ(code_of([&] { initiate(user, src); }), Errc::Busy);
  abandon(user);
  run();
  EXPECT_EQ(initiate(user, src).counter, 1u);
}

TEST_F(MhtFixture, ChallengeOnGenesisHasDepthZeroProof) {
  const auto m2 = gw.challenge(initiate(user, src), src);
  EXPECT_TRUE(m2.proof.siblings.empty());
  EXPECT_TRUE(merkle::verify(m2.root, genesis_leaf("alice"), m2.proof));
}

TEST_F(MhtFixture, ChallengeRejectsWrongCounterAndUser) {
  auto m1 = initiate(user, src);
  m1.counter = 5;
  EXPECT_EQ(code_of([&] { gw.challenge(m1, src); }), Errc::CounterDesync);
  m1.counter = 0;
  m1.uid = "mallory";
  EXPECT_EQ(code_of([&] { gw.challenge(m1, src); }), Errc::UnknownUser);
}

TEST_F(MhtFixture, ReplayedM1IsStale) {
  const auto m1 = initiate(user, src);
  const auto m2 = gw.challenge(m1, src);
  const auto [m4, key] = gw.finalize("alice", respond(user, m2));
  confirm(user, m4);
  EXPECT_EQ(code_of([&] { gw.challenge(m1, src); }), Errc::CounterDesync);
}

TEST_F(MhtFixture, HonestRunMatchesDerivationFormula) {
  const Key256 k0 = user.shared_key;
  const auto m1 = initiate(user, src);
  const auto m2 = gw.challenge(m1, src);
  EXPECT_EQ(m2.tag, mac(k0, concat({m1.n_u.view(), m2.n_g.view(), m2.root.view()})));
  const auto m3 = respond(user, m2);
  EXPECT_EQ(m3.tag_u, mac(k0, concat({m2.n_g.view(), m1.n_u.view(), m2.root.view(), as_bytes("u")})));
  const auto [m4, server_key] = gw.finalize("alice", m3);
  const Key256 expected = kdf(k0, "sk", concat({m1.n_u.view(), m2.n_g.view(), m2.root.view()}));
  EXPECT_EQ(server_key, expected);
  EXPECT_EQ(m4.tag_g2, mac(expected, as_bytes("confirm")));
  EXPECT_EQ(confirm(user, m4), expected);
  EXPECT_EQ(user.txn_counter, 1u);
  EXPECT_EQ(g().txn_counter, 1u);
  EXPECT_EQ(user.tree.root(), g().tree.root());
  EXPECT_EQ(user.tree.leaves().back(), hash(concat({m1.n_u.view(), m2.n_g.view(), as_bytes("txn")})));
  EXPECT_EQ(transaction_leaf(m1.n_u, m2.n_g), user.tree.leaves().back());
}

TEST_F(MhtFixture, FlippedGatewayTag) {
  auto m2 = gw.challenge(initiate(user, src), src);
  m2.tag.mutable_view()[0] ^= 1;
  EXPECT_EQ(code_of([&] { respond(user, m2); }), Errc::GatewayAuthFailed);
  EXPECT_FALSE(user.pending);
}

TEST_F(MhtFixture, ForeignRoot) {
  auto m2 = gw.challenge(initiate(user, src), src);
  m2.root = hash("other history");
  EXPECT_EQ(code_of([&] { respond(user, m2); }), Errc::HistoryMismatch);
}

TEST_F(MhtFixture, ForgedM3) {
  gw.challenge(initiate(user, src), src);
  EXPECT_EQ(code_of([&] { gw.finalize("alice", M3{hash("guess")}); }), Errc::UserAuthFailed);
  EXPECT_EQ(g().txn_counter, 0u);
}

TEST_F(MhtFixture, CorruptedM4KeepsCounter) {
  const auto m2 = gw.challenge(initiate(user, src), src);
  auto [m4, key] = gw.finalize("alice", respond(user, m2));
  m4.tag_g2.mutable_view()[5] ^= 1;
  EXPECT_EQ(code_of([&] { confirm(user, m4); }), Errc::ConfirmFailed);
  EXPECT_EQ(user.txn_counter, 0u);
  EXPECT_EQ(code_of([&] { confirm(user, m4); }), Errc::ConfirmFailed);
}

TEST_F(MhtFixture, ConfirmWithoutPending) {
  EXPECT_EQ(code_of([&] { confirm(user, M4{}); }), Errc::ConfirmFailed);
}

TEST_F(MhtFixture, ManyHandshakesStayInStep) {
  std::set<Key256> keys;
  for (int i = 1; i <= 20; ++i) {
    const auto k = run();
    ASSERT_EQ(k.client, k.server);
    keys.insert(k.client);
    ASSERT_EQ(user.txn_counter, static_cast<std::uint64_t>(i));
    ASSERT_EQ(g().txn_counter, static_cast<std::uint64_t>(i));
    ASSERT_EQ(user.tree.root(), g().tree.root());
  }
  EXPECT_EQ(keys.size(), 20u);
  EXPECT_EQ(history(user.tree).size(), 21u);
  EXPECT_EQ(history(user.tree)[20].index, 20u);
}

TEST_F(MhtFixture, WireSizesOverFourLeafHistory) {
  for (int i = 0; i < 3; ++i) run();
  ASSERT_EQ(user.tree.size(), 4u);
  const auto m1 = initiate(user, src);
  const auto m2 = gw.challenge(m1, src);
  const auto m3 = respond(user, m2);
  const auto m4 = gw.finalize("alice", m3).first;
  // uid str16 + nonce + counter; nonce + proof(index, count, 2 x 33) + root + tag; two tags.
  EXPECT_EQ(m1.encode().size(), 2u + 5 + 16 + 8);
  EXPECT_EQ(m2.encode().size(), 16u + (8 + 2 + 2 * 33) + 32 + 32);
  EXPECT_EQ(m3.encode().size(), 32u);
  EXPECT_EQ(m4.encode().size(), 32u);
  EXPECT_EQ(m1.encode().size() + m2.encode().size() + m3.encode().size() + m4.encode().size(), 251u);
  EXPECT_EQ(M2::decode(m2.encode()).encode(), m2.encode());
  EXPECT_EQ(M1::decode(m1.encode()).uid, "alice");
}

TEST_F(MhtFixture, LostM4RecoversThroughResync) {
  const auto m2 = gw.challenge(initiate(user, src), src);
  gw.finalize("alice", respond(user, m2));
  abandon(user);
  ASSERT_TRUE(user.unconfirmed);
  EXPECT_EQ(g().txn_counter, 1u);
  EXPECT_EQ(user.txn_counter, 0u);
  const auto k = run();
  EXPECT_EQ(k.client, k.server);
  EXPECT_EQ(user.txn_counter, 2u);
  EXPECT_EQ(user.tree.root(), g().tree.root());
}

TEST_F(MhtFixture, ForgedResyncHintRejected) {
  const auto m2 = gw.challenge(initiate(user, src), src);
  gw.finalize("alice", respond(user, m2));
  abandon(user);
  auto hint = gw.hint("alice");
  hint.tag.mutable_view()[0] ^= 1;
  EXPECT_FALSE(resync(user, hint));
  EXPECT_TRUE(resync(user, gw.hint("alice")));
  EXPECT_EQ(ResyncHint::decode(hint.encode()).counter, hint.counter);
}

TEST_F(MhtFixture, StateSerializationRoundTrip) {
  run();
  initiate(user, src);
  const auto u2 = deserialize_user(serialize(user));
  EXPECT_EQ(serialize(u2), serialize(user));
  EXPECT_EQ(u2.tree.root(), user.tree.root());
  const auto g2 = deserialize_gateway(serialize(g()));
  EXPECT_EQ(serialize(g2), serialize(g()));
}

}  // namespace
}  // namespace hearth::mht
