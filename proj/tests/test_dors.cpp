#include <gtest/gtest.h>

#include <set>

#include "hearth/attacks.hpp"
#include "hearth/dors_auth.hpp"
#include "hearth/handshake.hpp"

namespace hearth::dors {
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

const Key256 kSeed = key_from_digest(hash("forest"));

// Independent index extraction through a string of bits.
std::vector<std::uint32_t> reference_subset(ByteView message, const Digest256& chain_value, std::uint32_t t,
                                            std::uint32_t k) {
  const auto h = hash(concat({message, chain_value.view()}));
  std::string bits;
  for (auto byte : h.raw())
    for (int b = 7; b >= 0; --b) bits += ((byte >> b) & 1) ? '1' : '0';
  std::uint32_t width = 0;
  while ((1u << width) < t) ++width;
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < k; ++i) out.push_back(std::stoul(bits.substr(i * width, width), nullptr, 2));
  return out;
}

TEST(DorsParams, Validation) {
  EXPECT_NO_THROW(kProductionParams.validate());
  EXPECT_EQ(code_of([] { Params{4, 5, 1, 1}.validate(); }), Errc::InvalidParams);
  EXPECT_EQ(code_of([] { Params{6, 2, 1, 1}.validate(); }), Errc::InvalidParams);
  EXPECT_EQ(code_of([] { Params{16, 4, 1, 3}.validate(); }), Errc::InvalidParams);
  EXPECT_EQ(kProductionParams.signature_size(), 16u * 32 + 2 + 32);
  EXPECT_EQ(kProductionParams.signature_size(), 546u);
}

TEST(DorsKeygen, DeterministicAndSized) {
  const Params p{4, 2, 2, 1};
  const auto a = keygen(kSeed, p);
  const auto b = keygen(kSeed, p);
  EXPECT_EQ(a.pub, b.pub);
  std::size_t total = 0;
  for (const auto& row : a.pub.leaf_digests) total += row.size();
  EXPECT_EQ(total, 8u);
  EXPECT_TRUE(a.pub.roots_consistent());
  EXPECT_EQ(code_of([] { keygen(kSeed, Params{4, 5, 1, 1}); }), Errc::InvalidParams);
}

TEST(DorsKeygen, LeafSecretsAndGenesis) {
  const Params p{4, 2, 2, 1};
  const auto kp = keygen(kSeed, p);
  WireWriter w;
  w.u32(1).u32(3);
  EXPECT_EQ(leaf_secret(kSeed, 1, 3), Digest256(kdf(kSeed, "leaf", w.bytes()).raw()));
  EXPECT_EQ(kp.pub.leaf_digests[1][3], hash(leaf_secret(kSeed, 1, 3).view()));
  Bytes material(as_bytes("dors-genesis").begin(), as_bytes("dors-genesis").end());
  for (const auto& r : kp.pub.roots) material.insert(material.end(), r.raw().begin(), r.raw().end());
  EXPECT_EQ(kp.chain.value, hash(material));
  EXPECT_EQ(kp.chain.signature_count, 0u);
}

TEST(DorsSubset, LeadingBitsElevenZeroOne) {
  const Params p{4, 2, 1, 1};
  const ChainState chain{hash("chain"), 0, 0, 0};
  for (int i = 0;; ++i) {
    const auto text = "m" + std::to_string(i);
    const auto msg = as_bytes(text);
    const auto h = hash(concat({msg, chain.value.view()}));
    if ((h[0] >> 4) != 0xD) continue;
    EXPECT_EQ(subset(msg, chain, p), (std::vector<std::uint32_t>{3, 1}));
    break;
  }
}

TEST(DorsSubset, MatchesReferenceAndByteChunks) {
  const ChainState chain{hash("c"), 0, 0, 0};
  for (int i = 0; i < 50; ++i) {
    const auto text = "message " + std::to_string(i);
    const auto msg = as_bytes(text);
    EXPECT_EQ(subset(msg, chain, Params{16, 4, 1, 1}), reference_subset(msg, chain.value, 16, 4));
    const auto h = hash(concat({msg, chain.value.view()}));
    const auto idx = subset(msg, chain, kProductionParams);
    ASSERT_EQ(idx.size(), 16u);
    for (int j = 0; j < 16; ++j) EXPECT_EQ(idx[j], h[j]);
  }
}

TEST(DorsSubset, DependsOnMessageAndChain) {
  const ChainState c1{hash("c1"), 0, 0, 0};
  const ChainState c2{hash("c2"), 0, 0, 0};
  const auto m = as_bytes("fixed");
  EXPECT_NE(subset(m, c1, kProductionParams), subset(m, c2, kProductionParams));
  EXPECT_NE(subset(m, c1, kProductionParams), subset(as_bytes("other"), c1, kProductionParams));
}

TEST(DorsSign, BudgetAndRotation) {
  auto one = keygen(kSeed, Params{4, 2, 1, 1});
  const auto s1 = sign(one.secret, one.chain, as_bytes("a"));
  EXPECT_EQ(code_of([&] { sign(one.secret, s1.next, as_bytes("b")); }), Errc::ForestExhausted);

  auto two = keygen(kSeed, Params{4, 2, 2, 1});
  const auto first = sign(two.secret, two.chain, as_bytes("a"));
  const auto second = sign(two.secret, first.next, as_bytes("b"));
  EXPECT_EQ(first.signature.tree_index, 0);
  EXPECT_EQ(second.signature.tree_index, 1);
  EXPECT_TRUE(verify(two.pub, first.next, as_bytes("b"), second.signature));
}

TEST(DorsSign, RevealsArePreimages) {
  auto kp = keygen(kSeed, Params{16, 4, 2, 2});
  const auto s = sign(kp.secret, kp.chain, as_bytes("x"));
  for (std::size_t i = 0; i < s.signature.indices.size(); ++i)
    EXPECT_EQ(hash(s.signature.reveals[i].view()), kp.pub.leaf_digests[0][s.signature.indices[i]]);
  EXPECT_EQ(s.next.value, hash(concat({kp.chain.value.view(), s.signature.encode()})));
}

TEST(DorsVerify, RoundTripReplayAndBadReveal) {
  auto kp = keygen(kSeed, kProductionParams);
  const auto msg = as_bytes("hello");
  const auto s = sign(kp.secret, kp.chain, msg);
  const auto next = verify(kp.pub, kp.chain, msg, s.signature);
  ASSERT_TRUE(next);
  EXPECT_EQ(*next, s.next);
  EXPECT_FALSE(verify(kp.pub, *next, msg, s.signature));
  auto bad = s.signature;
  bad.reveals[3] = hash("x");
  EXPECT_FALSE(verify(kp.pub, kp.chain, msg, bad));
  EXPECT_EQ(Signature::decode(s.signature.encode(), kProductionParams), s.signature);
  EXPECT_EQ(s.signature.encode().size(), 546u);
}

TEST(DorsVerify, ChainedSequenceInOrderOnly) {
  const Params p{16, 4, 3, 2};
  auto kp = keygen(kSeed, p);
  ChainState signer = kp.chain, verifier = kp.chain;
  std::vector<Signed> all;
  std::vector<std::string> texts;
  for (std::uint32_t i = 0; i < p.f * p.r; ++i) {
    texts.push_back("msg" + std::to_string(i));
    all.push_back(sign(kp.secret, signer, as_bytes(texts.back())));
    signer = all.back().next;
  }
  // Signature 1 does not verify before signature 0.
  EXPECT_FALSE(verify(kp.pub, verifier, as_bytes("msg1"), all[1].signature));
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto next = verify(kp.pub, verifier, as_bytes(texts[i]), all[i].signature);
    ASSERT_TRUE(next) << i;
    verifier = *next;
  }
  EXPECT_EQ(verifier, signer);
  for (const auto& revealed : kp.secret.revealed) EXPECT_LE(revealed.size(), p.r * p.k);
}

TEST(DorsForgery, ExhaustiveOverRevealedMaterial) {
  const Params p{4, 2, 1, 1};
  auto kp = keygen(kSeed, p);
  auto src = RandomSource::seeded(9);
  const auto first = sign(kp.secret, kp.chain, message_for(random_nonce(src), "alice"));
  const auto& observed = first.signature;
  std::map<std::uint16_t, Reveal> known;
  for (std::size_t i = 0; i < observed.indices.size(); ++i) known[observed.indices[i]] = observed.reveals[i];

  int covered = 0, accepted = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const auto msg = message_for(random_nonce(src), "alice");
    const auto want = subset(msg, first.next, p);
    bool inside = true;
    for (auto i : want) inside &= known.contains(static_cast<std::uint16_t>(i));
    bool any = false;
    // Every assignment of known (index, reveal) pairs to the k positions.
    for (const auto& [i0, r0] : known) {
      for (const auto& [i1, r1] : known) {
        Signature s{0, {i0, i1}, {r0, r1}};
        any |= verify_material(kp.pub, first.next, msg, s);
      }
    }
    EXPECT_EQ(any, inside);
    covered += inside;
    accepted += any;
    const auto helper = hearth::harness::forge_from_observed(kp.pub, first.next, msg, std::vector<Signature>{observed});
    EXPECT_EQ(helper.has_value(), inside);
  }
  EXPECT_EQ(covered, accepted);
  EXPECT_GT(covered, 0);
}

struct DorsHandshake : ::testing::Test {
  Params params{64, 8, 2, 2};
  Key256 link = key_from_digest(hash("link"));
  std::pair<UserState, GatewayState> states = make_states("alice", kSeed, link, params);
  UserState& user = states.first;
  GatewayState& gw = states.second;
  RandomSource src = RandomSource::seeded(4);
  DirectChannel direct;
};

TEST_F(DorsHandshake, HonestRunAndKeyFormula) {
  const auto c = challenge(gw, src);
  EXPECT_EQ(c.encode().size(), 80u);
  EXPECT_EQ(c.tag, mac(link, concat({as_bytes("dors-challenge"), c.nonce.view(), c.chain_value.view()})));
  const auto sig = respond(user, c);
  const auto [tag, server_key] = accept(gw, sig);
  const auto client_key = confirm(user, tag);
  EXPECT_EQ(client_key, server_key);
  EXPECT_EQ(server_key, kdf(link, "dors-sk", concat({c.nonce.view(), gw.chain.value.view()})));
  EXPECT_EQ(user.chain, gw.chain);
  EXPECT_EQ(gw.chain.signature_count, 1u);
  EXPECT_EQ(gw.link_key, kdf(link, "dors-ratchet", gw.chain.value.view()));
}

TEST_F(DorsHandshake, RepeatedRunsDistinctKeys) {
  std::set<Key256> keys;
  for (int i = 0; i < 4; ++i) {
    const auto k = run_dors(user, gw, src, direct);
    EXPECT_EQ(k.client, k.server);
    keys.insert(k.client);
  }
  EXPECT_EQ(keys.size(), 4u);
  EXPECT_EQ(code_of([&] { run_dors(user, gw, src, direct); }), Errc::ForestExhausted);
}

TEST_F(DorsHandshake, DesynchronizedChainsFail) {
  auto c = challenge(gw, src);
  gw.chain.value = hash("elsewhere");
  auto sig = respond(user, c);
  EXPECT_EQ(code_of([&] { accept(gw, sig); }), Errc::AuthFailed);
  EXPECT_EQ(gw.chain.signature_count, 0u);
}

TEST_F(DorsHandshake, UnauthenticatedChallengeRejected) {
  auto c = challenge(gw, src);
  c.tag.mutable_view()[0] ^= 1;
  EXPECT_EQ(code_of([&] { respond(user, c); }), Errc::AuthFailed);
}

TEST_F(DorsHandshake, LostConfirmationRecovers) {
  const auto c = challenge(gw, src);
  accept(gw, respond(user, c));
  abandon(user);
  ASSERT_TRUE(user.unconfirmed);
  const auto k = run_dors(user, gw, src, direct);
  EXPECT_EQ(k.client, k.server);
  EXPECT_EQ(user.chain, gw.chain);
}

TEST_F(DorsHandshake, StateRoundTrip) {
  run_dors(user, gw, src, direct);
  EXPECT_EQ(serialize(deserialize_user(serialize(user))), serialize(user));
  EXPECT_EQ(serialize(deserialize_gateway(serialize(gw))), serialize(gw));
}

}  // namespace
}  // namespace hearth::dors
