#include "hearth/dors_auth.hpp"

#include <bit>

#include "hearth/merkle.hpp"

namespace hearth::dors {

namespace {

Bytes tree_leaf_label(std::uint32_t tree, std::uint32_t leaf) {
  WireWriter w;
  w.u32(tree).u32(leaf);
  return std::move(w).bytes();
}

void write_params(WireWriter& w, const Params& p) { w.u32(p.t).u32(p.k).u32(p.f).u32(p.r); }

Params read_params(WireReader& r) {
  Params p;
  p.t = r.u32();
  p.k = r.u32();
  p.f = r.u32();
  p.r = r.u32();
  p.validate();
  return p;
}

void write_chain(WireWriter& w, const ChainState& c) {
  w.fixed(c.value).u64(c.signature_count).u32(c.active_tree).u32(c.tree_uses);
}

ChainState read_chain(WireReader& r) {
  ChainState c;
  c.value = r.fixed<Digest256>();
  c.signature_count = r.u64();
  c.active_tree = r.u32();
  c.tree_uses = r.u32();
  return c;
}

Key256 session_key(const Key256& link, const Nonce128& challenge, const ChainState& next) {
  return kdf(link, "dors-sk", concat({challenge.view(), next.value.view()}));
}

Digest256 confirm_tag(const Key256& sk, const Nonce128& challenge) {
  return mac(sk, concat({as_bytes("dors-confirm"), challenge.view()}));
}

Key256 ratchet(const Key256& link, const ChainState& next) { return kdf(link, "dors-ratchet", next.value.view()); }

}  // namespace

void Params::validate() const {
  if (t < 2 || t > 65536 || !std::has_single_bit(t)) throw Error(Errc::InvalidParams, "t must be a power of two in [2, 65536]");
  if (k < 1 || k > t) throw Error(Errc::InvalidParams, "k must be in [1, t]");
  if (std::uint64_t{k} * index_bits() > 256) throw Error(Errc::InvalidParams, "k*log2(t) exceeds 256");
  if (f < 1 || f > 65536) throw Error(Errc::InvalidParams, "f must be in [1, 65536]");
  if (r < 1 || std::uint64_t{r} * k > t / 2) throw Error(Errc::InvalidParams, "r*k exceeds t/2");
}

std::uint32_t Params::index_bits() const noexcept { return static_cast<std::uint32_t>(std::countr_zero(t)); }

bool PublicKey::roots_consistent() const {
  if (roots.size() != leaf_digests.size()) return false;
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (!(merkle::build_root(leaf_digests[i]) == roots[i])) return false;
  }
  return true;
}

Bytes Signature::encode() const {
  WireWriter w;
  w.u16(tree_index);
  for (auto i : indices) w.u16(i);
  for (const auto& rv : reveals) w.fixed(rv);
  return std::move(w).bytes();
}

Signature Signature::decode(ByteView wire, const Params& params) {
  if (wire.size() != params.signature_size()) throw Error(Errc::Malformed, "signature length");
  WireReader r(wire);
  Signature s;
  s.tree_index = r.u16();
  for (std::uint32_t i = 0; i < params.k; ++i) s.indices.push_back(r.u16());
  for (std::uint32_t i = 0; i < params.k; ++i) s.reveals.push_back(r.fixed<Reveal>());
  return s;
}

Reveal leaf_secret(const Key256& forest_seed, std::uint32_t tree, std::uint32_t leaf) {
  return Reveal(kdf(forest_seed, "leaf", tree_leaf_label(tree, leaf)).raw());
}

KeyPair keygen(const Key256& seed, const Params& params) {
  params.validate();
  KeyPair kp;
  kp.secret = SecretKey{params, seed, 0, 0, std::vector<std::set<std::uint32_t>>(params.f)};
  kp.pub.params = params;
  kp.pub.leaf_digests.resize(params.f);
  for (std::uint32_t i = 0; i < params.f; ++i) {
    auto& row = kp.pub.leaf_digests[i];
    row.reserve(params.t);
    for (std::uint32_t j = 0; j < params.t; ++j) row.push_back(hash(leaf_secret(seed, i, j).view()));
    kp.pub.roots.push_back(merkle::build_root(row));
  }
  kp.chain = genesis_chain(kp.pub);
  return kp;
}

ChainState genesis_chain(const PublicKey& pk) {
  Bytes material(as_bytes("dors-genesis").begin(), as_bytes("dors-genesis").end());
  for (const auto& root : pk.roots) material.insert(material.end(), root.raw().begin(), root.raw().end());
  return ChainState{hash(material), 0, 0, 0};
}

std::vector<std::uint32_t> subset(ByteView message, const ChainState& chain, const Params& params) {
  const Digest256 h = hash(concat({message, chain.value.view()}));
  const std::uint32_t bits = params.index_bits();
  std::vector<std::uint32_t> out;
  out.reserve(params.k);
  std::size_t bit = 0;
  for (std::uint32_t c = 0; c < params.k; ++c) {
    std::uint32_t idx = 0;
    for (std::uint32_t b = 0; b < bits; ++b, ++bit) {
      const std::uint8_t byte = h[bit / 8];
      idx = (idx << 1) | ((byte >> (7 - bit % 8)) & 1u);
    }
    out.push_back(idx);
  }
  return out;
}

ChainState advance(const ChainState& chain, const Signature& sig) {
  ChainState next;
  next.value = hash(concat({chain.value.view(), sig.encode()}));
  next.signature_count = chain.signature_count + 1;
  next.active_tree = sig.tree_index;
  next.tree_uses = sig.tree_index == chain.active_tree ? chain.tree_uses + 1 : 1;
  return next;
}

Signed sign(SecretKey& sk, const ChainState& chain, ByteView message) {
  const Params& p = sk.params;
  if (sk.used_signatures >= p.r) {
    if (sk.active_tree + 1 >= p.f) throw Error(Errc::ForestExhausted);
    ++sk.active_tree;
    sk.used_signatures = 0;
  }
  Signature sig;
  sig.tree_index = static_cast<std::uint16_t>(sk.active_tree);
  for (auto idx : subset(message, chain, p)) {
    sig.indices.push_back(static_cast<std::uint16_t>(idx));
    sig.reveals.push_back(leaf_secret(sk.forest_seed, sk.active_tree, idx));
    sk.revealed[sk.active_tree].insert(idx);
  }
  ++sk.used_signatures;
  return {sig, advance(chain, sig)};
}

bool verify_material(const PublicKey& pk, const ChainState& chain, ByteView message, const Signature& sig) {
  const Params& p = pk.params;
  if (sig.tree_index >= p.f || sig.indices.size() != p.k || sig.reveals.size() != p.k) return false;
  const auto expected = subset(message, chain, p);
  bool ok = true;
  for (std::uint32_t i = 0; i < p.k; ++i) {
    if (sig.indices[i] != expected[i]) {
      ok = false;
      continue;
    }
    ok &= hash(sig.reveals[i].view()) == pk.leaf_digests[sig.tree_index][expected[i]];
  }
  return ok;
}

std::optional<ChainState> verify(const PublicKey& pk, const ChainState& chain, ByteView message,
                                 const Signature& sig) {
  const Params& p = pk.params;
  if (sig.tree_index == chain.active_tree) {
    if (chain.tree_uses >= p.r) return std::nullopt;
  } else if (sig.tree_index != chain.active_tree + 1) {
    return std::nullopt;
  }
  if (!verify_material(pk, chain, message, sig)) return std::nullopt;
  return advance(chain, sig);
}

std::pair<UserState, GatewayState> make_states(std::string_view uid, const Key256& forest_seed,
                                               const Key256& link_key, const Params& params) {
  KeyPair kp = keygen(forest_seed, params);
  UserState u{std::string(uid), std::move(kp.secret), kp.chain, link_key, std::nullopt, std::nullopt};
  GatewayState g{std::string(uid), std::move(kp.pub), kp.chain, link_key, std::nullopt};
  return {std::move(u), std::move(g)};
}

Bytes message_for(const Nonce128& challenge, std::string_view uid) { return concat({challenge.view(), as_bytes(uid)}); }

Bytes ChallengeMessage::encode() const {
  WireWriter w;
  w.fixed(nonce).fixed(chain_value).fixed(tag);
  return std::move(w).bytes();
}

ChallengeMessage ChallengeMessage::decode(ByteView wire) {
  WireReader r(wire);
  ChallengeMessage m{r.fixed<Nonce128>(), r.fixed<Digest256>(), r.fixed<Digest256>()};
  r.expect_done();
  return m;
}

namespace {

Digest256 challenge_tag(const Key256& link, const Nonce128& n, const Digest256& chain_value) {
  return mac(link, concat({as_bytes("dors-challenge"), n.view(), chain_value.view()}));
}

}  // namespace

ChallengeMessage challenge(GatewayState& gw, RandomSource& src) {
  gw.pending_challenge = random_nonce(src);
  const auto& n = *gw.pending_challenge;
  return {n, gw.chain.value, challenge_tag(gw.link_key, n, gw.chain.value)};
}

Signature respond(UserState& user, const ChallengeMessage& challenge) {
  abandon(user);
  const bool current = challenge.chain_value == user.chain.value &&
                       challenge_tag(user.link_key, challenge.nonce, challenge.chain_value) == challenge.tag;
  if (current) {
    user.unconfirmed.reset();
  } else if (user.unconfirmed && challenge.chain_value == user.unconfirmed->next_chain.value &&
             challenge_tag(user.unconfirmed->next_link_key, challenge.nonce, challenge.chain_value) == challenge.tag) {
    // The gateway accepted the run whose confirmation was lost.
    user.chain = user.unconfirmed->next_chain;
    user.link_key = user.unconfirmed->next_link_key;
    user.unconfirmed.reset();
  } else {
    throw Error(Errc::AuthFailed, "challenge does not match the signer's chain");
  }
  auto [sig, next] = sign(user.secret, user.chain, message_for(challenge.nonce, user.uid));
  user.pending = UserPending{challenge.nonce, next, session_key(user.link_key, challenge.nonce, next)};
  return sig;
}

void abandon(UserState& user) {
  if (!user.pending) return;
  const auto next = user.pending->next_chain;
  user.pending.reset();
  user.unconfirmed = UnconfirmedRun{next, ratchet(user.link_key, next)};
}

std::pair<Digest256, Key256> accept(GatewayState& gw, const Signature& sig) {
  if (!gw.pending_challenge) throw Error(Errc::AuthFailed, "no pending challenge");
  const Nonce128 ch = *gw.pending_challenge;
  gw.pending_challenge.reset();
  auto next = verify(gw.pub, gw.chain, message_for(ch, gw.uid), sig);
  if (!next) throw Error(Errc::AuthFailed);
  const Key256 sk = session_key(gw.link_key, ch, *next);
  gw.chain = *next;
  gw.link_key = ratchet(gw.link_key, *next);
  return {confirm_tag(sk, ch), sk};
}

Key256 confirm(UserState& user, const Digest256& tag) {
  if (!user.pending) throw Error(Errc::ConfirmFailed, "no pending handshake");
  const UserPending p = *user.pending;
  user.pending.reset();
  if (!(confirm_tag(p.candidate_key, p.challenge) == tag)) {
    user.unconfirmed = UnconfirmedRun{p.next_chain, ratchet(user.link_key, p.next_chain)};
    throw Error(Errc::ConfirmFailed);
  }
  user.chain = p.next_chain;
  user.link_key = ratchet(user.link_key, p.next_chain);
  user.unconfirmed.reset();
  return p.candidate_key;
}

Bytes serialize(const UserState& s) {
  WireWriter w;
  w.str16(s.uid);
  write_params(w, s.secret.params);
  w.fixed(s.secret.forest_seed).u32(s.secret.active_tree).u32(s.secret.used_signatures);
  for (const auto& set : s.secret.revealed) {
    w.u32(static_cast<std::uint32_t>(set.size()));
    for (auto idx : set) w.u32(idx);
  }
  write_chain(w, s.chain);
  w.fixed(s.link_key);
  w.u8(s.pending ? 1 : 0);
  if (s.pending) {
    w.fixed(s.pending->challenge);
    write_chain(w, s.pending->next_chain);
    w.fixed(s.pending->candidate_key);
  }
  w.u8(s.unconfirmed ? 1 : 0);
  if (s.unconfirmed) {
    write_chain(w, s.unconfirmed->next_chain);
    w.fixed(s.unconfirmed->next_link_key);
  }
  return std::move(w).bytes();
}

UserState deserialize_user(ByteView b) {
  WireReader r(b);
  UserState s;
  s.uid = r.str16();
  s.secret.params = read_params(r);
  s.secret.forest_seed = r.fixed<Key256>();
  s.secret.active_tree = r.u32();
  s.secret.used_signatures = r.u32();
  s.secret.revealed.resize(s.secret.params.f);
  for (auto& set : s.secret.revealed) {
    const auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) set.insert(r.u32());
  }
  s.chain = read_chain(r);
  s.link_key = r.fixed<Key256>();
  if (r.u8()) {
    UserPending p;
    p.challenge = r.fixed<Nonce128>();
    p.next_chain = read_chain(r);
    p.candidate_key = r.fixed<Key256>();
    s.pending = p;
  }
  if (r.u8()) {
    UnconfirmedRun u;
    u.next_chain = read_chain(r);
    u.next_link_key = r.fixed<Key256>();
    s.unconfirmed = u;
  }
  r.expect_done();
  return s;
}

Bytes serialize(const GatewayState& s) {
  WireWriter w;
  w.str16(s.uid);
  write_params(w, s.pub.params);
  for (const auto& row : s.pub.leaf_digests) {
    for (const auto& d : row) w.fixed(d);
  }
  for (const auto& root : s.pub.roots) w.fixed(root);
  write_chain(w, s.chain);
  w.fixed(s.link_key);
  w.u8(s.pending_challenge ? 1 : 0);
  if (s.pending_challenge) w.fixed(*s.pending_challenge);
  return std::move(w).bytes();
}

GatewayState deserialize_gateway(ByteView b) {
  WireReader r(b);
  GatewayState s;
  s.uid = r.str16();
  s.pub.params = read_params(r);
  s.pub.leaf_digests.assign(s.pub.params.f, {});
  for (auto& row : s.pub.leaf_digests) {
    for (std::uint32_t j = 0; j < s.pub.params.t; ++j) row.push_back(r.fixed<Digest256>());
  }
  for (std::uint32_t i = 0; i < s.pub.params.f; ++i) s.pub.roots.push_back(r.fixed<Digest256>());
  s.chain = read_chain(r);
  s.link_key = r.fixed<Key256>();
  if (r.u8()) s.pending_challenge = r.fixed<Nonce128>();
  r.expect_done();
  return s;
}

}  // namespace hearth::dors
