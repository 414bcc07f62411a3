#include "hearth/mht_auth.hpp"

namespace hearth::mht {

namespace {

Digest256 gateway_tag(const Key256& k, const Nonce128& n_u, const Nonce128& n_g, const Digest256& root) {
  return mac(k, concat({n_u.view(), n_g.view(), root.view()}));
}

Digest256 user_tag(const Key256& k, const Nonce128& n_u, const Nonce128& n_g, const Digest256& root) {
  return mac(k, concat({n_g.view(), n_u.view(), root.view(), as_bytes("u")}));
}

Key256 session_key(const Key256& k, const Nonce128& n_u, const Nonce128& n_g, const Digest256& root) {
  return kdf(k, "sk", concat({n_u.view(), n_g.view(), root.view()}));
}

Digest256 confirm_tag(const Key256& sk) { return mac(sk, as_bytes("confirm")); }

Digest256 txn_leaf(const Nonce128& n_u, const Nonce128& n_g) {
  return hash(concat({n_u.view(), n_g.view(), as_bytes("txn")}));
}

Key256 ratchet(const Key256& k, const Digest256& new_root) { return kdf(k, "mht-ratchet", new_root.view()); }

void write_tree(WireWriter& w, const merkle::MerkleTree& tree) {
  w.u32(static_cast<std::uint32_t>(tree.size()));
  for (const auto& leaf : tree.leaves()) w.fixed(leaf);
}

merkle::MerkleTree read_tree(WireReader& r) {
  const auto n = r.u32();
  std::vector<Digest256> leaves;
  leaves.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) leaves.push_back(r.fixed<Digest256>());
  return leaves.empty() ? merkle::MerkleTree() : merkle::MerkleTree(std::move(leaves));
}

}  // namespace

Bytes M1::encode() const {
  WireWriter w;
  w.str16(uid).fixed(n_u).u64(counter);
  return std::move(w).bytes();
}

M1 M1::decode(ByteView wire) {
  WireReader r(wire);
  M1 m;
  m.uid = r.str16();
  m.n_u = r.fixed<Nonce128>();
  m.counter = r.u64();
  r.expect_done();
  return m;
}

Bytes M2::encode() const {
  WireWriter w;
  w.fixed(n_g);
  merkle::encode(w, proof);
  w.fixed(root).fixed(tag);
  return std::move(w).bytes();
}

M2 M2::decode(ByteView wire) {
  WireReader r(wire);
  M2 m;
  m.n_g = r.fixed<Nonce128>();
  m.proof = merkle::decode_proof(r);
  m.root = r.fixed<Digest256>();
  m.tag = r.fixed<Digest256>();
  r.expect_done();
  return m;
}

Bytes M3::encode() const { return {tag_u.raw().begin(), tag_u.raw().end()}; }

M3 M3::decode(ByteView wire) { return {Digest256::from_span(wire)}; }

Bytes M4::encode() const { return {tag_g2.raw().begin(), tag_g2.raw().end()}; }

M4 M4::decode(ByteView wire) { return {Digest256::from_span(wire)}; }

std::vector<TransactionRecord> history(const merkle::MerkleTree& tree) {
  std::vector<TransactionRecord> out;
  out.reserve(tree.size());
  for (std::size_t i = 0; i < tree.size(); ++i) out.push_back({i, tree.leaves()[i]});
  return out;
}

Digest256 transaction_leaf(const Nonce128& n_u, const Nonce128& n_g) { return txn_leaf(n_u, n_g); }

Digest256 genesis_leaf(std::string_view uid) { return hash(concat({as_bytes("genesis"), as_bytes(uid)})); }

std::pair<UserState, GatewayState> make_states(std::string_view uid, const Key256& master_secret) {
  const Key256 shared = kdf(master_secret, "mht-user", as_bytes(uid));
  merkle::MerkleTree tree({genesis_leaf(uid)});
  UserState u{std::string(uid), shared, 0, tree, std::nullopt, std::nullopt};
  GatewayState g{std::string(uid), shared, 0, std::move(tree), std::nullopt};
  return {std::move(u), std::move(g)};
}

M1 initiate(UserState& user, RandomSource& src) {
  if (user.pending) throw Error(Errc::Busy);
  user.pending = UserPending{random_nonce(src), std::nullopt, std::nullopt};
  return {user.uid, user.pending->n_u, user.txn_counter};
}

M2 challenge(GatewayState& gw, const M1& m1, RandomSource& src) {
  if (m1.uid != gw.uid) throw Error(Errc::UnknownUser, m1.uid);
  if (m1.counter != gw.txn_counter) throw Error(Errc::CounterDesync);
  // A fresh M1 supersedes an abandoned run.
  const Nonce128 n_g = random_nonce(src);
  const Digest256 root = gw.tree.root();
  gw.pending = GatewayPending{m1.n_u, n_g, root};
  return {n_g, gw.tree.prove(gw.tree.size() - 1), root, gateway_tag(gw.shared_key, m1.n_u, n_g, root)};
}

M3 respond(UserState& user, const M2& m2) {
  if (!user.pending || user.pending->n_g) throw Error(Errc::GatewayAuthFailed, "no handshake awaiting M2");
  const Nonce128 n_u = user.pending->n_u;
  const Digest256& own_root = user.tree.root();
  if (!(m2.root == own_root) || m2.proof.leaf_index != user.tree.size() - 1 ||
      !merkle::verify(m2.root, user.tree.leaves().back(), m2.proof)) {
    user.pending.reset();
    throw Error(Errc::HistoryMismatch);
  }
  if (!(gateway_tag(user.shared_key, n_u, m2.n_g, m2.root) == m2.tag)) {
    user.pending.reset();
    throw Error(Errc::GatewayAuthFailed);
  }
  user.pending->n_g = m2.n_g;
  user.pending->candidate_key = session_key(user.shared_key, n_u, m2.n_g, own_root);
  return {user_tag(user.shared_key, n_u, m2.n_g, own_root)};
}

std::pair<M4, Key256> finalize(GatewayState& gw, const M3& m3) {
  if (!gw.pending) throw Error(Errc::UserAuthFailed, "no pending handshake");
  const GatewayPending p = *gw.pending;
  gw.pending.reset();
  if (!(user_tag(gw.shared_key, p.n_u, p.n_g, p.root) == m3.tag_u)) throw Error(Errc::UserAuthFailed);
  const Key256 sk = session_key(gw.shared_key, p.n_u, p.n_g, p.root);
  gw.tree.append(txn_leaf(p.n_u, p.n_g));
  ++gw.txn_counter;
  gw.shared_key = ratchet(gw.shared_key, gw.tree.root());
  return {M4{confirm_tag(sk)}, sk};
}

Key256 confirm(UserState& user, const M4& m4) {
  if (!user.pending || !user.pending->candidate_key) throw Error(Errc::ConfirmFailed, "no pending handshake");
  const UserPending p = *user.pending;
  user.pending.reset();
  const Digest256 leaf = txn_leaf(p.n_u, *p.n_g);
  merkle::MerkleTree next = user.tree;
  next.append(leaf);
  const Key256 next_key = ratchet(user.shared_key, next.root());
  if (!(confirm_tag(*p.candidate_key) == m4.tag_g2)) {
    user.unconfirmed = UnconfirmedCommit{leaf, next_key};
    throw Error(Errc::ConfirmFailed);
  }
  user.tree = std::move(next);
  ++user.txn_counter;
  user.shared_key = next_key;
  user.unconfirmed.reset();
  return *p.candidate_key;
}

namespace {

Digest256 resync_tag(const Key256& k, std::uint64_t counter, const Digest256& root) {
  WireWriter w;
  w.raw(as_bytes("mht-resync")).u64(counter).fixed(root);
  return mac(k, w.bytes());
}

}  // namespace

Bytes ResyncHint::encode() const {
  WireWriter w;
  w.u64(counter).fixed(root).fixed(tag);
  return std::move(w).bytes();
}

ResyncHint ResyncHint::decode(ByteView wire) {
  WireReader r(wire);
  ResyncHint h;
  h.counter = r.u64();
  h.root = r.fixed<Digest256>();
  h.tag = r.fixed<Digest256>();
  r.expect_done();
  return h;
}

void abandon(UserState& user) {
  if (!user.pending) return;
  const UserPending p = *user.pending;
  user.pending.reset();
  if (!p.candidate_key) return;
  merkle::MerkleTree next = user.tree;
  const Digest256 leaf = txn_leaf(p.n_u, *p.n_g);
  next.append(leaf);
  user.unconfirmed = UnconfirmedCommit{leaf, ratchet(user.shared_key, next.root())};
}

bool resync(UserState& user, const ResyncHint& hint) {
  if (hint.counter == user.txn_counter)
    return hint.root == user.tree.root() && resync_tag(user.shared_key, hint.counter, hint.root) == hint.tag;
  if (hint.counter != user.txn_counter + 1 || !user.unconfirmed) return false;
  merkle::MerkleTree next = user.tree;
  next.append(user.unconfirmed->leaf);
  if (!(next.root() == hint.root)) return false;
  if (!(resync_tag(user.unconfirmed->next_shared_key, hint.counter, hint.root) == hint.tag)) return false;
  user.tree = std::move(next);
  ++user.txn_counter;
  user.shared_key = user.unconfirmed->next_shared_key;
  user.unconfirmed.reset();
  user.pending.reset();
  return true;
}

Bytes serialize(const UserState& s) {
  WireWriter w;
  w.str16(s.uid).fixed(s.shared_key).u64(s.txn_counter);
  write_tree(w, s.tree);
  w.u8(s.pending ? 1 : 0);
  if (s.pending) {
    w.fixed(s.pending->n_u);
    w.u8(s.pending->n_g ? 1 : 0);
    if (s.pending->n_g) w.fixed(*s.pending->n_g);
    w.u8(s.pending->candidate_key ? 1 : 0);
    if (s.pending->candidate_key) w.fixed(*s.pending->candidate_key);
  }
  w.u8(s.unconfirmed ? 1 : 0);
  if (s.unconfirmed) w.fixed(s.unconfirmed->leaf).fixed(s.unconfirmed->next_shared_key);
  return std::move(w).bytes();
}

UserState deserialize_user(ByteView b) {
  WireReader r(b);
  UserState s;
  s.uid = r.str16();
  s.shared_key = r.fixed<Key256>();
  s.txn_counter = r.u64();
  s.tree = read_tree(r);
  if (r.u8()) {
    UserPending p{r.fixed<Nonce128>(), std::nullopt, std::nullopt};
    if (r.u8()) p.n_g = r.fixed<Nonce128>();
    if (r.u8()) p.candidate_key = r.fixed<Key256>();
    s.pending = p;
  }
  if (r.u8()) {
    auto leaf = r.fixed<Digest256>();
    s.unconfirmed = UnconfirmedCommit{leaf, r.fixed<Key256>()};
  }
  r.expect_done();
  return s;
}

Bytes serialize(const GatewayState& s) {
  WireWriter w;
  w.str16(s.uid).fixed(s.shared_key).u64(s.txn_counter);
  write_tree(w, s.tree);
  w.u8(s.pending ? 1 : 0);
  if (s.pending) w.fixed(s.pending->n_u).fixed(s.pending->n_g).fixed(s.pending->root);
  return std::move(w).bytes();
}

GatewayState deserialize_gateway(ByteView b) {
  WireReader r(b);
  GatewayState s;
  s.uid = r.str16();
  s.shared_key = r.fixed<Key256>();
  s.txn_counter = r.u64();
  s.tree = read_tree(r);
  if (r.u8()) {
    auto n_u = r.fixed<Nonce128>();
    auto n_g = r.fixed<Nonce128>();
    s.pending = GatewayPending{n_u, n_g, r.fixed<Digest256>()};
  }
  r.expect_done();
  return s;
}

UserState Gateway::enroll(std::string_view uid, const Key256& master_secret) {
  if (contains(uid)) throw Error(Errc::AlreadyRegistered, std::string(uid));
  auto [user, gw] = make_states(uid, master_secret);
  states_.emplace(std::string(uid), std::move(gw));
  return std::move(user);
}

GatewayState& Gateway::state(std::string_view uid) {
  auto it = states_.find(uid);
  if (it == states_.end()) throw Error(Errc::UnknownUser, std::string(uid));
  return it->second;
}

const GatewayState& Gateway::state(std::string_view uid) const {
  auto it = states_.find(uid);
  if (it == states_.end()) throw Error(Errc::UnknownUser, std::string(uid));
  return it->second;
}

M2 Gateway::challenge(const M1& m1, RandomSource& src) { return mht::challenge(state(m1.uid), m1, src); }

std::pair<M4, Key256> Gateway::finalize(std::string_view uid, const M3& m3) { return mht::finalize(state(uid), m3); }

ResyncHint Gateway::hint(std::string_view uid) const {
  const auto& s = state(uid);
  return {s.txn_counter, s.tree.root(), resync_tag(s.shared_key, s.txn_counter, s.tree.root())};
}

}  // namespace hearth::mht
