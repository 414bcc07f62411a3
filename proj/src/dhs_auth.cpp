#include "hearth/dhs_auth.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

namespace hearth::dhs {

namespace {

Bytes be64(std::uint64_t v) {
  WireWriter w;
  w.u64(v);
  return std::move(w).bytes();
}

std::uint64_t first_u64(ByteView b) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | b[i];
  return v;
}

Digest256 password_verifier(std::string_view uid, std::string_view password, const Nonce128& salt) {
  WireWriter w;
  w.str16(uid).str16(password).fixed(salt);
  return hash(w.bytes());
}

Digest256 one_time_proof(const Key256& card_secret, std::uint64_t epoch) {
  return Digest256(kdf(card_secret, "proof", be64(epoch)).raw());
}

// Tags cover the full destination address so neither half can be rewritten.
Digest256 login_tag(const Key256& link, std::uint64_t prefix, InterfaceIdentifier iid, const Nonce128& n_u) {
  return mac(link, concat({be64(prefix), be64(iid.value), n_u.view()}));
}

Key256 session_key(const Key256& link, const Nonce128& n_u, const Nonce128& n_e) {
  return kdf(link, "dhs-sk", concat({n_u.view(), n_e.view()}));
}

std::uint64_t iid_mask(const Key256& sk, const Nonce128& n_e) { return first_u64(kdf(sk, "iid-mask", n_e.view()).view()); }

Digest256 card_confirm(const Key256& sk, std::uint64_t prefix, InterfaceIdentifier iid, const Nonce128& n_e,
                       const AgreePayload& p) {
  return mac(sk, concat({as_bytes("card-confirm"), be64(prefix), be64(iid.value), n_e.view(), p.proof.view(), be64(p.masked_next_iid),
                         p.next_anchor.view()}));
}

Digest256 edge_confirm(const Key256& sk, const Nonce128& n_u, const Nonce128& n_e) {
  return mac(sk, concat({as_bytes("edge-confirm"), n_u.view(), n_e.view()}));
}

Key256 ratchet(const Key256& link, const Nonce128& n_u, const Nonce128& n_e) {
  return kdf(link, "dhs-ratchet", concat({n_u.view(), n_e.view()}));
}

Bytes record(ByteView body) {
  WireWriter w;
  w.var16(body);
  return std::move(w).bytes();
}

Bytes unrecord(ByteView b) {
  WireReader r(b);
  auto body = r.var16();
  r.expect_done();
  return body;
}

}  // namespace

std::ostream& operator<<(std::ostream& os, const InterfaceIdentifier& iid) {
  std::ostringstream s;
  s << std::hex << std::setfill('0') << std::setw(16) << iid.value;
  return os << s.str();
}

std::array<std::uint8_t, 16> Ipv6Packet::address() const noexcept {
  std::array<std::uint8_t, 16> a{};
  for (int i = 0; i < 8; ++i) {
    a[i] = static_cast<std::uint8_t>(prefix >> (56 - 8 * i));
    a[8 + i] = static_cast<std::uint8_t>(iid.value >> (56 - 8 * i));
  }
  return a;
}

Bytes Ipv6Packet::encode() const {
  WireWriter w;
  w.u64(prefix).u64(iid.value).var32(payload);
  return std::move(w).bytes();
}

Ipv6Packet Ipv6Packet::decode(ByteView wire) {
  try {
    WireReader r(wire);
    Ipv6Packet p;
    p.prefix = r.u64();
    p.iid.value = r.u64();
    p.payload = r.var32();
    r.expect_done();
    return p;
  } catch (const Error& e) {
    throw Error(Errc::MalformedPacket, e.what());
  }
}

Ipv6Packet encapsulate(ByteView request, InterfaceIdentifier iid, std::uint64_t prefix) {
  return {prefix, iid, Bytes(request.begin(), request.end())};
}

std::pair<InterfaceIdentifier, Bytes> decapsulate(const Ipv6Packet& packet) {
  const auto addr = packet.address();
  return {InterfaceIdentifier{first_u64(std::span(addr).subspan(8))}, packet.payload};
}

InterfaceIdentifier generate_iid(std::string_view uid, const Nonce128& session_nonce, const Key256& secret) {
  return {first_u64(hash(concat({secret.view(), as_bytes(uid), session_nonce.view()})).view())};
}

InterfaceIdentifier rotate_iid(std::string_view uid, InterfaceIdentifier current, const Key256& link_key) {
  const Digest256 d = hash(concat({as_bytes("rotate"), be64(current.value)}));
  return generate_iid(uid, Nonce128::from_span(d.view().first(16)), link_key);
}

Bytes LoginPayload::encode() const { return concat({n_u.view(), auth_tag.view()}); }

LoginPayload LoginPayload::decode(ByteView b) {
  WireReader r(b);
  LoginPayload p;
  p.n_u = r.fixed<Nonce128>();
  p.auth_tag = r.fixed<Digest256>();
  r.expect_done();
  return p;
}

Bytes Challenge::encode() const { return record(n_e.view()); }

Challenge Challenge::decode(ByteView b) { return {Nonce128::from_span(unrecord(b))}; }

Bytes AgreePayload::encode() const {
  WireWriter w;
  w.fixed(proof).u64(masked_next_iid).fixed(next_anchor).fixed(confirm);
  return std::move(w).bytes();
}

AgreePayload AgreePayload::decode(ByteView b) {
  WireReader r(b);
  AgreePayload p;
  p.proof = r.fixed<Digest256>();
  p.masked_next_iid = r.u64();
  p.next_anchor = r.fixed<Digest256>();
  p.confirm = r.fixed<Digest256>();
  r.expect_done();
  return p;
}

Bytes EdgeConfirm::encode() const { return record(tag.view()); }

EdgeConfirm EdgeConfirm::decode(ByteView b) { return {Digest256::from_span(unrecord(b))}; }

void EdgeServerDb::insert(std::string_view uid, EdgeEntry entry) {
  if (contains(uid)) throw Error(Errc::AlreadyRegistered, std::string(uid));
  entries_.emplace(std::string(uid), std::move(entry));
}

void EdgeServerDb::erase(std::string_view uid) {
  if (auto it = entries_.find(uid); it != entries_.end()) entries_.erase(it);
}

const EdgeEntry& EdgeServerDb::entry(std::string_view uid) const {
  auto it = entries_.find(uid);
  if (it == entries_.end()) throw Error(Errc::UnknownUser, std::string(uid));
  return it->second;
}

EdgeEntry& EdgeServerDb::entry(std::string_view uid) {
  auto it = entries_.find(uid);
  if (it == entries_.end()) throw Error(Errc::UnknownUser, std::string(uid));
  return it->second;
}

std::string EdgeServerDb::find_uid(InterfaceIdentifier iid, bool follow_rotations) {
  for (const auto& [uid, e] : entries_) {
    if (e.current_iid == iid) return uid;
  }
  if (follow_rotations) {
    for (auto& [uid, e] : entries_) {
      InterfaceIdentifier probe = e.current_iid;
      for (int step = 0; step < kMaxIidRotations; ++step) {
        probe = rotate_iid(uid, probe, e.edge_share);
        if (probe == iid) return uid;
      }
    }
  }
  throw Error(Errc::IdentifierMismatch);
}

Challenge EdgeServerDb::verify(const Ipv6Packet& login, RandomSource& src) {
  const auto [iid, body] = decapsulate(login);
  const std::string uid = find_uid(iid, true);
  LoginPayload payload;
  try {
    payload = LoginPayload::decode(body);
  } catch (const Error& e) {
    throw Error(Errc::MalformedPacket, e.what());
  }
  EdgeEntry& e = entries_.at(uid);
  if (!(login_tag(e.edge_share, login.prefix, iid, payload.n_u) == payload.auth_tag)) throw Error(Errc::TagInvalid);
  // Follows a card-side rotation only once the tag proves the link key.
  e.current_iid = iid;
  e.pending = EdgePending{payload.n_u, random_nonce(src)};
  return {e.pending->n_e};
}

std::pair<EdgeConfirm, Key256> EdgeServerDb::agree(const Ipv6Packet& response) {
  const auto [iid, body] = decapsulate(response);
  const std::string uid = find_uid(iid, false);
  EdgeEntry& e = entries_.at(uid);
  if (!e.pending) throw Error(Errc::AgreeFailed, "no pending challenge");
  const EdgePending p = *e.pending;
  e.pending.reset();
  AgreePayload payload;
  try {
    payload = AgreePayload::decode(body);
  } catch (const Error&) {
    throw Error(Errc::AgreeFailed, "malformed agreement payload");
  }
  const Key256 sk = session_key(e.edge_share, p.n_u, p.n_e);
  if (!(card_confirm(sk, response.prefix, iid, p.n_e, payload) == payload.confirm)) throw Error(Errc::AgreeFailed, "confirmation");
  if (!(hash(payload.proof.view()) == e.anchor)) throw Error(Errc::AgreeFailed, "one-time proof");
  e.current_iid = InterfaceIdentifier{payload.masked_next_iid ^ iid_mask(sk, p.n_e)};
  e.anchor = payload.next_anchor;
  e.edge_share = ratchet(e.edge_share, p.n_u, p.n_e);
  return {EdgeConfirm{edge_confirm(sk, p.n_u, p.n_e)}, sk};
}

Bytes EdgeServerDb::serialize() const {
  WireWriter w;
  w.u32(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [uid, e] : entries_) {
    w.str16(uid).u64(e.current_iid.value).fixed(e.edge_share).fixed(e.anchor);
    w.u8(e.pending ? 1 : 0);
    if (e.pending) w.fixed(e.pending->n_u).fixed(e.pending->n_e);
  }
  return std::move(w).bytes();
}

EdgeServerDb EdgeServerDb::deserialize(ByteView b) {
  WireReader r(b);
  EdgeServerDb db;
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto uid = r.str16();
    EdgeEntry e;
    e.current_iid.value = r.u64();
    e.edge_share = r.fixed<Key256>();
    e.anchor = r.fixed<Digest256>();
    if (r.u8()) {
      auto n_u = r.fixed<Nonce128>();
      e.pending = EdgePending{n_u, r.fixed<Nonce128>()};
    }
    db.insert(uid, std::move(e));
  }
  r.expect_done();
  return db;
}

HomeServerState initialize(RandomSource& src) { return {random_key(src), {}}; }

Registration register_user(HomeServerState& home, std::string_view uid, std::string_view password,
                           RandomSource& src) {
  if (home.registered.contains(uid)) throw Error(Errc::AlreadyRegistered, std::string(uid));
  SmartCardState card;
  card.uid = std::string(uid);
  card.card_salt = random_nonce(src);
  card.pw_verifier = password_verifier(uid, password, card.card_salt);
  card.card_secret = kdf(home.master_secret, "card", as_bytes(uid));
  card.current_iid = generate_iid(uid, random_nonce(src), card.card_secret);
  const Key256 edge_share = kdf(home.master_secret, "edge", as_bytes(uid));
  card.link_key = edge_share;
  EdgeEntry entry{card.current_iid, edge_share, hash(one_time_proof(card.card_secret, 0).view()), std::nullopt};
  home.registered.insert(std::string(uid));
  return {std::move(card), std::move(entry)};
}

namespace {

// The (identifier, link key, epoch) a run is based on.
struct Track {
  InterfaceIdentifier iid;
  Key256 link;
  std::uint64_t epoch;
};

Track track_of(const SmartCardState& card, bool via_unconfirmed) {
  if (!via_unconfirmed) return {card.current_iid, card.link_key, card.epoch};
  return {card.unconfirmed->next_iid, card.unconfirmed->next_link_key, card.epoch + 1};
}

}  // namespace

Ipv6Packet login(SmartCardState& card, std::string_view uid, std::string_view password, RandomSource& src,
                 bool via_unconfirmed) {
  if (card.locked) throw Error(Errc::CardLocked);
  if (uid != card.uid || !(password_verifier(uid, password, card.card_salt) == card.pw_verifier)) {
    if (++card.failed_attempts >= kMaxFailedLogins) {
      card.locked = true;
      throw Error(Errc::CardLocked);
    }
    throw Error(Errc::LocalAuthFailed);
  }
  card.failed_attempts = 0;
  if (via_unconfirmed && !card.unconfirmed) throw Error(Errc::AgreeFailed, "no unconfirmed session");
  const Track t = track_of(card, via_unconfirmed);
  const Nonce128 n_u = random_nonce(src);
  card.pending = CardPending{n_u, std::nullopt, std::nullopt, std::nullopt, via_unconfirmed};
  const LoginPayload payload{n_u, login_tag(t.link, card.prefix, t.iid, n_u)};
  return encapsulate(payload.encode(), t.iid, card.prefix);
}

Ipv6Packet agree(SmartCardState& card, const Challenge& challenge) {
  if (!card.pending || card.pending->n_e) throw Error(Errc::AgreeFailed, "no login awaiting a challenge");
  CardPending& p = *card.pending;
  const Track t = track_of(card, p.via_unconfirmed);
  const Key256 sk = session_key(t.link, p.n_u, challenge.n_e);
  const InterfaceIdentifier next = generate_iid(card.uid, challenge.n_e, card.card_secret);
  AgreePayload payload;
  payload.proof = one_time_proof(card.card_secret, t.epoch);
  payload.masked_next_iid = next.value ^ iid_mask(sk, challenge.n_e);
  payload.next_anchor = hash(one_time_proof(card.card_secret, t.epoch + 1).view());
  payload.confirm = card_confirm(sk, card.prefix, t.iid, challenge.n_e, payload);
  p.n_e = challenge.n_e;
  p.candidate_key = sk;
  p.next_iid = next;
  return encapsulate(payload.encode(), t.iid, card.prefix);
}

Key256 complete(SmartCardState& card, const EdgeConfirm& confirm) {
  if (!card.pending || !card.pending->candidate_key) throw Error(Errc::AgreeFailed, "no pending agreement");
  if (!(edge_confirm(*card.pending->candidate_key, card.pending->n_u, *card.pending->n_e) == confirm.tag)) {
    abandon(card);
    throw Error(Errc::AgreeFailed);
  }
  const CardPending p = *card.pending;
  card.pending.reset();
  const Track t = track_of(card, p.via_unconfirmed);
  card.current_iid = *p.next_iid;
  card.link_key = ratchet(t.link, p.n_u, *p.n_e);
  card.epoch = t.epoch + 1;
  card.unconfirmed.reset();
  return *p.candidate_key;
}

void abandon(SmartCardState& card) {
  if (!card.pending) return;
  const CardPending p = *card.pending;
  card.pending.reset();
  if (!p.candidate_key) return;
  // The edge may have moved on; remember where it would be. A retry of an
  // unconfirmed run replaces the remembered state only if this run was
  // based on it.
  const Track t = track_of(card, p.via_unconfirmed);
  if (p.via_unconfirmed) {
    card.current_iid = t.iid;
    card.link_key = t.link;
    card.epoch = t.epoch;
  }
  card.unconfirmed = CardUnconfirmed{*p.next_iid, ratchet(t.link, p.n_u, *p.n_e)};
}

void password_update(SmartCardState& card, std::string_view old_password, std::string_view new_password,
                     RandomSource& src) {
  if (card.locked) throw Error(Errc::CardLocked);
  if (!(password_verifier(card.uid, old_password, card.card_salt) == card.pw_verifier))
    throw Error(Errc::LocalAuthFailed);
  card.card_salt = random_nonce(src);
  card.pw_verifier = password_verifier(card.uid, new_password, card.card_salt);
  card.current_iid = rotate_iid(card.uid, card.current_iid, card.link_key);
  if (card.unconfirmed)
    card.unconfirmed->next_iid = rotate_iid(card.uid, card.unconfirmed->next_iid, card.unconfirmed->next_link_key);
  card.pending.reset();
}

Bytes serialize(const SmartCardState& c) {
  WireWriter w;
  w.str16(c.uid).fixed(c.pw_verifier).fixed(c.card_salt).fixed(c.card_secret).u64(c.current_iid.value);
  w.fixed(c.link_key).u64(c.epoch).u64(c.prefix).u32(c.failed_attempts).u8(c.locked ? 1 : 0);
  w.u8(c.pending ? 1 : 0);
  if (c.pending) {
    w.fixed(c.pending->n_u);
    w.u8(c.pending->n_e ? 1 : 0);
    if (c.pending->n_e) w.fixed(*c.pending->n_e).fixed(*c.pending->candidate_key).u64(c.pending->next_iid->value);
    w.u8(c.pending->via_unconfirmed ? 1 : 0);
  }
  w.u8(c.unconfirmed ? 1 : 0);
  if (c.unconfirmed) w.u64(c.unconfirmed->next_iid.value).fixed(c.unconfirmed->next_link_key);
  return std::move(w).bytes();
}

SmartCardState deserialize_card(ByteView b) {
  WireReader r(b);
  SmartCardState c;
  c.uid = r.str16();
  c.pw_verifier = r.fixed<Digest256>();
  c.card_salt = r.fixed<Nonce128>();
  c.card_secret = r.fixed<Key256>();
  c.current_iid.value = r.u64();
  c.link_key = r.fixed<Key256>();
  c.epoch = r.u64();
  c.prefix = r.u64();
  c.failed_attempts = r.u32();
  c.locked = r.u8() != 0;
  if (r.u8()) {
    CardPending p{r.fixed<Nonce128>(), std::nullopt, std::nullopt, std::nullopt};
    if (r.u8()) {
      p.n_e = r.fixed<Nonce128>();
      p.candidate_key = r.fixed<Key256>();
      p.next_iid = InterfaceIdentifier{r.u64()};
    }
    p.via_unconfirmed = r.u8() != 0;
    c.pending = p;
  }
  if (r.u8()) {
    const InterfaceIdentifier iid{r.u64()};
    c.unconfirmed = CardUnconfirmed{iid, r.fixed<Key256>()};
  }
  r.expect_done();
  return c;
}

}  // namespace hearth::dhs
