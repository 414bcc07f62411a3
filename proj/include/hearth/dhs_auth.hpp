#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "hearth/bytes.hpp"
#include "hearth/primitives.hpp"

// Smart-card login among user card, edge server and home server. Each session
// is addressed by a 64-bit interface identifier carried in the low half of an
// IPv6 address and rotated after every successful session.
//
// Phases: initialize (home master secret) -> register (card + edge entry)
// -> login (local password check, packet with iid and tag) -> edge_verify
// (iid lookup, tag check, challenge) -> session agreement (one-time proof,
// confirmation MACs, new iid on both sides) -> password update (card only).
namespace hearth::dhs {

struct InterfaceIdentifier {
  std::uint64_t value = 0;

  friend bool operator==(const InterfaceIdentifier&, const InterfaceIdentifier&) = default;
  friend auto operator<=>(const InterfaceIdentifier&, const InterfaceIdentifier&) = default;
};

std::ostream& operator<<(std::ostream& os, const InterfaceIdentifier& iid);

inline constexpr std::uint64_t kDefaultPrefix = 0xfd00'0000'0000'0001ULL;

/// 8-byte prefix || 8-byte iid || 4-byte payload length || payload.
struct Ipv6Packet {
  std::uint64_t prefix = kDefaultPrefix;
  InterfaceIdentifier iid;
  Bytes payload;

  /// The 128-bit destination address, network byte order.
  std::array<std::uint8_t, 16> address() const noexcept;
  Bytes encode() const;
  /// Throws `Errc::MalformedPacket`.
  static Ipv6Packet decode(ByteView wire);

  friend bool operator==(const Ipv6Packet&, const Ipv6Packet&) = default;
};

Ipv6Packet encapsulate(ByteView request, InterfaceIdentifier iid, std::uint64_t prefix = kDefaultPrefix);
std::pair<InterfaceIdentifier, Bytes> decapsulate(const Ipv6Packet& packet);

/// First 8 bytes (big-endian) of hash(secret || uid || nonce).
InterfaceIdentifier generate_iid(std::string_view uid, const Nonce128& session_nonce, const Key256& secret);

/// Successor identifier after a local password update; the edge can follow
/// it because it holds the same link key.
InterfaceIdentifier rotate_iid(std::string_view uid, InterfaceIdentifier current, const Key256& link_key);

struct HomeServerState {
  Key256 master_secret;
  std::set<std::string, std::less<>> registered;
};

struct CardPending {
  Nonce128 n_u;
  std::optional<Nonce128> n_e;
  std::optional<Key256> candidate_key;
  std::optional<InterfaceIdentifier> next_iid;
  /// Run based on the unconfirmed state rather than the current one.
  bool via_unconfirmed = false;
};

/// Where the edge stands if it accepted a run whose confirmation was lost.
struct CardUnconfirmed {
  InterfaceIdentifier next_iid;
  Key256 next_link_key;
};

struct SmartCardState {
  std::string uid;
  Digest256 pw_verifier;
  Nonce128 card_salt;
  Key256 card_secret;
  InterfaceIdentifier current_iid;
  /// Pairwise key shared with the edge; ratcheted after each session.
  Key256 link_key;
  std::uint64_t epoch = 0;
  std::uint64_t prefix = kDefaultPrefix;
  std::uint32_t failed_attempts = 0;
  bool locked = false;
  std::optional<CardPending> pending;
  std::optional<CardUnconfirmed> unconfirmed;
};

struct EdgePending {
  Nonce128 n_u;
  Nonce128 n_e;
};

struct EdgeEntry {
  InterfaceIdentifier current_iid;
  Key256 edge_share;
  /// hash of the card's next one-time proof.
  Digest256 anchor;
  std::optional<EdgePending> pending;
};

struct LoginPayload {
  Nonce128 n_u;
  Digest256 auth_tag;

  Bytes encode() const;
  static LoginPayload decode(ByteView b);
};

struct Challenge {
  Nonce128 n_e;

  Bytes encode() const;
  static Challenge decode(ByteView b);
};

struct AgreePayload {
  Digest256 proof;
  std::uint64_t masked_next_iid = 0;
  Digest256 next_anchor;
  Digest256 confirm;

  Bytes encode() const;
  static AgreePayload decode(ByteView b);
};

struct EdgeConfirm {
  Digest256 tag;

  Bytes encode() const;
  static EdgeConfirm decode(ByteView b);
};

inline constexpr std::uint32_t kMaxFailedLogins = 3;
inline constexpr int kMaxIidRotations = 8;

class EdgeServerDb {
 public:
  /// Throws `Errc::AlreadyRegistered`.
  void insert(std::string_view uid, EdgeEntry entry);
  void erase(std::string_view uid);
  bool contains(std::string_view uid) const { return entries_.find(uid) != entries_.end(); }
  const EdgeEntry& entry(std::string_view uid) const;
  EdgeEntry& entry(std::string_view uid);
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, EdgeEntry, std::less<>>& entries() const noexcept { return entries_; }

  /// Throws `Errc::IdentifierMismatch`, `Errc::MalformedPacket`, `Errc::TagInvalid`.
  Challenge verify(const Ipv6Packet& login, RandomSource& src);
  /// Throws `Errc::IdentifierMismatch`, `Errc::AgreeFailed`. On success the
  /// entry moves to the card's next identifier and anchor.
  std::pair<EdgeConfirm, Key256> agree(const Ipv6Packet& response);

  Bytes serialize() const;
  static EdgeServerDb deserialize(ByteView b);

 private:
  std::string find_uid(InterfaceIdentifier iid, bool follow_rotations);

  std::map<std::string, EdgeEntry, std::less<>> entries_;
};

HomeServerState initialize(RandomSource& src);

struct Registration {
  SmartCardState card;
  EdgeEntry edge_entry;
};

/// Throws `Errc::AlreadyRegistered`.
Registration register_user(HomeServerState& home, std::string_view uid, std::string_view password,
                           RandomSource& src);

/// Local check on the card; no packet is produced on failure. Throws
/// `Errc::LocalAuthFailed`, or `Errc::CardLocked` from the third consecutive
/// failure on. With `via_unconfirmed` the run starts from the state the edge
/// reached if it accepted the last unconfirmed run.
Ipv6Packet login(SmartCardState& card, std::string_view uid, std::string_view password, RandomSource& src,
                 bool via_unconfirmed = false);

/// Card side of session agreement: answers the edge challenge.
Ipv6Packet agree(SmartCardState& card, const Challenge& challenge);

/// Checks the edge confirmation and installs the next identifier. Throws
/// `Errc::AgreeFailed` leaving the identifier unchanged; the run is then kept
/// as unconfirmed.
Key256 complete(SmartCardState& card, const EdgeConfirm& confirm);
/// Drops a pending run after a lost message, keeping it as unconfirmed if
/// the agreement was already sent.
void abandon(SmartCardState& card);

/// Throws `Errc::LocalAuthFailed` (state unchanged) or `Errc::CardLocked`.
void password_update(SmartCardState& card, std::string_view old_password, std::string_view new_password,
                     RandomSource& src);

Bytes serialize(const SmartCardState& card);
SmartCardState deserialize_card(ByteView b);

}  // namespace hearth::dhs
