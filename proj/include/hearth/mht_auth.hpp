#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hearth/bytes.hpp"
#include "hearth/merkle.hpp"
#include "hearth/primitives.hpp"

// Counter-based mutual authentication bound to a Merkle-committed history of
// completed handshakes. Freshness comes from the transaction counter and the
// history root, never from a clock; the gateway keeps live per-user protocol
// state only, no table of password verifiers.
//
//   user -> gw   M1 {uid, n_u, counter}
//   gw -> user   M2 {n_g, proof(latest leaf), root, tag = mac(K, n_u||n_g||root)}
//   user -> gw   M3 {tag_u = mac(K, n_g||n_u||root||"u")}
//   gw -> user   M4 {tag_g2 = mac(sk, "confirm")}
//
// sk = kdf(K, "sk", n_u||n_g||root). After a completed handshake both sides
// append hash(n_u||n_g||"txn") and ratchet K = kdf(K, "mht-ratchet", new root).
namespace hearth::mht {

struct TransactionRecord {
  std::uint64_t index = 0;
  Digest256 payload_digest;
};

struct M1 {
  std::string uid;
  Nonce128 n_u;
  std::uint64_t counter = 0;

  Bytes encode() const;
  static M1 decode(ByteView wire);
};

struct M2 {
  Nonce128 n_g;
  merkle::MerkleProof proof;
  Digest256 root;
  Digest256 tag;

  Bytes encode() const;
  static M2 decode(ByteView wire);
};

struct M3 {
  Digest256 tag_u;

  Bytes encode() const;
  static M3 decode(ByteView wire);
};

struct M4 {
  Digest256 tag_g2;

  Bytes encode() const;
  static M4 decode(ByteView wire);
};

struct UserPending {
  Nonce128 n_u;
  std::optional<Nonce128> n_g;
  std::optional<Key256> candidate_key;
};

/// What a user keeps after a failed confirmation so it can catch up if the
/// gateway did commit.
struct UnconfirmedCommit {
  Digest256 leaf;
  Key256 next_shared_key;
};

struct UserState {
  std::string uid;
  Key256 shared_key;
  std::uint64_t txn_counter = 0;
  merkle::MerkleTree tree;
  std::optional<UserPending> pending;
  std::optional<UnconfirmedCommit> unconfirmed;
};

struct GatewayPending {
  Nonce128 n_u;
  Nonce128 n_g;
  Digest256 root;
};

struct GatewayState {
  std::string uid;
  Key256 shared_key;
  std::uint64_t txn_counter = 0;
  merkle::MerkleTree tree;
  std::optional<GatewayPending> pending;
};

/// Gateway reply on `CounterDesync`, tagged mac(K, "mht-resync" || counter || root)
/// under the gateway's current shared key.
struct ResyncHint {
  std::uint64_t counter = 0;
  Digest256 root;
  Digest256 tag;

  Bytes encode() const;
  static ResyncHint decode(ByteView wire);
};

std::vector<TransactionRecord> history(const merkle::MerkleTree& tree);

/// Leaf committed for a completed handshake: hash(n_u || n_g || "txn").
Digest256 transaction_leaf(const Nonce128& n_u, const Nonce128& n_g);

/// Genesis leaf hash("genesis" || uid).
Digest256 genesis_leaf(std::string_view uid);

/// Builds matching user and gateway state for a fresh enrolment.
std::pair<UserState, GatewayState> make_states(std::string_view uid, const Key256& master_secret);

/// Throws `Errc::Busy` if a handshake is already pending.
M1 initiate(UserState& user, RandomSource& src);
/// Throws `Errc::CounterDesync` on stale/ahead counters, `Errc::UnknownUser`
/// on a uid that does not own `gw`.
M2 challenge(GatewayState& gw, const M1& m1, RandomSource& src);
/// Throws `Errc::HistoryMismatch` or `Errc::GatewayAuthFailed`; aborts the pending run.
M3 respond(UserState& user, const M2& m2);
/// Throws `Errc::UserAuthFailed`. On success the gateway commits the new leaf.
std::pair<M4, Key256> finalize(GatewayState& gw, const M3& m3);
/// Throws `Errc::ConfirmFailed`; the user then keeps its committed state.
Key256 confirm(UserState& user, const M4& m4);
/// Drops a pending run after a lost message. A run that already sent M3 is
/// remembered as unconfirmed, since the gateway may have committed it.
void abandon(UserState& user);

/// Catches a user up to the gateway after a lost M4. Returns false when the
/// hint does not authenticate or the histories cannot be reconciled, in
/// which case the user must re-register.
bool resync(UserState& user, const ResyncHint& hint);

/// Persisted state, including any in-flight handshake.
Bytes serialize(const UserState& s);
UserState deserialize_user(ByteView b);
Bytes serialize(const GatewayState& s);
GatewayState deserialize_gateway(ByteView b);

/// Per-uid gateway registry.
class Gateway {
 public:
  /// Throws `Errc::AlreadyRegistered`.
  UserState enroll(std::string_view uid, const Key256& master_secret);

  bool contains(std::string_view uid) const { return states_.find(std::string(uid)) != states_.end(); }
  GatewayState& state(std::string_view uid);
  const GatewayState& state(std::string_view uid) const;

  M2 challenge(const M1& m1, RandomSource& src);
  std::pair<M4, Key256> finalize(std::string_view uid, const M3& m3);
  ResyncHint hint(std::string_view uid) const;

  const std::map<std::string, GatewayState, std::less<>>& states() const noexcept { return states_; }
  std::map<std::string, GatewayState, std::less<>>& states() noexcept { return states_; }

 private:
  std::map<std::string, GatewayState, std::less<>> states_;
};

}  // namespace hearth::mht
