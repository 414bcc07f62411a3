#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hearth/bytes.hpp"
#include "hearth/primitives.hpp"

// Few-time hash signatures over a forest of one-time key trees. The message
// and an evolving chain value pick which k of the t secrets in the active
// tree are revealed; each accepted signature is folded into the chain, so it
// drives the selection for the next one.
namespace hearth::dors {

struct Params {
  std::uint32_t t = 256;  ///< leaves per tree, power of two
  std::uint32_t k = 16;   ///< revealed leaves per signature
  std::uint32_t f = 8;    ///< trees in the forest
  std::uint32_t r = 8;    ///< signatures per tree

  /// Throws `Errc::InvalidParams` unless k <= t, k*log2(t) <= 256 and r*k <= t/2.
  void validate() const;
  std::uint32_t index_bits() const noexcept;
  /// tree_index (2) + k indices (2 each) + k reveals (32 each).
  std::size_t signature_size() const noexcept { return 2 + std::size_t{k} * 2 + std::size_t{k} * 32; }

  friend bool operator==(const Params&, const Params&) = default;
};

inline constexpr Params kProductionParams{256, 16, 8, 8};

using Reveal = Digest256;

struct SecretKey {
  Params params;
  Key256 forest_seed;
  std::uint32_t active_tree = 0;
  std::uint32_t used_signatures = 0;
  /// Leaf indices already disclosed, per tree.
  std::vector<std::set<std::uint32_t>> revealed;
};

struct PublicKey {
  Params params;
  std::vector<std::vector<Digest256>> leaf_digests;
  std::vector<Digest256> roots;

  bool roots_consistent() const;
  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

/// Both parties advance this identically on every accepted signature.
/// `active_tree`/`tree_uses` let the verifier enforce rotation and budget.
struct ChainState {
  Digest256 value;
  std::uint64_t signature_count = 0;
  std::uint32_t active_tree = 0;
  std::uint32_t tree_uses = 0;

  friend bool operator==(const ChainState&, const ChainState&) = default;
};

struct Signature {
  std::uint16_t tree_index = 0;
  std::vector<std::uint16_t> indices;
  std::vector<Reveal> reveals;

  /// tree_index || k x index || k x reveal, big-endian.
  Bytes encode() const;
  static Signature decode(ByteView wire, const Params& params);
  friend bool operator==(const Signature&, const Signature&) = default;
};

struct KeyPair {
  SecretKey secret;
  PublicKey pub;
  ChainState chain;
};

/// Secret for (tree, leaf): kdf(forest_seed, "leaf", tree || leaf) as u32 BE.
Reveal leaf_secret(const Key256& forest_seed, std::uint32_t tree, std::uint32_t leaf);

/// Deterministic in `seed`. Throws `Errc::InvalidParams`.
KeyPair keygen(const Key256& seed, const Params& params);

ChainState genesis_chain(const PublicKey& pk);

/// hash(message || chain.value) split into k consecutive log2(t)-bit chunks,
/// most significant bit first.
std::vector<std::uint32_t> subset(ByteView message, const ChainState& chain, const Params& params);

/// Chain after accepting `sig`: value = hash(value || encoded sig).
ChainState advance(const ChainState& chain, const Signature& sig);

struct Signed {
  Signature signature;
  ChainState next;
};

/// Signs with the active tree, rotating to the next tree once its budget is
/// spent. Updates `sk` in place. Throws `Errc::ForestExhausted`.
Signed sign(SecretKey& sk, const ChainState& chain, ByteView message);

/// Subset and preimage checks only; ignores rotation and budget rules.
bool verify_material(const PublicKey& pk, const ChainState& chain, ByteView message, const Signature& sig);

/// Full check. Returns the advanced chain iff the signature is accepted; the
/// verifier accepts only the active tree (within budget) or the next one.
std::optional<ChainState> verify(const PublicKey& pk, const ChainState& chain, ByteView message,
                                 const Signature& sig);

// ---- challenge/response handshake -------------------------------------------
//
//   user -> gw   Hello {uid}
//   gw -> user   n_g || chain.value || mac(L, "dors-challenge" || n_g || chain.value)
//   user -> gw   signature over (n_g || uid)
//   gw -> user   confirm = mac(sk, "dors-confirm" || n_g)
//
// sk = kdf(L, "dors-sk", n_g || chain'.value) where L is a pairwise link key
// ratcheted after every accepted run: L = kdf(L, "dors-ratchet", chain'.value).

struct UserPending {
  Nonce128 challenge;
  ChainState next_chain;
  Key256 candidate_key;
};

/// A signed run whose confirmation never arrived; the gateway may or may
/// not have accepted it.
struct UnconfirmedRun {
  ChainState next_chain;
  Key256 next_link_key;
};

struct UserState {
  std::string uid;
  SecretKey secret;
  ChainState chain;
  Key256 link_key;
  std::optional<UserPending> pending;
  std::optional<UnconfirmedRun> unconfirmed;
};

/// The gateway's challenge, announcing its chain value under the link key so
/// a user whose confirmation was lost can catch up.
struct ChallengeMessage {
  Nonce128 nonce;
  Digest256 chain_value;
  Digest256 tag;

  Bytes encode() const;
  static ChallengeMessage decode(ByteView wire);
};

struct GatewayState {
  std::string uid;
  PublicKey pub;
  ChainState chain;
  Key256 link_key;
  std::optional<Nonce128> pending_challenge;
};

std::pair<UserState, GatewayState> make_states(std::string_view uid, const Key256& forest_seed,
                                               const Key256& link_key, const Params& params);

Bytes message_for(const Nonce128& challenge, std::string_view uid);

ChallengeMessage challenge(GatewayState& gw, RandomSource& src);
/// Signs the challenge. The spent leaves are recorded in `user.secret` at
/// once. If the announced chain is the one an unconfirmed run would reach,
/// that run is adopted first. Throws `Errc::AuthFailed` when the challenge
/// does not authenticate against either state.
Signature respond(UserState& user, const ChallengeMessage& challenge);
/// Throws `Errc::AuthFailed`; the chain is left untouched on failure.
std::pair<Digest256, Key256> accept(GatewayState& gw, const Signature& sig);
/// Throws `Errc::ConfirmFailed`; the run is kept as unconfirmed.
Key256 confirm(UserState& user, const Digest256& confirm_tag);
/// Gives up on a pending run (lost message), keeping it as unconfirmed.
void abandon(UserState& user);

Bytes serialize(const UserState& s);
UserState deserialize_user(ByteView b);
Bytes serialize(const GatewayState& s);
GatewayState deserialize_gateway(ByteView b);

}  // namespace hearth::dors
