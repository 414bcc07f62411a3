#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hearth/simulation.hpp"

namespace hearth::harness {

enum class Capability : std::uint8_t { RecordReplay, Inject, KnowsPublicKeys, HoldsStolenDeviceState, HoldsOneSessionKey };

struct AdversaryModel {
  std::set<Capability> capabilities;

  bool has(Capability c) const { return capabilities.contains(c); }
  /// Network attacker: records, replays and injects, and knows public keys.
  static AdversaryModel network();
};

enum class AttackKind : std::uint8_t { Replay, Impersonate, SessionKeyDisclosure, StolenDevice };

inline constexpr std::array<AttackKind, 4> kAllAttacks{AttackKind::Replay, AttackKind::Impersonate,
                                                       AttackKind::SessionKeyDisclosure, AttackKind::StolenDevice};
inline constexpr std::array<Scheme, 3> kAllSchemes{Scheme::Mht, Scheme::Dors, Scheme::Dhs};

/// "replay", "impersonate", "skd", "stolen".
std::string_view to_string(AttackKind k) noexcept;
/// Throws `Errc::ConfigError`.
AttackKind parse_attack_kind(std::string_view s);

struct AttackOutcome {
  AttackKind kind = AttackKind::Replay;
  Scheme scheme = Scheme::Mht;
  bool succeeded = false;
  std::string detail;
};

struct RecordedSession {
  std::vector<TranscriptEvent> events;
  HandshakeKeys keys;
};

/// Runs `n` honest handshakes on `world`, recording each on a simulated channel.
std::vector<RecordedSession> record_sessions(World& world, RandomSource& src, std::size_t n);

/// Feeds the client messages of `recorded` to the gateway side of `target`,
/// both as a full run against a fresh challenge and one message at a time.
/// Succeeds if the gateway completes any run.
AttackOutcome attack_replay(World& target, const std::vector<TranscriptEvent>& recorded, RandomSource& src);
/// Records one handshake, then replays it against the gateway as it is
/// afterwards and against a copy rolled back to before the handshake.
AttackOutcome attack_replay(Scheme scheme, std::uint64_t seed = 1);

/// Best-effort forgeries from public data and recorded transcripts, in both
/// directions (posing as the user and posing as the gateway or edge).
AttackOutcome attack_impersonate(const AdversaryModel& adversary, Scheme scheme, std::uint64_t seed = 1,
                                 const dors::Params& params = dors::kProductionParams);

/// Completes `sessions` handshakes, hands session `disclosed` (0-based) to
/// the adversary, and checks that no other session key equals it or is kdf
/// of it under any protocol label and any salt assembled from transcripts.
AttackOutcome attack_session_key_disclosure(Scheme scheme, std::size_t sessions = 3, std::size_t disclosed = 1,
                                            std::uint64_t seed = 1);

/// Captures user-side and gateway-side persisted state after `sessions`
/// handshakes (optionally in the middle of one more) and tries to recover
/// the past session keys: scan for persisted nonces and keys, then apply each
/// scheme's session-key derivation to every 32-byte window of the capture.
/// For DHS also tries a fresh login from the captured edge database.
AttackOutcome attack_stolen_device(Scheme scheme, std::size_t sessions = 3, bool capture_pending = false,
                                   std::uint64_t seed = 1);

AttackOutcome run_attack(AttackKind kind, Scheme scheme, std::uint64_t seed = 1);
/// Every attack against every scheme at production parameters.
std::vector<AttackOutcome> attack_matrix(std::uint64_t seed = 1);

/// A signature for `message` built only from reveals in `observed`, if
/// they cover the required subset.
std::optional<dors::Signature> forge_from_observed(const dors::PublicKey& pk, const dors::ChainState& chain,
                                                   ByteView message, std::span<const dors::Signature> observed);

struct ForgeryExperiment {
  dors::Params params;
  std::size_t trials = 0;
  std::size_t successes = 0;
  /// Leaves revealed by the observed signature.
  std::size_t revealed = 0;
  double rate = 0;
  double bound = 0;  ///< (k/t)^k
  double sigma = 0;  ///< sqrt(bound (1 - bound) / trials)

  double limit() const noexcept { return bound + 3 * sigma; }
  bool within_bound() const noexcept { return rate <= limit(); }
};

/// Adversary sees one signature, then tries to sign `trials` fresh random
/// challenges; a forgery counts if its material verifies (subset and
/// preimages), regardless of the tree budget.
ForgeryExperiment dors_forgery_experiment(const dors::Params& params, std::size_t trials, std::uint64_t seed);

}  // namespace hearth::harness
