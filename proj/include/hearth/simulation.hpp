#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hearth/context_engine.hpp"
#include "hearth/handshake.hpp"

namespace hearth::harness {

using context::Factor;
using context::Scheme;

enum class Link : std::uint8_t { Local, Internet };

std::string_view to_string(Link v) noexcept;
/// Throws `Errc::ConfigError`.
Link parse_link(std::string_view s);

struct LinkCosts {
  double latency_ms = 1.0;  ///< one-way, per message
  double request_ms = 4.0;  ///< device-side handling of the access request
  std::map<Factor, double> factor_ms;

  friend bool operator==(const LinkCosts&, const LinkCosts&) = default;
};

struct SimConfig {
  Seed256 seed;
  Link link = Link::Local;
  LinkCosts local;
  LinkCosts internet;
  double drop_rate = 0.0;

  /// Local: 1 ms per message, 4 ms request; internet: 10 ms, 63 ms. Factor
  /// collection costs follow the relative order of the measured table.
  static SimConfig defaults(Link link = Link::Local, std::uint64_t seed = 1);

  const LinkCosts& costs() const noexcept { return link == Link::Local ? local : internet; }
  /// Throws `Errc::ConfigError`.
  void validate() const;

  /// {"seed": hex64 | integer, "link", "drop_rate", "local": {...}, "internet": {...}}
  /// where each link block has "latency_ms", "request_ms", "factor_ms": {factor: ms}.
  /// Omitted keys keep their defaults.
  static SimConfig from_json(std::string_view text);
  std::string to_json() const;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct TranscriptEvent {
  std::uint64_t time_us = 0;  ///< simulated arrival time
  std::string sender;
  std::string receiver;
  std::string label;
  Bytes message;
  std::string outcome;  ///< "delivered", "dropped", or a run result

  friend bool operator==(const TranscriptEvent&, const TranscriptEvent&) = default;
};

struct Transcript {
  std::vector<TranscriptEvent> events;

  Bytes serialize() const;
  std::string to_json() const;
  friend bool operator==(const Transcript&, const Transcript&) = default;
};

/// Channel on a simulated clock. Each message costs the link latency, may be
/// dropped (throws `Errc::MessageDropped`), and passes through an optional
/// mutation hook before delivery.
class SimChannel final : public Channel {
 public:
  using Mutator = std::function<void(std::string_view label, Bytes& message)>;

  SimChannel(const SimConfig& config, Transcript& transcript);

  Bytes carry(std::string_view from, std::string_view to, std::string_view label, Bytes message) override;
  void outcome(std::string_view result) override;

  void set_mutator(Mutator m) { mutate_ = std::move(m); }
  void advance(double ms);
  std::uint64_t now_us() const noexcept { return now_us_; }
  std::uint64_t bytes_on_wire() const noexcept { return bytes_; }
  std::uint64_t messages() const noexcept { return messages_; }

 private:
  const SimConfig& config_;
  Transcript& transcript_;
  RandomSource drops_;
  Mutator mutate_;
  std::uint64_t now_us_ = 0;
  std::uint64_t bytes_ = 0;
  std::uint64_t messages_ = 0;
};

/// One user and the gateway-side state of a single scheme.
struct World {
  Scheme scheme = Scheme::Mht;
  std::string uid;
  std::string password;
  std::optional<mht::Gateway> mht_gateway;
  std::optional<mht::UserState> mht_user;
  std::optional<dors::GatewayState> dors_gateway;
  std::optional<dors::UserState> dors_user;
  std::optional<dhs::EdgeServerDb> edge;
  std::optional<dhs::SmartCardState> card;

  static World create(Scheme scheme, RandomSource& src, const dors::Params& params = dors::kProductionParams,
                      std::string uid = "alice", std::string password = "correct horse");

  HandshakeKeys handshake(RandomSource& src, Channel& ch);
  HandshakeKeys handshake(RandomSource& src);
  /// Persisted bytes on the user side (device or card) and the gateway side.
  Bytes user_state() const;
  Bytes gateway_state() const;
};

struct MetricsReport {
  std::string scenario;
  std::string scheme;  ///< "none" when no handshake runs
  std::uint64_t elapsed_us = 0;
  std::uint64_t hash = 0;
  std::uint64_t mac = 0;
  std::uint64_t kdf = 0;
  std::uint64_t bytes_on_wire = 0;
  std::uint64_t messages = 0;
  std::uint64_t storage_bits = 0;
  std::string outcome;

  double elapsed_ms() const noexcept { return static_cast<double>(elapsed_us) / 1000.0; }
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Script document: {"name", "scheme": "mht"|"dors"|"dhs"|"auto"|"none",
/// "factors": [...], "handshakes": n, "prior_handshakes": n,
/// "tamper": {"label", "offset"}}. "auto" is MHT on the local link and DHS
/// over the internet.
struct Scenario {
  std::string name;
  std::optional<Scheme> scheme;  ///< nullopt: no authentication
  bool auto_scheme = false;
  std::vector<Factor> factors;
  std::uint32_t handshakes = 1;
  std::uint32_t prior_handshakes = 0;
  std::optional<std::pair<std::string, std::size_t>> tamper;

  /// Throws `Errc::ScriptError`.
  static Scenario parse(std::string_view json_text);
};

struct ScenarioResult {
  Transcript transcript;
  MetricsReport metrics;
};

/// Deterministic for a fixed config and scenario. Throws `Errc::ScriptError`.
ScenarioResult run_scenario(const SimConfig& config, const Scenario& scenario);
ScenarioResult run_scenario(const SimConfig& config, std::string_view script_json);

}  // namespace hearth::harness
