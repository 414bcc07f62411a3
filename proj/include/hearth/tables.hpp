#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hearth/attacks.hpp"
#include "hearth/simulation.hpp"

// Cost and security tables built from scenario runs and the attack suite.
namespace hearth::harness {

/// One scenario measured on a given link. `scheme` nullopt with `auto_scheme`
/// false means no authentication runs.
MetricsReport measure_costs(std::optional<Scheme> scheme, std::span<const Factor> factors, const SimConfig& config,
                            bool auto_scheme = false);

struct CostRow {
  std::string label;
  std::vector<Factor> factors;
  bool authenticated = true;
  MetricsReport internet;
  MetricsReport local;
  /// Published milliseconds for comparison only.
  double reference_internet_ms = 0;
  double reference_local_ms = 0;
};

struct CostTable {
  int number = 1;
  std::string title;
  std::vector<CostRow> rows;

  const CostRow& row(std::string_view label) const;
};

/// Table 1: single factors; table 2: integrated factors. Both use the
/// automatic scheme (MHT locally, DHS over the internet). Throws
/// `Errc::ConfigError` for any other table number.
CostTable build_cost_table(int number, std::uint64_t seed = 1);

std::string to_csv(const CostTable& t);
std::string to_text(const CostTable& t);
std::string to_json(const CostTable& t);

struct OrderingCheck {
  std::string name;
  bool holds = false;
  std::string detail;
};

/// No-authentication row minimal per column in both tables; each integrated
/// row no more than the sum of its single-factor rows and no less than the
/// unauthenticated row; the single-factor ranking per column agrees with the
/// published ranking where the published values are distinct.
std::vector<OrderingCheck> check_orderings(const CostTable& singles, const CostTable& integrated);

enum class Strength : std::uint8_t { Strong, Weak };
std::string_view to_string(Strength s) noexcept;

struct SecurityCheck {
  std::string property;  ///< "Authentication", "Integrity", "Availability"
  std::string method;
  Scheme scheme = Scheme::Mht;
  bool passed = false;
  std::string detail;
};

struct SecurityMatrix {
  std::vector<AttackOutcome> attacks;
  std::vector<SecurityCheck> checks;

  /// Strong iff every check for the property passed.
  Strength rating(std::string_view property) const;
  bool all_attacks_failed() const;
};

/// Authentication: replay and impersonation. Integrity: session-key
/// disclosure, stolen device, and a one-byte mutation of every message of
/// every handshake. Availability: completion after a lost final message.
SecurityMatrix build_security_matrix(std::uint64_t seed = 1);

std::string to_text(const SecurityMatrix& m);
std::string to_csv(const SecurityMatrix& m);
std::string to_json(const SecurityMatrix& m);

}  // namespace hearth::harness
