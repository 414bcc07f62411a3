#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hearth/bytes.hpp"
#include "hearth/context_engine.hpp"
#include "hearth/primitives.hpp"

namespace hearth::gateway {

enum class Role : std::uint8_t { Owner, Resident, Guest };
enum class Status : std::uint8_t { Pending, Active, Rejected };
enum class DeviceKind : std::uint8_t { Lock, Thermostat, Camera };

std::string_view to_string(Role v) noexcept;
std::string_view to_string(Status v) noexcept;
std::string_view to_string(DeviceKind v) noexcept;
/// Throw `Errc::ConfigError`.
Role parse_role(std::string_view s);
DeviceKind parse_device_kind(std::string_view s);

struct UserProfile {
  std::string uid;
  std::string name;
  std::uint32_t age = 0;
  Role role = Role::Guest;
  Status status = Status::Pending;
  /// Capability flags deciding which protocol credentials are provisioned.
  bool dors_capable = false;
  bool card_capable = false;
  Nonce128 credential_salt;
  /// hash(str16 uid || salt || password)
  Digest256 credential_verifier;

  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

Digest256 credential_hash(std::string_view uid, const Nonce128& salt, std::string_view password);
bool check_credentials(const UserProfile& p, std::string_view password);

struct Device {
  std::string id;
  DeviceKind kind = DeviceKind::Lock;
  double threshold = 0.6;

  friend bool operator==(const Device&, const Device&) = default;
};

/// device_id -> device; thresholds in [0,1].
using DeviceRegistry = std::map<std::string, Device, std::less<>>;

struct AccessPolicies {
  DeviceRegistry devices;
  double step_up_margin = 0.2;
  /// Used at login when the user may reach no device.
  double login_threshold = 0.6;
  std::uint64_t session_ttl_minutes = 30;
  context::FactorWeights weights;
  /// Devices reachable per role for internet-origin sessions.
  std::map<Role, std::set<std::string>> internet_allowlist;

  /// Throws `Errc::ConfigError` or `Errc::InvalidWeights`.
  void validate() const;
  friend bool operator==(const AccessPolicies&, const AccessPolicies&) = default;
};

/// lock 0.9, thermostat 0.5, camera 0.8; internet: owner all, resident
/// thermostat and camera, guest thermostat.
AccessPolicies default_policies();

/// JSON document: {"devices":[{"id","kind","threshold"}], "step_up_margin",
/// "login_threshold", "session_ttl_minutes", "weights":{factor: w},
/// "internet_allowlist":{role:[device ids]}}. Omitted keys keep defaults
/// except "devices", which replaces the registry when present.
AccessPolicies parse_policies_json(std::string_view text);
std::string to_json(const AccessPolicies& p);

struct UserDatabase {
  std::map<std::string, UserProfile, std::less<>> profiles;
  std::map<std::string, std::vector<context::CalendarInterval>, std::less<>> calendars;
  std::vector<context::AccessRecord> usage_patterns;
  AccessPolicies access_policies;

  Bytes serialize() const;
  static UserDatabase deserialize(ByteView b);
  friend bool operator==(const UserDatabase&, const UserDatabase&) = default;
};

inline constexpr std::string_view kDbMagic = "SSHAF1";

/// "SSHAF1" || salt(16) || AES-256-CTR(plaintext) || HMAC-SHA256 over all
/// preceding bytes. Encryption and MAC keys are kdf(db_key, "db-enc"/"db-mac", salt).
Bytes seal(ByteView plaintext, const Key256& db_key, RandomSource& src);
/// Throws `Errc::AuthenticatedDecryptionFailed`.
Bytes open(ByteView sealed, const Key256& db_key);

void store_db(const UserDatabase& db, const Key256& db_key, const std::filesystem::path& path, RandomSource& src);
/// Throws `Errc::AuthenticatedDecryptionFailed`, or `Errc::ConfigError` if the
/// file cannot be read.
UserDatabase load_db(const std::filesystem::path& path, const Key256& db_key);

Bytes read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary and renames over `path`.
void write_file(const std::filesystem::path& path, ByteView data);

}  // namespace hearth::gateway
