#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hearth/context_engine.hpp"
#include "hearth/dhs_auth.hpp"
#include "hearth/dors_auth.hpp"
#include "hearth/handshake.hpp"
#include "hearth/mht_auth.hpp"
#include "hearth/user_database.hpp"

namespace hearth::gateway {

/// What lives on the user's side: protocol credentials issued to one user.
struct ClientDevice {
  std::string uid;
  std::optional<mht::UserState> mht;
  std::optional<dors::UserState> dors;
  std::optional<dhs::SmartCardState> card;

  Bytes serialize() const;
  static ClientDevice deserialize(ByteView b);
};

struct GatewaySession {
  std::uint64_t id = 0;
  std::string uid;
  context::Scheme scheme = context::Scheme::Mht;
  Key256 session_key;
  double confidence = 0;
  context::Origin origin = context::Origin::Local;
  std::set<std::string> device_grants;
  /// Simulated minutes at establishment.
  std::uint64_t established_at = 0;
};

struct LoginResult {
  context::Decision decision = context::Decision::Deny;
  context::Scheme scheme = context::Scheme::Mht;
  double confidence = 0;
  double threshold = 0;
  /// Set on Grant.
  std::optional<GatewaySession> session;
  /// Set on StepUp; redeem once with `Gateway::step_up`.
  std::optional<std::uint64_t> retry_token;
};

struct AccessResult {
  context::Decision decision = context::Decision::Deny;
  double confidence = 0;
  double threshold = 0;
};

/// Orchestrates registration, owner verification, login and per-request
/// device authorization over the user database and the three protocol
/// engines. Every public operation runs under one lock.
class Gateway {
 public:
  Gateway(const Key256& master_secret, AccessPolicies policies, dors::Params dors_params = dors::kProductionParams);

  /// Fresh gateway with random long-term secrets.
  static Gateway first_boot(RandomSource& src, AccessPolicies policies = default_policies(),
                            dors::Params dors_params = dors::kProductionParams);

  Gateway(Gateway&&) noexcept;
  Gateway& operator=(Gateway&&) noexcept;
  ~Gateway();

  /// Installs the first owner directly as active. Throws `Errc::Forbidden`
  /// once any owner exists.
  ClientDevice bootstrap_owner(UserProfile profile, std::string_view password,
                               std::vector<context::CalendarInterval> calendar, RandomSource& src);

  /// Stores the profile as pending with salted credentials. A card-capable
  /// user gets a card now (it needs the password) that only becomes usable
  /// once the owner activates the account. Throws `Errc::AlreadyRegistered`.
  ClientDevice register_user(UserProfile profile, std::string_view password,
                             std::vector<context::CalendarInterval> calendar, RandomSource& src);

  /// Throws `Errc::Forbidden`, `Errc::UnknownUser`, `Errc::InvalidTransition`.
  /// On activation, protocol credentials are added to `device`.
  Status owner_verify(std::string_view owner_uid, std::string_view target_uid, bool activate, ClientDevice& device,
                      RandomSource& src);

  /// Throws `Errc::UnknownUser`, `Errc::NotVerified`, or `Errc::AuthFailed`
  /// when the handshake fails, whatever the confidence.
  LoginResult login(std::string_view uid, std::string_view password, context::ContextSnapshot snapshot,
                    ClientDevice& device, RandomSource& src, Channel& channel);
  LoginResult login(std::string_view uid, std::string_view password, context::ContextSnapshot snapshot,
                    ClientDevice& device, RandomSource& src);

  /// One retry after StepUp with freshly collected context and a new
  /// handshake; a second StepUp becomes Deny. Throws `Errc::UnknownSession`
  /// for an unknown or spent token.
  LoginResult step_up(std::uint64_t token, std::string_view password, context::ContextSnapshot snapshot,
                      ClientDevice& device, RandomSource& src, Channel& channel);

  /// Throws `Errc::UnknownSession`, `Errc::SessionExpired`, `Errc::UnknownDevice`.
  /// Every call on an established session appends one usage record.
  AccessResult authorize_device_access(std::uint64_t session_id, std::string_view device_id,
                                       context::ContextSnapshot snapshot);

  /// Retrains the history model from the usage log; no-op while either label
  /// is missing. Returns whether a model is now available.
  bool retrain();
  void set_model(std::optional<context::NaiveBayesModel> model);
  const context::NaiveBayesModel* model() const noexcept { return model_ ? &*model_ : nullptr; }

  const UserDatabase& db() const noexcept { return db_; }
  UserDatabase& db() noexcept { return db_; }
  const std::map<std::uint64_t, GatewaySession>& sessions() const noexcept { return sessions_; }
  context::SchemeCapabilities capabilities(std::string_view uid) const;
  /// The protocol engines' gateway-side state.
  mht::Gateway& mht() noexcept { return mht_; }
  std::map<std::string, dors::GatewayState, std::less<>>& dors() noexcept { return dors_; }
  dhs::EdgeServerDb& edge() noexcept { return edge_; }
  const dors::Params& dors_params() const noexcept { return dors_params_; }

  /// Everything except the database, which is stored separately.
  Bytes serialize_state() const;
  static Gateway deserialize(ByteView state, UserDatabase db);

 private:
  ClientDevice enroll(UserProfile profile, std::string_view password, std::vector<context::CalendarInterval> calendar,
                      RandomSource& src);
  void provision(const UserProfile& p, ClientDevice& device, RandomSource& src);
  LoginResult login_locked(std::string_view uid, std::string_view password, context::ContextSnapshot snapshot,
                           ClientDevice& device, RandomSource& src, Channel& channel, bool retry);
  /// Least sensitive threshold among devices the user may reach, with its id.
  std::pair<double, std::string> login_threshold(const UserProfile& p, context::Origin origin) const;
  bool device_allowed(const UserProfile& p, context::Origin origin, std::string_view device_id) const;
  void fill_context(const UserProfile& p, context::ContextSnapshot& s) const;

  std::unique_ptr<std::mutex> lock_;
  Key256 master_;
  dors::Params dors_params_;
  UserDatabase db_;
  mht::Gateway mht_;
  std::map<std::string, dors::GatewayState, std::less<>> dors_;
  dhs::HomeServerState home_;
  dhs::EdgeServerDb edge_;
  /// Edge entries of cards issued to users still awaiting verification.
  dhs::EdgeServerDb staged_edge_;
  std::map<std::uint64_t, GatewaySession> sessions_;
  std::map<std::uint64_t, std::string> retry_tokens_;
  std::uint64_t next_id_ = 1;
  std::optional<context::NaiveBayesModel> model_;
};

}  // namespace hearth::gateway
