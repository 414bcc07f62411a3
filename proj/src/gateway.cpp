#include "hearth/gateway.hpp"

#include <bit>
#include <limits>

namespace hearth::gateway {

using context::Decision;
using context::Origin;
using context::Scheme;

namespace {

template <typename T, typename Ser>
void put_optional(WireWriter& w, const std::optional<T>& v, Ser&& ser) {
  w.u8(v.has_value());
  if (v) w.var32(ser(*v));
}

template <typename T, typename De>
std::optional<T> get_optional(WireReader& r, De&& de) {
  if (r.u8() == 0) return std::nullopt;
  return de(r.var32());
}

}  // namespace

Bytes ClientDevice::serialize() const {
  WireWriter w;
  w.str16(uid);
  put_optional(w, mht, [](const auto& s) { return mht::serialize(s); });
  put_optional(w, dors, [](const auto& s) { return dors::serialize(s); });
  put_optional(w, card, [](const auto& s) { return dhs::serialize(s); });
  return std::move(w).bytes();
}

ClientDevice ClientDevice::deserialize(ByteView b) {
  WireReader r(b);
  ClientDevice d;
  d.uid = r.str16();
  d.mht = get_optional<mht::UserState>(r, [](ByteView v) { return mht::deserialize_user(v); });
  d.dors = get_optional<dors::UserState>(r, [](ByteView v) { return dors::deserialize_user(v); });
  d.card = get_optional<dhs::SmartCardState>(r, [](ByteView v) { return dhs::deserialize_card(v); });
  r.expect_done();
  return d;
}

Gateway::Gateway(const Key256& master_secret, AccessPolicies policies, dors::Params dors_params)
    : lock_(std::make_unique<std::mutex>()),
      master_(master_secret),
      dors_params_(dors_params),
      home_{kdf(master_secret, "home", {}), {}} {
  policies.validate();
  dors_params_.validate();
  db_.access_policies = std::move(policies);
}

Gateway Gateway::first_boot(RandomSource& src, AccessPolicies policies, dors::Params dors_params) {
  return Gateway(random_key(src), std::move(policies), dors_params);
}

Gateway::Gateway(Gateway&&) noexcept = default;
Gateway& Gateway::operator=(Gateway&&) noexcept = default;
Gateway::~Gateway() = default;

ClientDevice Gateway::enroll(UserProfile profile, std::string_view password,
                             std::vector<context::CalendarInterval> calendar, RandomSource& src) {
  if (profile.uid.empty()) throw Error(Errc::ConfigError, "empty uid");
  if (db_.profiles.contains(profile.uid)) throw Error(Errc::AlreadyRegistered, profile.uid);
  profile.credential_salt = random_nonce(src);
  profile.credential_verifier = credential_hash(profile.uid, profile.credential_salt, password);

  ClientDevice device;
  device.uid = profile.uid;
  if (profile.card_capable) {
    auto reg = dhs::register_user(home_, profile.uid, password, src);
    device.card = std::move(reg.card);
    staged_edge_.insert(profile.uid, std::move(reg.edge_entry));
  }
  db_.calendars[profile.uid] = std::move(calendar);
  db_.profiles.emplace(profile.uid, std::move(profile));
  return device;
}

void Gateway::provision(const UserProfile& p, ClientDevice& device, RandomSource& src) {
  device.uid = p.uid;
  device.mht = mht_.enroll(p.uid, master_);
  if (p.dors_capable) {
    auto [user, gw] = dors::make_states(p.uid, random_key(src), kdf(master_, "dors-link", as_bytes(p.uid)), dors_params_);
    device.dors = std::move(user);
    dors_.insert_or_assign(p.uid, std::move(gw));
  }
  if (p.card_capable && staged_edge_.contains(p.uid)) {
    edge_.insert(p.uid, staged_edge_.entry(p.uid));
    staged_edge_.erase(p.uid);
  }
}

ClientDevice Gateway::bootstrap_owner(UserProfile profile, std::string_view password,
                                      std::vector<context::CalendarInterval> calendar, RandomSource& src) {
  std::lock_guard guard(*lock_);
  for (const auto& [uid, p] : db_.profiles) {
    if (p.role == Role::Owner) throw Error(Errc::Forbidden, "an owner already exists");
  }
  profile.role = Role::Owner;
  auto device = enroll(std::move(profile), password, std::move(calendar), src);
  auto& stored = db_.profiles.at(device.uid);
  stored.status = Status::Active;
  provision(stored, device, src);
  return device;
}

ClientDevice Gateway::register_user(UserProfile profile, std::string_view password,
                                    std::vector<context::CalendarInterval> calendar, RandomSource& src) {
  std::lock_guard guard(*lock_);
  profile.status = Status::Pending;
  return enroll(std::move(profile), password, std::move(calendar), src);
}

Status Gateway::owner_verify(std::string_view owner_uid, std::string_view target_uid, bool activate,
                             ClientDevice& device, RandomSource& src) {
  std::lock_guard guard(*lock_);
  auto owner = db_.profiles.find(owner_uid);
  if (owner == db_.profiles.end() || owner->second.role != Role::Owner || owner->second.status != Status::Active)
    throw Error(Errc::Forbidden, std::string(owner_uid));
  auto target = db_.profiles.find(target_uid);
  if (target == db_.profiles.end()) throw Error(Errc::UnknownUser, std::string(target_uid));
  auto& p = target->second;
  if (p.status != Status::Pending)
    throw Error(Errc::InvalidTransition, p.uid + " is " + std::string(to_string(p.status)));
  if (activate) {
    provision(p, device, src);
    p.status = Status::Active;
  } else {
    staged_edge_.erase(p.uid);
    p.status = Status::Rejected;
  }
  return p.status;
}

context::SchemeCapabilities Gateway::capabilities(std::string_view uid) const {
  context::SchemeCapabilities caps;
  caps.mht = mht_.contains(uid);
  if (caps.mht) caps.mht_history = mht_.state(uid).txn_counter;
  caps.dors = dors_.contains(uid);
  if (caps.dors) caps.mht_history += dors_.find(uid)->second.chain.signature_count;
  caps.smart_card = edge_.contains(uid);
  return caps;
}

bool Gateway::device_allowed(const UserProfile& p, Origin origin, std::string_view device_id) const {
  if (origin == Origin::Local) return true;
  auto it = db_.access_policies.internet_allowlist.find(p.role);
  return it != db_.access_policies.internet_allowlist.end() && it->second.contains(std::string(device_id));
}

std::pair<double, std::string> Gateway::login_threshold(const UserProfile& p, Origin origin) const {
  std::pair<double, std::string> best{std::numeric_limits<double>::infinity(), {}};
  for (const auto& [id, d] : db_.access_policies.devices) {
    if (device_allowed(p, origin, id) && d.threshold < best.first) best = {d.threshold, id};
  }
  if (best.second.empty()) best.first = db_.access_policies.login_threshold;
  return best;
}

void Gateway::fill_context(const UserProfile& p, context::ContextSnapshot& s) const {
  s.uid = p.uid;
  auto cal = db_.calendars.find(p.uid);
  s.calendar_claims_present = cal != db_.calendars.end() && context::calendar_claims_present(cal->second, s.minutes);
}

LoginResult Gateway::login_locked(std::string_view uid, std::string_view password, context::ContextSnapshot snapshot,
                                  ClientDevice& device, RandomSource& src, Channel& channel, bool retry) {
  auto it = db_.profiles.find(uid);
  if (it == db_.profiles.end()) throw Error(Errc::UnknownUser, std::string(uid));
  const auto& p = it->second;
  if (p.status != Status::Active) throw Error(Errc::NotVerified, p.uid);
  fill_context(p, snapshot);
  snapshot.validate();
  snapshot.credentials_ok = check_credentials(p, password);

  LoginResult out;
  out.scheme = context::select_scheme(snapshot, capabilities(uid));
  HandshakeKeys keys;
  try {
    switch (out.scheme) {
      case Scheme::Mht:
        if (!device.mht) throw Error(Errc::UnknownUser, "device holds no MHT credentials");
        keys = run_mht(*device.mht, mht_, src, channel);
        break;
      case Scheme::Dors:
        if (!device.dors) throw Error(Errc::UnknownUser, "device holds no DORS keys");
        keys = run_dors(*device.dors, dors_.find(uid)->second, src, channel);
        break;
      case Scheme::Dhs:
        if (!device.card) throw Error(Errc::UnknownUser, "no smart card");
        keys = run_dhs(*device.card, edge_, password, src, channel);
        break;
    }
  } catch (const Error& e) {
    throw Error(Errc::AuthFailed, std::string(context::to_string(out.scheme)) + ": " + e.what());
  }
  if (!(keys.client == keys.server)) throw Error(Errc::AuthFailed, "session keys differ");

  const auto [threshold, device_id] = login_threshold(p, snapshot.origin);
  out.threshold = threshold;
  out.confidence =
      context::score_confidence(context::evaluate_all(snapshot, model(), device_id), db_.access_policies.weights);
  out.decision = context::decide_access(out.confidence, {threshold, db_.access_policies.step_up_margin});
  if (retry && out.decision == Decision::StepUp) out.decision = Decision::Deny;

  if (out.decision == Decision::Grant) {
    GatewaySession s;
    s.id = next_id_++;
    s.uid = p.uid;
    s.scheme = out.scheme;
    s.session_key = keys.server;
    s.confidence = out.confidence;
    s.origin = snapshot.origin;
    s.established_at = snapshot.minutes;
    sessions_.emplace(s.id, s);
    out.session = std::move(s);
  } else if (out.decision == Decision::StepUp) {
    out.retry_token = next_id_++;
    retry_tokens_.emplace(*out.retry_token, p.uid);
  }
  return out;
}

LoginResult Gateway::login(std::string_view uid, std::string_view password, context::ContextSnapshot snapshot,
                           ClientDevice& device, RandomSource& src, Channel& channel) {
  std::lock_guard guard(*lock_);
  return login_locked(uid, password, std::move(snapshot), device, src, channel, false);
}

LoginResult Gateway::login(std::string_view uid, std::string_view password, context::ContextSnapshot snapshot,
                           ClientDevice& device, RandomSource& src) {
  DirectChannel direct;
  return login(uid, password, std::move(snapshot), device, src, direct);
}

LoginResult Gateway::step_up(std::uint64_t token, std::string_view password, context::ContextSnapshot snapshot,
                             ClientDevice& device, RandomSource& src, Channel& channel) {
  std::lock_guard guard(*lock_);
  auto it = retry_tokens_.find(token);
  if (it == retry_tokens_.end()) throw Error(Errc::UnknownSession, "retry token");
  const std::string uid = it->second;
  retry_tokens_.erase(it);
  return login_locked(uid, password, std::move(snapshot), device, src, channel, true);
}

AccessResult Gateway::authorize_device_access(std::uint64_t session_id, std::string_view device_id,
                                              context::ContextSnapshot snapshot) {
  std::lock_guard guard(*lock_);
  auto sit = sessions_.find(session_id);
  if (sit == sessions_.end()) throw Error(Errc::UnknownSession, std::to_string(session_id));
  const auto& session = sit->second;
  const auto& p = db_.profiles.at(session.uid);
  fill_context(p, snapshot);
  snapshot.validate();
  snapshot.credentials_ok = true;
  auto log = [&](context::Label label) {
    db_.usage_patterns.push_back(context::record_from_snapshot(snapshot, device_id, label));
  };

  const auto elapsed = snapshot.minutes > session.established_at ? snapshot.minutes - session.established_at : 0;
  if (elapsed > db_.access_policies.session_ttl_minutes) {
    log(context::Label::Anomalous);
    sessions_.erase(sit);
    throw Error(Errc::SessionExpired, std::to_string(elapsed) + " minutes");
  }
  auto dit = db_.access_policies.devices.find(device_id);
  if (dit == db_.access_policies.devices.end()) {
    log(context::Label::Anomalous);
    throw Error(Errc::UnknownDevice, std::string(device_id));
  }

  AccessResult out;
  out.threshold = dit->second.threshold;
  out.confidence =
      context::score_confidence(context::evaluate_all(snapshot, model(), device_id), db_.access_policies.weights);
  out.decision = device_allowed(p, session.origin, device_id)
                     ? context::decide_access(out.confidence, {out.threshold, db_.access_policies.step_up_margin})
                     : Decision::Deny;
  log(out.decision == Decision::Grant ? context::Label::Legitimate : context::Label::Anomalous);
  if (out.decision == Decision::Grant) sit->second.device_grants.insert(std::string(device_id));
  return out;
}

bool Gateway::retrain() {
  std::lock_guard guard(*lock_);
  try {
    model_ = context::train_classifier(db_.usage_patterns);
  } catch (const Error& e) {
    if (e.code() != Errc::DegenerateTraining) throw;
  }
  return model_.has_value();
}

void Gateway::set_model(std::optional<context::NaiveBayesModel> model) {
  std::lock_guard guard(*lock_);
  model_ = std::move(model);
}

Bytes Gateway::serialize_state() const {
  std::lock_guard guard(*lock_);
  WireWriter w;
  w.fixed(master_);
  w.u32(dors_params_.t).u32(dors_params_.k).u32(dors_params_.f).u32(dors_params_.r);
  w.u32(static_cast<std::uint32_t>(mht_.states().size()));
  for (const auto& [uid, s] : mht_.states()) w.var32(mht::serialize(s));
  w.u32(static_cast<std::uint32_t>(dors_.size()));
  for (const auto& [uid, s] : dors_) w.var32(dors::serialize(s));
  w.u32(static_cast<std::uint32_t>(home_.registered.size()));
  for (const auto& uid : home_.registered) w.str16(uid);
  w.var32(edge_.serialize());
  w.var32(staged_edge_.serialize());
  w.u32(static_cast<std::uint32_t>(sessions_.size()));
  for (const auto& [id, s] : sessions_) {
    w.u64(id).str16(s.uid).u8(static_cast<std::uint8_t>(s.scheme)).fixed(s.session_key);
    w.u64(std::bit_cast<std::uint64_t>(s.confidence)).u8(static_cast<std::uint8_t>(s.origin)).u64(s.established_at);
    w.u32(static_cast<std::uint32_t>(s.device_grants.size()));
    for (const auto& d : s.device_grants) w.str16(d);
  }
  w.u32(static_cast<std::uint32_t>(retry_tokens_.size()));
  for (const auto& [token, uid] : retry_tokens_) w.u64(token).str16(uid);
  w.u64(next_id_);
  return std::move(w).bytes();
}

Gateway Gateway::deserialize(ByteView state, UserDatabase db) {
  WireReader r(state);
  const auto master = r.fixed<Key256>();
  dors::Params params;
  params.t = r.u32();
  params.k = r.u32();
  params.f = r.u32();
  params.r = r.u32();
  Gateway g(master, db.access_policies, params);
  g.db_ = std::move(db);
  for (auto n = r.u32(); n > 0; --n) {
    auto s = mht::deserialize_gateway(r.var32());
    g.mht_.states().emplace(s.uid, std::move(s));
  }
  for (auto n = r.u32(); n > 0; --n) {
    auto s = dors::deserialize_gateway(r.var32());
    g.dors_.emplace(s.uid, std::move(s));
  }
  for (auto n = r.u32(); n > 0; --n) g.home_.registered.insert(r.str16());
  g.edge_ = dhs::EdgeServerDb::deserialize(r.var32());
  g.staged_edge_ = dhs::EdgeServerDb::deserialize(r.var32());
  for (auto n = r.u32(); n > 0; --n) {
    GatewaySession s;
    s.id = r.u64();
    s.uid = r.str16();
    const auto scheme = r.u8();
    if (scheme > 2) throw Error(Errc::Malformed, "scheme");
    s.scheme = static_cast<Scheme>(scheme);
    s.session_key = r.fixed<Key256>();
    s.confidence = std::bit_cast<double>(r.u64());
    s.origin = r.u8() == 0 ? Origin::Local : Origin::Internet;
    s.established_at = r.u64();
    for (auto m = r.u32(); m > 0; --m) s.device_grants.insert(r.str16());
    g.sessions_.emplace(s.id, std::move(s));
  }
  for (auto n = r.u32(); n > 0; --n) {
    const auto token = r.u64();
    g.retry_tokens_.emplace(token, r.str16());
  }
  g.next_id_ = r.u64();
  r.expect_done();
  g.retrain();
  return g;
}

}  // namespace hearth::gateway
