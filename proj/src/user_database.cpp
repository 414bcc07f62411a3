#include "hearth/user_database.hpp"

#include <bit>
#include <fstream>

#include <openssl/evp.h>

#include <json.hpp>

namespace hearth::gateway {

using nlohmann::json;

std::string_view to_string(Role v) noexcept {
  switch (v) {
    case Role::Owner: return "owner";
    case Role::Resident: return "resident";
    case Role::Guest: return "guest";
  }
  return "?";
}

std::string_view to_string(Status v) noexcept {
  switch (v) {
    case Status::Pending: return "pending";
    case Status::Active: return "active";
    case Status::Rejected: return "rejected";
  }
  return "?";
}

std::string_view to_string(DeviceKind v) noexcept {
  switch (v) {
    case DeviceKind::Lock: return "lock";
    case DeviceKind::Thermostat: return "thermostat";
    case DeviceKind::Camera: return "camera";
  }
  return "?";
}

Role parse_role(std::string_view s) {
  for (auto r : {Role::Owner, Role::Resident, Role::Guest}) {
    if (to_string(r) == s) return r;
  }
  throw Error(Errc::ConfigError, "role: " + std::string(s));
}

DeviceKind parse_device_kind(std::string_view s) {
  for (auto k : {DeviceKind::Lock, DeviceKind::Thermostat, DeviceKind::Camera}) {
    if (to_string(k) == s) return k;
  }
  throw Error(Errc::ConfigError, "device kind: " + std::string(s));
}

Digest256 credential_hash(std::string_view uid, const Nonce128& salt, std::string_view password) {
  WireWriter w;
  w.str16(uid).fixed(salt).raw(as_bytes(password));
  return hash(w.bytes());
}

bool check_credentials(const UserProfile& p, std::string_view password) {
  return credential_hash(p.uid, p.credential_salt, password) == p.credential_verifier;
}

void AccessPolicies::validate() const {
  for (const auto& [id, d] : devices) {
    if (id != d.id) throw Error(Errc::ConfigError, "device id mismatch: " + id);
    if (!(d.threshold >= 0.0 && d.threshold <= 1.0)) throw Error(Errc::ConfigError, "threshold of " + id);
  }
  if (!(step_up_margin >= 0.0 && step_up_margin <= 1.0)) throw Error(Errc::ConfigError, "step_up_margin");
  if (!(login_threshold >= 0.0 && login_threshold <= 1.0)) throw Error(Errc::ConfigError, "login_threshold");
  for (const auto& [role, ids] : internet_allowlist) {
    for (const auto& id : ids) {
      if (!devices.contains(id)) throw Error(Errc::ConfigError, "allowlist names unknown device " + id);
    }
  }
  weights.validate();
}

AccessPolicies default_policies() {
  AccessPolicies p;
  p.devices = {{"front-lock", {"front-lock", DeviceKind::Lock, 0.9}},
               {"thermostat", {"thermostat", DeviceKind::Thermostat, 0.5}},
               {"camera", {"camera", DeviceKind::Camera, 0.8}}};
  p.internet_allowlist = {{Role::Owner, {"front-lock", "thermostat", "camera"}},
                          {Role::Resident, {"thermostat", "camera"}},
                          {Role::Guest, {"thermostat"}}};
  return p;
}

AccessPolicies parse_policies_json(std::string_view text) {
  AccessPolicies p = default_policies();
  try {
    const auto j = json::parse(text);
    if (j.contains("devices")) {
      p.devices.clear();
      for (const auto& d : j.at("devices")) {
        Device dev{d.at("id").get<std::string>(), parse_device_kind(d.at("kind").get<std::string>()),
                   d.at("threshold").get<double>()};
        if (!p.devices.emplace(dev.id, dev).second) throw Error(Errc::ConfigError, "duplicate device " + dev.id);
      }
      // Keep only allowlist entries that still name a device.
      for (auto& [role, ids] : p.internet_allowlist) std::erase_if(ids, [&](const auto& id) { return !p.devices.contains(id); });
    }
    if (j.contains("step_up_margin")) p.step_up_margin = j.at("step_up_margin").get<double>();
    if (j.contains("login_threshold")) p.login_threshold = j.at("login_threshold").get<double>();
    if (j.contains("session_ttl_minutes")) p.session_ttl_minutes = j.at("session_ttl_minutes").get<std::uint64_t>();
    if (j.contains("weights")) {
      for (const auto& [name, w] : j.at("weights").items()) {
        switch (context::parse_factor(name)) {
          case context::Factor::Credentials: p.weights.credentials = w.get<double>(); break;
          case context::Factor::Bluetooth: p.weights.bluetooth = w.get<double>(); break;
          case context::Factor::IpLocation: p.weights.ip_location = w.get<double>(); break;
          case context::Factor::Calendar: p.weights.calendar = w.get<double>(); break;
          case context::Factor::History: p.weights.history = w.get<double>(); break;
        }
      }
    }
    if (j.contains("internet_allowlist")) {
      p.internet_allowlist.clear();
      for (const auto& [role, ids] : j.at("internet_allowlist").items()) {
        auto& set = p.internet_allowlist[parse_role(role)];
        for (const auto& id : ids) set.insert(id.get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, e.what());
  }
  p.validate();
  return p;
}

std::string to_json(const AccessPolicies& p) {
  json devices = json::array();
  for (const auto& [id, d] : p.devices) devices.push_back({{"id", id}, {"kind", to_string(d.kind)}, {"threshold", d.threshold}});
  json weights = json::object();
  for (auto f : context::kAllFactors) weights[std::string(context::to_string(f))] = p.weights.weight(f);
  json allow = json::object();
  for (const auto& [role, ids] : p.internet_allowlist) allow[std::string(to_string(role))] = ids;
  json j{{"devices", devices},
         {"step_up_margin", p.step_up_margin},
         {"login_threshold", p.login_threshold},
         {"session_ttl_minutes", p.session_ttl_minutes},
         {"weights", weights},
         {"internet_allowlist", allow}};
  return j.dump(2);
}

namespace {

void put_double(WireWriter& w, double v) { w.u64(std::bit_cast<std::uint64_t>(v)); }
double get_double(WireReader& r) { return std::bit_cast<double>(r.u64()); }

template <typename E>
E get_enum(WireReader& r, std::uint8_t count) {
  const auto v = r.u8();
  if (v >= count) throw Error(Errc::Malformed, "enum value out of range");
  return static_cast<E>(v);
}

void put_profile(WireWriter& w, const UserProfile& p) {
  w.str16(p.uid).str16(p.name).u32(p.age).u8(static_cast<std::uint8_t>(p.role));
  w.u8(static_cast<std::uint8_t>(p.status)).u8(p.dors_capable).u8(p.card_capable);
  w.fixed(p.credential_salt).fixed(p.credential_verifier);
}

UserProfile get_profile(WireReader& r) {
  UserProfile p;
  p.uid = r.str16();
  p.name = r.str16();
  p.age = r.u32();
  p.role = get_enum<Role>(r, 3);
  p.status = get_enum<Status>(r, 3);
  p.dors_capable = r.u8() != 0;
  p.card_capable = r.u8() != 0;
  p.credential_salt = r.fixed<Nonce128>();
  p.credential_verifier = r.fixed<Digest256>();
  return p;
}

void put_policies(WireWriter& w, const AccessPolicies& p) {
  w.u32(static_cast<std::uint32_t>(p.devices.size()));
  for (const auto& [id, d] : p.devices) {
    w.str16(id).u8(static_cast<std::uint8_t>(d.kind));
    put_double(w, d.threshold);
  }
  put_double(w, p.step_up_margin);
  put_double(w, p.login_threshold);
  w.u64(p.session_ttl_minutes);
  for (auto f : context::kAllFactors) put_double(w, p.weights.weight(f));
  w.u8(static_cast<std::uint8_t>(p.internet_allowlist.size()));
  for (const auto& [role, ids] : p.internet_allowlist) {
    w.u8(static_cast<std::uint8_t>(role)).u32(static_cast<std::uint32_t>(ids.size()));
    for (const auto& id : ids) w.str16(id);
  }
}

AccessPolicies get_policies(WireReader& r) {
  AccessPolicies p;
  for (auto n = r.u32(); n > 0; --n) {
    Device d;
    d.id = r.str16();
    d.kind = get_enum<DeviceKind>(r, 3);
    d.threshold = get_double(r);
    p.devices.emplace(d.id, d);
  }
  p.step_up_margin = get_double(r);
  p.login_threshold = get_double(r);
  p.session_ttl_minutes = r.u64();
  p.weights.credentials = get_double(r);
  p.weights.bluetooth = get_double(r);
  p.weights.ip_location = get_double(r);
  p.weights.calendar = get_double(r);
  p.weights.history = get_double(r);
  for (auto roles = r.u8(); roles > 0; --roles) {
    auto& ids = p.internet_allowlist[get_enum<Role>(r, 3)];
    for (auto n = r.u32(); n > 0; --n) ids.insert(r.str16());
  }
  return p;
}

}  // namespace

Bytes UserDatabase::serialize() const {
  WireWriter w;
  w.u32(static_cast<std::uint32_t>(profiles.size()));
  for (const auto& [uid, p] : profiles) put_profile(w, p);
  w.u32(static_cast<std::uint32_t>(calendars.size()));
  for (const auto& [uid, ivs] : calendars) {
    w.str16(uid).u32(static_cast<std::uint32_t>(ivs.size()));
    for (const auto& iv : ivs) w.u32(iv.start).u32(iv.end);
  }
  w.u32(static_cast<std::uint32_t>(usage_patterns.size()));
  for (const auto& rec : usage_patterns) {
    w.str16(rec.uid).u8(static_cast<std::uint8_t>(rec.hour_bucket)).u8(static_cast<std::uint8_t>(rec.weekday));
    w.u8(static_cast<std::uint8_t>(rec.ip_class)).str16(rec.device_id).u8(static_cast<std::uint8_t>(rec.label));
  }
  put_policies(w, access_policies);
  return std::move(w).bytes();
}

UserDatabase UserDatabase::deserialize(ByteView b) {
  WireReader r(b);
  UserDatabase db;
  for (auto n = r.u32(); n > 0; --n) {
    auto p = get_profile(r);
    db.profiles.emplace(p.uid, std::move(p));
  }
  for (auto n = r.u32(); n > 0; --n) {
    auto& ivs = db.calendars[r.str16()];
    for (auto m = r.u32(); m > 0; --m) {
      const auto start = r.u32();
      ivs.push_back({start, r.u32()});
    }
  }
  for (auto n = r.u32(); n > 0; --n) {
    context::AccessRecord rec;
    rec.uid = r.str16();
    rec.hour_bucket = r.u8();
    rec.weekday = r.u8();
    rec.ip_class = get_enum<context::IpClass>(r, context::kIpClasses);
    rec.device_id = r.str16();
    rec.label = get_enum<context::Label>(r, 2);
    if (rec.hour_bucket >= context::kHourBuckets || rec.weekday >= context::kWeekdays)
      throw Error(Errc::Malformed, "usage record out of range");
    db.usage_patterns.push_back(std::move(rec));
  }
  db.access_policies = get_policies(r);
  r.expect_done();
  return db;
}

namespace {

constexpr std::size_t kSaltSize = 16;
constexpr std::size_t kTagSize = 32;

Bytes aes_ctr(const Key256& key, ByteView in) {
  std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free);
  const std::array<std::uint8_t, 16> iv{};
  Bytes out(in.size());
  int len = 0;
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_ctr(), nullptr, key.raw().data(), iv.data()) != 1 ||
      EVP_EncryptUpdate(ctx.get(), out.data(), &len, in.data(), static_cast<int>(in.size())) != 1)
    throw std::runtime_error("AES-256-CTR failed");
  return out;
}

}  // namespace

Bytes seal(ByteView plaintext, const Key256& db_key, RandomSource& src) {
  const auto salt = random_nonce(src);
  const auto enc_key = kdf(db_key, "db-enc", salt.view());
  const auto mac_key = kdf(db_key, "db-mac", salt.view());
  Bytes out = concat({as_bytes(kDbMagic), salt.view(), aes_ctr(enc_key, plaintext)});
  const auto tag = mac(mac_key, out);
  out.insert(out.end(), tag.raw().begin(), tag.raw().end());
  return out;
}

Bytes open(ByteView sealed, const Key256& db_key) {
  const std::size_t header = kDbMagic.size() + kSaltSize;
  if (sealed.size() < header + kTagSize || !equal_bytes(sealed.first(kDbMagic.size()), as_bytes(kDbMagic)))
    throw Error(Errc::AuthenticatedDecryptionFailed, "not a sealed database");
  const auto salt = sealed.subspan(kDbMagic.size(), kSaltSize);
  const auto body = sealed.first(sealed.size() - kTagSize);
  const auto mac_key = kdf(db_key, "db-mac", salt);
  if (!equal_bytes(mac(mac_key, body).view(), sealed.last(kTagSize)))
    throw Error(Errc::AuthenticatedDecryptionFailed);
  return aes_ctr(kdf(db_key, "db-enc", salt), body.subspan(header));
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ConfigError, "cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, ByteView data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::ConfigError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(Errc::ConfigError, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void store_db(const UserDatabase& db, const Key256& db_key, const std::filesystem::path& path, RandomSource& src) {
  write_file(path, seal(db.serialize(), db_key, src));
}

UserDatabase load_db(const std::filesystem::path& path, const Key256& db_key) {
  const auto plain = open(read_file(path), db_key);
  try {
    return UserDatabase::deserialize(plain);
  } catch (const Error&) {
    throw Error(Errc::AuthenticatedDecryptionFailed, "sealed payload does not parse");
  }
}

}  // namespace hearth::gateway
