// Command-line front end: account lifecycle against a persistent gateway,
// plus the simulation benches, attack suite and reports.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "hearth/gateway.hpp"
#include "hearth/tables.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hearth;

namespace {

/// Gateway state on disk: a random key file made at first boot, the sealed
/// user database, sealed protocol state, and one sealed file per client device.
class Home {
 public:
  explicit Home(fs::path dir) : dir_(std::move(dir)) {}

  bool initialized() const { return fs::exists(key_path()); }

  gateway::Gateway boot(RandomSource& src, const std::optional<std::string>& policies_file) {
    if (initialized()) throw Error(Errc::ConfigError, "already initialized: " + dir_.string());
    fs::create_directories(dir_ / "devices");
    const auto key = random_key(src);
    gateway::write_file(key_path(), key.view());
    fs::permissions(key_path(), fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace);
    key_ = key;
    auto policies = gateway::default_policies();
    if (policies_file) {
      const auto text = gateway::read_file(*policies_file);
      policies = gateway::parse_policies_json(std::string(text.begin(), text.end()));
    }
    return gateway::Gateway::first_boot(src, std::move(policies));
  }

  gateway::Gateway load() {
    if (!initialized()) throw Error(Errc::ConfigError, "no gateway at " + dir_.string() + "; run init first");
    auto db = gateway::load_db(dir_ / "users.db", key());
    return gateway::Gateway::deserialize(gateway::open(gateway::read_file(dir_ / "gateway.state"), key()), std::move(db));
  }

  void save(const gateway::Gateway& gw, RandomSource& src) {
    gateway::store_db(gw.db(), key(), dir_ / "users.db", src);
    gateway::write_file(dir_ / "gateway.state", gateway::seal(gw.serialize_state(), key(), src));
  }

  gateway::ClientDevice device(const std::string& uid) {
    const auto path = device_path(uid);
    if (!fs::exists(path)) return gateway::ClientDevice{uid, {}, {}, {}};
    return gateway::ClientDevice::deserialize(gateway::open(gateway::read_file(path), device_key(uid)));
  }

  void save_device(const gateway::ClientDevice& d, RandomSource& src) {
    gateway::write_file(device_path(d.uid), gateway::seal(d.serialize(), device_key(d.uid), src));
  }

 private:
  fs::path key_path() const { return dir_ / "gateway.key"; }
  fs::path device_path(const std::string& uid) const { return dir_ / "devices" / (uid + ".dev"); }

  const Key256& key() {
    if (!key_) key_ = Key256::from_span(gateway::read_file(key_path()));
    return *key_;
  }
  Key256 device_key(const std::string& uid) { return kdf(key(), "device-store", as_bytes(uid)); }

  fs::path dir_;
  std::optional<Key256> key_;
};

struct ContextArgs {
  std::string origin = "local";
  std::string ip = "home-subnet";
  bool bluetooth = false;
  std::uint64_t minutes = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--origin", origin, "local or internet")->capture_default_str();
    cmd->add_option("--ip", ip, "home-subnet, known-external or unknown")->capture_default_str();
    cmd->add_flag("--bluetooth", bluetooth, "the user's phone is in Bluetooth range");
    cmd->add_option("--minutes", minutes, "simulated minutes since the start of the week")->capture_default_str();
  }

  context::ContextSnapshot snapshot() const {
    context::ContextSnapshot s;
    s.origin = context::parse_origin(origin);
    s.ip_class = context::parse_ip_class(ip);
    s.bluetooth_present = bluetooth;
    s.minutes = minutes;
    return s;
  }
};

void print_login(const gateway::LoginResult& r) {
  json j{{"decision", context::to_string(r.decision)},
         {"scheme", context::to_string(r.scheme)},
         {"confidence", r.confidence},
         {"threshold", r.threshold}};
  if (r.session) j["session"] = r.session->id;
  if (r.retry_token) j["retry_token"] = *r.retry_token;
  std::cout << j.dump(2) << "\n";
}

std::string read_text(const std::string& path) {
  const auto b = gateway::read_file(path);
  return {b.begin(), b.end()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smart-home gateway with context-aware authentication"};
  app.require_subcommand(1);

  std::string home_dir = std::getenv("HEARTH_HOME") ? std::getenv("HEARTH_HOME") : ".hearth";
  std::optional<std::uint64_t> seed;
  app.add_option("--home", home_dir, "gateway state directory (env HEARTH_HOME)")->capture_default_str();
  app.add_option("--seed", seed, "deterministic randomness for reproducible runs");

  auto* init = app.add_subcommand("init", "first boot: create the key file and an empty gateway");
  std::optional<std::string> policies_file;
  init->add_option("--policies", policies_file, "device and policy JSON")->check(CLI::ExistingFile);

  auto* reg = app.add_subcommand("register", "register a user; the first owner is activated directly");
  std::string uid, name, password, role = "guest";
  std::uint32_t age = 0;
  bool dors_capable = false, card_capable = false;
  std::optional<std::string> calendar_file;
  reg->add_option("--uid", uid)->required();
  reg->add_option("--password", password)->required();
  reg->add_option("--name", name);
  reg->add_option("--age", age);
  reg->add_option("--role", role, "owner, resident or guest")->capture_default_str();
  reg->add_flag("--dors", dors_capable, "provision one-time signature keys");
  reg->add_flag("--card", card_capable, "issue a smart card for internet access");
  reg->add_option("--calendar", calendar_file, "JSONL weekly intervals")->check(CLI::ExistingFile);

  auto* verify = app.add_subcommand("verify", "owner activates or rejects a pending user");
  std::string owner, target;
  bool reject = false;
  verify->add_option("--owner", owner)->required();
  verify->add_option("--user", target)->required();
  verify->add_flag("--reject", reject);

  auto* login = app.add_subcommand("login", "authenticate and score the login context");
  ContextArgs login_ctx;
  std::optional<std::uint64_t> retry_token;
  login->add_option("--uid", uid)->required();
  login->add_option("--password", password)->required();
  login->add_option("--retry-token", retry_token, "redeem a step-up token");
  login_ctx.add_to(login);

  auto* access = app.add_subcommand("access", "request a device within a session");
  ContextArgs access_ctx;
  std::uint64_t session = 0;
  std::string device;
  access->add_option("--session", session)->required();
  access->add_option("--device", device)->required();
  access_ctx.add_to(access);

  auto* bench = app.add_subcommand("bench", "cost tables 1-2 or the security matrix 3");
  int table = 1;
  std::string format = "text";
  bench->add_option("--table", table)->required()->check(CLI::IsMember({1, 2, 3}));
  bench->add_option("--format", format)->check(CLI::IsMember({"text", "json", "csv"}))->capture_default_str();

  auto* attack = app.add_subcommand("attack", "run one attack against one or all schemes");
  std::string kind, scheme = "all";
  attack->add_option("--kind", kind)->required()->check(CLI::IsMember({"replay", "impersonate", "skd", "stolen"}));
  attack->add_option("--scheme", scheme)->check(CLI::IsMember({"mht", "dors", "dhs", "all"}))->capture_default_str();

  auto* report = app.add_subcommand("report", "all three tables");
  report->add_option("--format", format)->check(CLI::IsMember({"text", "json", "csv"}))->capture_default_str();

  auto* run = app.add_subcommand("run", "run a scenario script on a simulated link");
  std::string script_file;
  std::optional<std::string> config_file;
  bool with_transcript = false;
  run->add_option("--script", script_file)->required()->check(CLI::ExistingFile);
  run->add_option("--config", config_file, "SimConfig JSON")->check(CLI::ExistingFile);
  run->add_flag("--transcript", with_transcript, "include every message");

  CLI11_PARSE(app, argc, argv);

  try {
    auto src = seed ? RandomSource::seeded(*seed) : RandomSource::system();
    const std::uint64_t sim_seed = seed.value_or(1);
    Home home{fs::path(home_dir)};

    if (*init) {
      auto gw = home.boot(src, policies_file);
      home.save(gw, src);
      std::cout << "initialized " << home_dir << "\n";
    } else if (*reg) {
      auto gw = home.load();
      gateway::UserProfile p;
      p.uid = uid;
      p.name = name.empty() ? uid : name;
      p.age = age;
      p.role = gateway::parse_role(role);
      p.dors_capable = dors_capable;
      p.card_capable = card_capable;
      std::vector<context::CalendarInterval> cal;
      if (calendar_file) {
        auto all = context::parse_calendars_jsonl(read_text(*calendar_file));
        if (auto it = all.find(uid); it != all.end()) cal = it->second;
      }
      bool has_owner = false;
      for (const auto& [id, prof] : gw.db().profiles) has_owner |= prof.role == gateway::Role::Owner;
      const bool bootstrap = p.role == gateway::Role::Owner && !has_owner;
      auto dev = bootstrap ? gw.bootstrap_owner(std::move(p), password, std::move(cal), src)
                           : gw.register_user(std::move(p), password, std::move(cal), src);
      home.save_device(dev, src);
      home.save(gw, src);
      std::cout << uid << ": " << gateway::to_string(gw.db().profiles.at(uid).status) << "\n";
    } else if (*verify) {
      auto gw = home.load();
      auto dev = home.device(target);
      const auto status = gw.owner_verify(owner, target, !reject, dev, src);
      home.save_device(dev, src);
      home.save(gw, src);
      std::cout << target << ": " << gateway::to_string(status) << "\n";
    } else if (*login) {
      auto gw = home.load();
      auto dev = home.device(uid);
      DirectChannel direct;
      gateway::LoginResult r;
      try {
        r = retry_token ? gw.step_up(*retry_token, password, login_ctx.snapshot(), dev, src, direct)
                        : gw.login(uid, password, login_ctx.snapshot(), dev, src, direct);
      } catch (const Error&) {
        // A failed handshake still moves protocol state forward.
        home.save_device(dev, src);
        home.save(gw, src);
        throw;
      }
      home.save_device(dev, src);
      home.save(gw, src);
      print_login(r);
    } else if (*access) {
      auto gw = home.load();
      gateway::AccessResult r;
      try {
        r = gw.authorize_device_access(session, device, access_ctx.snapshot());
      } catch (const Error&) {
        home.save(gw, src);
        throw;
      }
      home.save(gw, src);
      std::cout << json{{"decision", context::to_string(r.decision)},
                        {"confidence", r.confidence},
                        {"threshold", r.threshold}}
                       .dump(2)
                << "\n";
    } else if (*bench) {
      if (table == 3) {
        const auto m = harness::build_security_matrix(sim_seed);
        std::cout << (format == "json" ? harness::to_json(m) : format == "csv" ? harness::to_csv(m) : harness::to_text(m));
      } else {
        const auto t = harness::build_cost_table(table, sim_seed);
        std::cout << (format == "json" ? harness::to_json(t) : format == "csv" ? harness::to_csv(t) : harness::to_text(t));
      }
    } else if (*attack) {
      const auto k = harness::parse_attack_kind(kind);
      bool any = false;
      for (auto s : harness::kAllSchemes) {
        if (scheme != "all" && context::parse_scheme(scheme) != s) continue;
        const auto o = harness::run_attack(k, s, sim_seed);
        any |= o.succeeded;
        std::cout << harness::to_string(o.kind) << " " << context::to_string(o.scheme) << " "
                  << (o.succeeded ? "SUCCEEDED" : "failed") << ": " << o.detail << "\n";
      }
      return any ? 2 : 0;
    } else if (*report) {
      const auto t1 = harness::build_cost_table(1, sim_seed);
      const auto t2 = harness::build_cost_table(2, sim_seed);
      const auto m = harness::build_security_matrix(sim_seed);
      if (format == "json") {
        std::cout << json{{"table1", json::parse(harness::to_json(t1))},
                          {"table2", json::parse(harness::to_json(t2))},
                          {"table3", json::parse(harness::to_json(m))}}
                         .dump(2)
                  << "\n";
      } else if (format == "csv") {
        std::cout << harness::to_csv(t1) << "\n" << harness::to_csv(t2) << "\n" << harness::to_csv(m);
      } else {
        std::cout << harness::to_text(t1) << "\n" << harness::to_text(t2) << "\n" << harness::to_text(m);
      }
    } else if (*run) {
      auto config = config_file ? harness::SimConfig::from_json(read_text(*config_file))
                                : harness::SimConfig::defaults(harness::Link::Local, sim_seed);
      const auto r = harness::run_scenario(config, read_text(script_file));
      const auto& m = r.metrics;
      json j{{"scenario", m.scenario}, {"scheme", m.scheme},           {"elapsed_ms", m.elapsed_ms()},
             {"hash", m.hash},         {"mac", m.mac},                 {"kdf", m.kdf},
             {"bytes_on_wire", m.bytes_on_wire}, {"messages", m.messages}, {"storage_bits", m.storage_bits},
             {"outcome", m.outcome}};
      if (with_transcript) j["transcript"] = json::parse(r.transcript.to_json());
      std::cout << j.dump(2) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
