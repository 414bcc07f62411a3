#include "hearth/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace hearth::harness {

using nlohmann::json;

std::string_view to_string(Link v) noexcept { return v == Link::Local ? "local" : "internet"; }

Link parse_link(std::string_view s) {
  if (s == "local") return Link::Local;
  if (s == "internet") return Link::Internet;
  throw Error(Errc::ConfigError, "link: " + std::string(s));
}

SimConfig SimConfig::defaults(Link link, std::uint64_t seed) {
  SimConfig c;
  c.link = link;
  std::array<std::uint8_t, 32> raw{};
  for (int i = 0; i < 8; ++i) raw[31 - i] = static_cast<std::uint8_t>(seed >> (8 * i));
  c.seed = Seed256(raw);
  c.local = {1.0, 4.0,
             {{Factor::Credentials, 8.0},
              {Factor::Bluetooth, 1.0},
              {Factor::IpLocation, 7.0},
              {Factor::Calendar, 7.0},
              {Factor::History, 0.5}}};
  c.internet = {10.0, 63.0,
                {{Factor::Credentials, 10.0},
                 {Factor::Bluetooth, 3.0},
                 {Factor::IpLocation, 9.0},
                 {Factor::Calendar, 13.0},
                 {Factor::History, 0.5}}};
  return c;
}

void SimConfig::validate() const {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
  for (const auto* lc : {&local, &internet}) {
    if (!ok(lc->latency_ms) || !ok(lc->request_ms)) throw Error(Errc::ConfigError, "negative or non-finite cost");
    for (auto f : context::kAllFactors) {
      auto it = lc->factor_ms.find(f);
      if (it == lc->factor_ms.end() || !ok(it->second))
        throw Error(Errc::ConfigError, "factor cost for " + std::string(context::to_string(f)));
    }
  }
  if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) throw Error(Errc::ConfigError, "drop_rate outside [0,1]");
}

namespace {

void read_link(const json& j, LinkCosts& lc) {
  if (j.contains("latency_ms")) lc.latency_ms = j.at("latency_ms").get<double>();
  if (j.contains("request_ms")) lc.request_ms = j.at("request_ms").get<double>();
  if (j.contains("factor_ms")) {
    for (const auto& [name, ms] : j.at("factor_ms").items()) lc.factor_ms[context::parse_factor(name)] = ms.get<double>();
  }
}

json write_link(const LinkCosts& lc) {
  json f = json::object();
  for (const auto& [factor, ms] : lc.factor_ms) f[std::string(context::to_string(factor))] = ms;
  return {{"latency_ms", lc.latency_ms}, {"request_ms", lc.request_ms}, {"factor_ms", f}};
}

std::uint64_t to_us(double ms) { return static_cast<std::uint64_t>(std::llround(ms * 1000.0)); }

}  // namespace

SimConfig SimConfig::from_json(std::string_view text) {
  SimConfig c = defaults();
  try {
    const auto j = json::parse(text);
    if (j.contains("seed")) {
      const auto& s = j.at("seed");
      c.seed = s.is_string() ? Seed256::from_hex(s.get<std::string>()) : defaults(Link::Local, s.get<std::uint64_t>()).seed;
    }
    if (j.contains("link")) c.link = parse_link(j.at("link").get<std::string>());
    if (j.contains("drop_rate")) c.drop_rate = j.at("drop_rate").get<double>();
    if (j.contains("local")) read_link(j.at("local"), c.local);
    if (j.contains("internet")) read_link(j.at("internet"), c.internet);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigError) throw;
    throw Error(Errc::ConfigError, e.what());
  }
  c.validate();
  return c;
}

std::string SimConfig::to_json() const {
  json j{{"seed", hearth::to_hex(seed.view())},
         {"link", to_string(link)},
         {"drop_rate", drop_rate},
         {"local", write_link(local)},
         {"internet", write_link(internet)}};
  return j.dump(2);
}

Bytes Transcript::serialize() const {
  WireWriter w;
  w.u32(static_cast<std::uint32_t>(events.size()));
  for (const auto& e : events) {
    w.u64(e.time_us).str16(e.sender).str16(e.receiver).str16(e.label).var32(e.message).str16(e.outcome);
  }
  return std::move(w).bytes();
}

std::string Transcript::to_json() const {
  json arr = json::array();
  for (const auto& e : events) {
    arr.push_back({{"time_us", e.time_us},
                   {"sender", e.sender},
                   {"receiver", e.receiver},
                   {"label", e.label},
                   {"message", hearth::to_hex(e.message)},
                   {"outcome", e.outcome}});
  }
  return arr.dump(2);
}

SimChannel::SimChannel(const SimConfig& config, Transcript& transcript)
    : config_(config),
      transcript_(transcript),
      drops_(RandomSource::seeded(Seed256(kdf(Key256(config.seed.raw()), "drop-stream", {}).raw()))) {}

Bytes SimChannel::carry(std::string_view from, std::string_view to, std::string_view label, Bytes message) {
  now_us_ += to_us(config_.costs().latency_ms);
  ++messages_;
  bytes_ += message.size();
  if (mutate_) mutate_(label, message);
  bool dropped = false;
  if (config_.drop_rate > 0) {
    const auto draw = drops_.bytes(8);
    WireReader r(draw);
    dropped = static_cast<double>(r.u64() >> 11) * 0x1p-53 < config_.drop_rate;
  }
  transcript_.events.push_back(
      {now_us_, std::string(from), std::string(to), std::string(label), message, dropped ? "dropped" : "delivered"});
  if (dropped) throw Error(Errc::MessageDropped, std::string(label));
  return message;
}

void SimChannel::outcome(std::string_view result) {
  if (!transcript_.events.empty() && result != "ok") transcript_.events.back().outcome = std::string(result);
}

void SimChannel::advance(double ms) { now_us_ += to_us(ms); }

World World::create(Scheme scheme, RandomSource& src, const dors::Params& params, std::string uid,
                    std::string password) {
  World w;
  w.scheme = scheme;
  w.uid = std::move(uid);
  w.password = std::move(password);
  switch (scheme) {
    case Scheme::Mht:
      w.mht_gateway.emplace();
      w.mht_user = w.mht_gateway->enroll(w.uid, random_key(src));
      break;
    case Scheme::Dors: {
      const auto forest_seed = random_key(src);
      auto [user, gw] = dors::make_states(w.uid, forest_seed, random_key(src), params);
      w.dors_user = std::move(user);
      w.dors_gateway = std::move(gw);
      break;
    }
    case Scheme::Dhs: {
      auto home = dhs::initialize(src);
      auto reg = dhs::register_user(home, w.uid, w.password, src);
      w.edge.emplace();
      w.edge->insert(w.uid, std::move(reg.edge_entry));
      w.card = std::move(reg.card);
      break;
    }
  }
  return w;
}

HandshakeKeys World::handshake(RandomSource& src, Channel& ch) {
  switch (scheme) {
    case Scheme::Mht: return run_mht(*mht_user, *mht_gateway, src, ch);
    case Scheme::Dors: return run_dors(*dors_user, *dors_gateway, src, ch);
    case Scheme::Dhs: return run_dhs(*card, *edge, password, src, ch);
  }
  throw Error(Errc::NoSchemeAvailable);
}

HandshakeKeys World::handshake(RandomSource& src) {
  DirectChannel direct;
  return handshake(src, direct);
}

Bytes World::user_state() const {
  switch (scheme) {
    case Scheme::Mht: return mht::serialize(*mht_user);
    case Scheme::Dors: return dors::serialize(*dors_user);
    case Scheme::Dhs: return dhs::serialize(*card);
  }
  return {};
}

Bytes World::gateway_state() const {
  switch (scheme) {
    case Scheme::Mht: return mht::serialize(mht_gateway->state(uid));
    case Scheme::Dors: return dors::serialize(*dors_gateway);
    case Scheme::Dhs: return edge->serialize();
  }
  return {};
}

Scenario Scenario::parse(std::string_view json_text) {
  static const std::set<std::string> kKeys{"name", "scheme", "factors", "handshakes", "prior_handshakes", "tamper"};
  Scenario s;
  try {
    const auto j = json::parse(json_text);
    if (!j.is_object()) throw Error(Errc::ScriptError, "script must be an object");
    for (const auto& [key, v] : j.items()) {
      if (!kKeys.contains(key)) throw Error(Errc::ScriptError, "unknown key " + key);
    }
    s.name = j.at("name").get<std::string>();
    const auto scheme = j.value("scheme", std::string("auto"));
    if (scheme == "auto") {
      s.auto_scheme = true;
    } else if (scheme != "none") {
      s.scheme = context::parse_scheme(scheme);
    }
    std::set<Factor> seen;
    for (const auto& f : j.value("factors", json::array())) {
      const auto factor = context::parse_factor(f.get<std::string>());
      if (!seen.insert(factor).second) throw Error(Errc::ScriptError, "duplicate factor");
      s.factors.push_back(factor);
    }
    s.handshakes = j.value("handshakes", 1u);
    s.prior_handshakes = j.value("prior_handshakes", 0u);
    if (scheme == "none" && j.contains("handshakes") && s.handshakes != 0)
      throw Error(Errc::ScriptError, "handshakes requested without a scheme");
    if (j.contains("tamper")) {
      const auto& t = j.at("tamper");
      s.tamper = std::pair{t.at("label").get<std::string>(), t.at("offset").get<std::size_t>()};
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ScriptError, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ScriptError) throw;
    throw Error(Errc::ScriptError, e.what());
  }
  return s;
}

ScenarioResult run_scenario(const SimConfig& config, const Scenario& scenario) {
  try {
    config.validate();
  } catch (const Error& e) {
    throw Error(Errc::ScriptError, e.what());
  }
  std::optional<Scheme> scheme = scenario.scheme;
  if (scenario.auto_scheme) scheme = config.link == Link::Local ? Scheme::Mht : Scheme::Dhs;

  auto src = RandomSource::seeded(config.seed);
  std::optional<World> world;
  if (scheme) {
    world = World::create(*scheme, src);
    for (std::uint32_t i = 0; i < scenario.prior_handshakes; ++i) world->handshake(src);
  }

  ScenarioResult out;
  SimChannel ch(config, out.transcript);
  if (scenario.tamper) {
    ch.set_mutator([target = *scenario.tamper, done = false](std::string_view label, Bytes& m) mutable {
      if (done || label != target.first || m.empty()) return;
      m[target.second % m.size()] ^= 0x01;
      done = true;
    });
  }

  auto& metrics = out.metrics;
  metrics.scenario = scenario.name;
  metrics.scheme = scheme ? std::string(context::to_string(*scheme)) : "none";
  metrics.outcome = "ok";
  const auto& costs = config.costs();
  CounterScope scope;
  try {
    WireWriter request;
    request.str16(scenario.name).u8(static_cast<std::uint8_t>(scenario.factors.size()));
    ch.carry(kUserParty, kGatewayParty, "REQUEST", std::move(request).bytes());
    ch.advance(costs.request_ms);
    for (auto f : scenario.factors) ch.advance(costs.factor_ms.at(f));
    if (world) {
      for (std::uint32_t i = 0; i < scenario.handshakes; ++i) world->handshake(src, ch);
    }
    WireWriter response;
    response.str16(scenario.name).u8(1);
    ch.carry(kGatewayParty, kUserParty, "RESPONSE", std::move(response).bytes());
  } catch (const Error& e) {
    metrics.outcome = std::string(to_string(e.code()));
  }
  const auto counts = scope.delta();
  metrics.hash = counts.hash;
  metrics.mac = counts.mac;
  metrics.kdf = counts.kdf;
  metrics.elapsed_us = ch.now_us();
  metrics.bytes_on_wire = ch.bytes_on_wire();
  metrics.messages = ch.messages();
  if (world) metrics.storage_bits = 8 * (world->user_state().size() + world->gateway_state().size());
  return out;
}

ScenarioResult run_scenario(const SimConfig& config, std::string_view script_json) {
  return run_scenario(config, Scenario::parse(script_json));
}

}  // namespace hearth::harness
