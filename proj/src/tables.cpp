#include "hearth/tables.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <json.hpp>
#include <sstream>

namespace hearth::harness {

namespace {

using nlohmann::json;

constexpr std::uint32_t kPriorHandshakes = 3;

struct RowSpec {
  const char* label;
  std::vector<Factor> factors;
  bool authenticated;
  double ref_internet;
  double ref_local;
};

std::vector<RowSpec> row_specs(int number) {
  using F = Factor;
  if (number == 1) {
    return {{"Proximity (Bluetooth)", {F::Bluetooth}, true, 86, 7},
            {"Calendar access", {F::Calendar}, true, 96, 13},
            {"Network location (IP)", {F::IpLocation}, true, 92, 13},
            {"Credentials", {F::Credentials}, true, 93, 14},
            {"No authentication", {}, false, 83, 6}};
  }
  if (number == 2) {
    return {{"Bluetooth + IP", {F::Bluetooth, F::IpLocation}, true, 83, 11},
            {"Bluetooth + IP + Calendar", {F::Bluetooth, F::IpLocation, F::Calendar}, true, 92, 13},
            {"Bluetooth + IP + Calendar + Credentials",
             {F::Bluetooth, F::IpLocation, F::Calendar, F::Credentials},
             true,
             93,
             13},
            {"No authentication", {}, false, 82, 5}};
  }
  throw Error(Errc::ConfigError, "cost table " + std::to_string(number));
}

std::string fmt_ms(double ms) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(3) << ms;
  return o.str();
}

json metrics_json(const MetricsReport& m) {
  return {{"scheme", m.scheme},       {"elapsed_ms", m.elapsed_ms()}, {"hash", m.hash},
          {"mac", m.mac},             {"kdf", m.kdf},                 {"bytes_on_wire", m.bytes_on_wire},
          {"messages", m.messages},   {"storage_bits", m.storage_bits}, {"outcome", m.outcome}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

MetricsReport measure_costs(std::optional<Scheme> scheme, std::span<const Factor> factors, const SimConfig& config,
                            bool auto_scheme) {
  Scenario s;
  s.scheme = scheme;
  s.auto_scheme = auto_scheme;
  s.factors.assign(factors.begin(), factors.end());
  s.prior_handshakes = kPriorHandshakes;
  s.handshakes = (scheme || auto_scheme) ? 1 : 0;
  s.name = "cost";
  for (auto f : factors) s.name += "-" + std::string(context::to_string(f));
  return run_scenario(config, s).metrics;
}

const CostRow& CostTable::row(std::string_view label) const {
  for (const auto& r : rows) {
    if (r.label == label) return r;
  }
  throw Error(Errc::ConfigError, "no row " + std::string(label));
}

CostTable build_cost_table(int number, std::uint64_t seed) {
  CostTable t;
  t.number = number;
  t.title = number == 1 ? "Access time under individual factors" : "Access time under integrated factors";
  for (const auto& spec : row_specs(number)) {
    CostRow row;
    row.label = spec.label;
    row.factors = spec.factors;
    row.authenticated = spec.authenticated;
    row.reference_internet_ms = spec.ref_internet;
    row.reference_local_ms = spec.ref_local;
    row.internet = measure_costs(std::nullopt, spec.factors, SimConfig::defaults(Link::Internet, seed),
                                 spec.authenticated);
    row.local = measure_costs(std::nullopt, spec.factors, SimConfig::defaults(Link::Local, seed),
                              spec.authenticated);
    row.internet.scenario = row.local.scenario = row.label;
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string to_csv(const CostTable& t) {
  std::ostringstream o;
  o << "parameter,internet_ms,local_ms,internet_scheme,local_scheme,"
       "internet_hash,internet_mac,internet_kdf,internet_bytes,internet_messages,internet_storage_bits,"
       "local_hash,local_mac,local_kdf,local_bytes,local_messages,local_storage_bits,"
       "reference_internet_ms,reference_local_ms\n";
  for (const auto& r : t.rows) {
    o << csv_field(r.label) << ',' << fmt_ms(r.internet.elapsed_ms()) << ',' << fmt_ms(r.local.elapsed_ms()) << ','
      << r.internet.scheme << ',' << r.local.scheme;
    for (const auto* m : {&r.internet, &r.local}) {
      o << ',' << m->hash << ',' << m->mac << ',' << m->kdf << ',' << m->bytes_on_wire << ',' << m->messages << ','
        << m->storage_bits;
    }
    o << ',' << r.reference_internet_ms << ',' << r.reference_local_ms << '\n';
  }
  return o.str();
}

std::string to_text(const CostTable& t) {
  std::ostringstream o;
  o << "Table " << t.number << ": " << t.title << "\n";
  o << std::left << std::setw(42) << "parameter" << std::right << std::setw(12) << "internet ms" << std::setw(10)
    << "local ms" << std::setw(8) << "hash" << std::setw(7) << "mac" << std::setw(8) << "bytes" << std::setw(6)
    << "msgs" << std::setw(14) << "storage bits" << "   published (internet/local)\n";
  for (const auto& r : t.rows) {
    o << std::left << std::setw(42) << r.label << std::right << std::setw(12) << fmt_ms(r.internet.elapsed_ms())
      << std::setw(10) << fmt_ms(r.local.elapsed_ms()) << std::setw(8) << r.local.hash << std::setw(7) << r.local.mac
      << std::setw(8) << r.local.bytes_on_wire << std::setw(6) << r.local.messages << std::setw(14)
      << r.local.storage_bits << "   " << r.reference_internet_ms << "/" << r.reference_local_ms << "\n";
  }
  o << "counts columns are for the local link (" << (t.rows.empty() ? "" : t.rows.front().local.scheme)
    << "); published values are reference only\n";
  return o.str();
}

std::string to_json(const CostTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json factors = json::array();
    for (auto f : r.factors) factors.push_back(std::string(context::to_string(f)));
    rows.push_back({{"parameter", r.label},
                    {"factors", factors},
                    {"internet", metrics_json(r.internet)},
                    {"local", metrics_json(r.local)},
                    {"reference_ms", {{"internet", r.reference_internet_ms}, {"local", r.reference_local_ms}}}});
  }
  return json{{"table", t.number}, {"title", t.title}, {"rows", rows}}.dump(2);
}

std::vector<OrderingCheck> check_orderings(const CostTable& singles, const CostTable& integrated) {
  std::vector<OrderingCheck> out;
  using Column = const MetricsReport CostRow::*;
  const std::pair<const char*, Column> columns[] = {{"internet", &CostRow::internet}, {"local", &CostRow::local}};

  for (const auto* table : {&singles, &integrated}) {
    const auto base = std::find_if(table->rows.begin(), table->rows.end(), [](const auto& r) { return !r.authenticated; });
    if (base == table->rows.end()) {
      out.push_back({"table " + std::to_string(table->number) + " has an unauthenticated row", false, ""});
      continue;
    }
    for (const auto& [name, col] : columns) {
      OrderingCheck c{"table " + std::to_string(table->number) + " " + name + ": no authentication is the minimum",
                      true, {}};
      const auto floor = ((*base).*col).elapsed_us;
      for (const auto& r : table->rows) {
        if (&r != &*base && (r.*col).elapsed_us <= floor) {
          c.holds = false;
          c.detail += r.label + " not above; ";
        }
      }
      if (((*base).*col).hash != 0) {
        c.holds = false;
        c.detail += "unauthenticated row hashed; ";
      }
      if (c.detail.empty()) c.detail = "floor " + fmt_ms(floor / 1000.0) + " ms";
      out.push_back(std::move(c));
    }
  }

  auto single_for = [&](Factor f) -> const CostRow* {
    for (const auto& r : singles.rows) {
      if (r.factors.size() == 1 && r.factors[0] == f) return &r;
    }
    return nullptr;
  };
  const auto unauth = std::find_if(singles.rows.begin(), singles.rows.end(), [](const auto& r) { return !r.authenticated; });
  for (const auto& r : integrated.rows) {
    if (!r.authenticated) continue;
    for (const auto& [name, col] : columns) {
      OrderingCheck c{std::string(name) + ": " + r.label + " within [no authentication, sum of single factors]", true, {}};
      std::uint64_t sum = 0;
      for (auto f : r.factors) {
        const auto* s = single_for(f);
        if (s == nullptr) {
          c.holds = false;
          c.detail = "no single-factor row for " + std::string(context::to_string(f));
          break;
        }
        sum += (s->*col).elapsed_us;
      }
      const auto v = (r.*col).elapsed_us;
      const auto floor = unauth == singles.rows.end() ? 0 : ((*unauth).*col).elapsed_us;
      if (c.detail.empty()) {
        c.holds = v >= floor && v <= sum;
        c.detail = fmt_ms(v / 1000.0) + " ms in [" + fmt_ms(floor / 1000.0) + ", " + fmt_ms(sum / 1000.0) + "]";
      }
      out.push_back(std::move(c));
    }
  }

  for (const auto& [name, col] : columns) {
    OrderingCheck c{std::string(name) + ": single-factor ranking matches the published ranking", true, {}};
    for (const auto& a : singles.rows) {
      for (const auto& b : singles.rows) {
        const double ra = name == std::string_view("internet") ? a.reference_internet_ms : a.reference_local_ms;
        const double rb = name == std::string_view("internet") ? b.reference_internet_ms : b.reference_local_ms;
        if (ra < rb && !((a.*col).elapsed_us < (b.*col).elapsed_us)) {
          c.holds = false;
          c.detail += a.label + " vs " + b.label + "; ";
        }
      }
    }
    if (c.detail.empty()) c.detail = "all pairs with distinct published values agree";
    out.push_back(std::move(c));
  }
  return out;
}

std::string_view to_string(Strength s) noexcept { return s == Strength::Strong ? "Strong" : "Weak"; }

Strength SecurityMatrix::rating(std::string_view property) const {
  bool any = false;
  for (const auto& c : checks) {
    if (c.property != property) continue;
    any = true;
    if (!c.passed) return Strength::Weak;
  }
  return any ? Strength::Strong : Strength::Weak;
}

bool SecurityMatrix::all_attacks_failed() const {
  return std::all_of(attacks.begin(), attacks.end(), [](const auto& a) { return !a.succeeded; });
}

namespace {

/// Flips one byte of the n-th message carried, or drops it.
class FaultChannel final : public Channel {
 public:
  enum class Mode { Flip, Drop };
  FaultChannel(std::size_t target, std::size_t offset, Mode mode) : target_(target), offset_(offset), mode_(mode) {}

  Bytes carry(std::string_view, std::string_view, std::string_view label, Bytes message) override {
    labels.emplace_back(label);
    sizes.push_back(message.size());
    if (count_++ == target_) {
      if (mode_ == Mode::Drop) throw Error(Errc::MessageDropped, std::string(label));
      if (offset_ < message.size()) message[offset_] ^= 0x01;
    }
    return message;
  }

  std::vector<std::string> labels;
  std::vector<std::size_t> sizes;

 private:
  std::size_t target_;
  std::size_t offset_;
  Mode mode_;
  std::size_t count_ = 0;
};

bool keys_agree(const HandshakeKeys& k) { return k.client == k.server; }

SecurityCheck mutation_check(const World& base, RandomSource& src) {
  SecurityCheck c{"Integrity", "one-byte mutation of every handshake message", base.scheme, true, {}};
  FaultChannel probe(SIZE_MAX, 0, FaultChannel::Mode::Flip);
  {
    World w = base;
    w.handshake(src, probe);
  }
  std::size_t runs = 0, rejected = 0, resynced = 0, unrecovered = 0, accepted = 0;
  for (std::size_t i = 0; i < probe.sizes.size(); ++i) {
    for (std::size_t off = 0; off < probe.sizes[i]; ++off) {
      World w = base;
      FaultChannel ch(i, off, FaultChannel::Mode::Flip);
      ++runs;
      try {
        const auto keys = w.handshake(src, ch);
        const bool resync = std::find(ch.labels.begin(), ch.labels.end(), "RESYNC") != ch.labels.end();
        if (keys_agree(keys) && resync) {
          ++resynced;
        } else {
          ++accepted;
        }
      } catch (const Error&) {
        ++rejected;
      }
      try {
        if (!keys_agree(w.handshake(src))) ++unrecovered;
      } catch (const Error&) {
        ++unrecovered;
      }
    }
  }
  c.passed = accepted == 0 && unrecovered == 0;
  c.detail = std::to_string(runs) + " mutated runs: " + std::to_string(rejected) + " rejected, " +
             std::to_string(resynced) + " recovered by authenticated resync, " + std::to_string(accepted) +
             " accepted; next honest run failed " + std::to_string(unrecovered) + " times";
  return c;
}

SecurityCheck availability_check(const World& base, RandomSource& src) {
  SecurityCheck c{"Availability", "recovery after each message is lost", base.scheme, true, {}};
  FaultChannel probe(SIZE_MAX, 0, FaultChannel::Mode::Drop);
  {
    World w = base;
    w.handshake(src, probe);
  }
  std::size_t failed = 0;
  for (std::size_t i = 0; i < probe.sizes.size(); ++i) {
    World w = base;
    FaultChannel ch(i, 0, FaultChannel::Mode::Drop);
    try {
      w.handshake(src, ch);
    } catch (const Error&) {
    }
    for (int round = 0; round < 2; ++round) {
      try {
        if (!keys_agree(w.handshake(src))) ++failed;
      } catch (const Error& e) {
        ++failed;
        c.detail += probe.labels[i] + ": " + e.what() + "; ";
      }
    }
  }
  c.passed = failed == 0;
  c.detail = std::to_string(probe.sizes.size()) + " loss points, " + std::to_string(failed) +
             " failed follow-up runs" + (c.detail.empty() ? "" : " (" + c.detail + ")");
  return c;
}

}  // namespace

SecurityMatrix build_security_matrix(std::uint64_t seed) {
  SecurityMatrix m;
  m.attacks = attack_matrix(seed);
  for (const auto& a : m.attacks) {
    const bool auth = a.kind == AttackKind::Replay || a.kind == AttackKind::Impersonate;
    m.checks.push_back({auth ? "Authentication" : "Integrity", std::string(to_string(a.kind)) + " attack", a.scheme,
                        !a.succeeded, a.detail});
  }
  auto src = RandomSource::seeded(seed);
  for (auto scheme : kAllSchemes) {
    World base = World::create(scheme, src);
    base.handshake(src);
    m.checks.push_back(mutation_check(base, src));
    m.checks.push_back(availability_check(base, src));
  }
  return m;
}

std::string to_text(const SecurityMatrix& m) {
  std::ostringstream o;
  o << "Table 3: security factors\n";
  for (const char* p : {"Authentication", "Integrity", "Availability"})
    o << std::left << std::setw(16) << p << to_string(m.rating(p)) << "\n";
  o << "\nchecks:\n";
  for (const auto& c : m.checks) {
    o << (c.passed ? "  pass  " : "  FAIL  ") << std::left << std::setw(15) << c.property << std::setw(5)
      << context::to_string(c.scheme) << c.method << ": " << c.detail << "\n";
  }
  return o.str();
}

std::string to_csv(const SecurityMatrix& m) {
  std::ostringstream o;
  o << "property,scheme,method,passed,detail\n";
  for (const auto& c : m.checks) {
    o << c.property << ',' << context::to_string(c.scheme) << ',' << csv_field(c.method) << ','
      << (c.passed ? "true" : "false") << ',' << csv_field(c.detail) << '\n';
  }
  return o.str();
}

std::string to_json(const SecurityMatrix& m) {
  json ratings = json::object();
  for (const char* p : {"Authentication", "Integrity", "Availability"}) ratings[p] = std::string(to_string(m.rating(p)));
  json attacks = json::array();
  for (const auto& a : m.attacks) {
    attacks.push_back({{"kind", std::string(to_string(a.kind))},
                       {"scheme", std::string(context::to_string(a.scheme))},
                       {"succeeded", a.succeeded},
                       {"detail", a.detail}});
  }
  json checks = json::array();
  for (const auto& c : m.checks) {
    checks.push_back({{"property", c.property},
                      {"scheme", std::string(context::to_string(c.scheme))},
                      {"method", c.method},
                      {"passed", c.passed},
                      {"detail", c.detail}});
  }
  return json{{"ratings", ratings}, {"attacks", attacks}, {"checks", checks}}.dump(2);
}

}  // namespace hearth::harness
