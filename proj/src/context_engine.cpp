#include "hearth/context_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace hearth::context {

using nlohmann::json;

std::string_view to_string(Origin v) noexcept { return v == Origin::Local ? "local" : "internet"; }

std::string_view to_string(IpClass v) noexcept {
  switch (v) {
    case IpClass::HomeSubnet: return "home-subnet";
    case IpClass::KnownExternal: return "known-external";
    case IpClass::Unknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(Factor v) noexcept {
  switch (v) {
    case Factor::Credentials: return "credentials";
    case Factor::Bluetooth: return "bluetooth";
    case Factor::IpLocation: return "ip_location";
    case Factor::Calendar: return "calendar";
    case Factor::History: return "history";
  }
  return "?";
}

std::string_view to_string(Label v) noexcept { return v == Label::Legitimate ? "legitimate" : "anomalous"; }

std::string_view to_string(Decision v) noexcept {
  switch (v) {
    case Decision::Grant: return "grant";
    case Decision::StepUp: return "step-up";
    case Decision::Deny: return "deny";
  }
  return "?";
}

std::string_view to_string(Scheme v) noexcept {
  switch (v) {
    case Scheme::Mht: return "mht";
    case Scheme::Dors: return "dors";
    case Scheme::Dhs: return "dhs";
  }
  return "?";
}

Factor parse_factor(std::string_view name) {
  for (auto f : kAllFactors) {
    if (to_string(f) == name) return f;
  }
  throw Error(Errc::UnknownFactor, std::string(name));
}

IpClass parse_ip_class(std::string_view name) {
  for (auto v : {IpClass::HomeSubnet, IpClass::KnownExternal, IpClass::Unknown}) {
    if (to_string(v) == name) return v;
  }
  throw Error(Errc::ConfigError, "ip_class: " + std::string(name));
}

Origin parse_origin(std::string_view name) {
  if (name == "local") return Origin::Local;
  if (name == "internet") return Origin::Internet;
  throw Error(Errc::ConfigError, "origin: " + std::string(name));
}

Scheme parse_scheme(std::string_view name) {
  for (auto v : {Scheme::Mht, Scheme::Dors, Scheme::Dhs}) {
    if (to_string(v) == name) return v;
  }
  throw Error(Errc::ConfigError, "scheme: " + std::string(name));
}

void ContextSnapshot::validate() const {
  if (origin == Origin::Internet && bluetooth_present)
    throw Error(Errc::ConfigError, "bluetooth proximity reported for an internet-origin request");
}

void FactorWeights::validate() const {
  double sum = 0;
  for (auto f : kAllFactors) {
    const double w = weight(f);
    if (!(w >= 0.0 && w <= 1.0)) throw Error(Errc::InvalidWeights, std::string(to_string(f)));
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(Errc::InvalidWeights, "weights sum to " + std::to_string(sum));
}

double FactorWeights::weight(Factor f) const noexcept {
  switch (f) {
    case Factor::Credentials: return credentials;
    case Factor::Bluetooth: return bluetooth;
    case Factor::IpLocation: return ip_location;
    case Factor::Calendar: return calendar;
    case Factor::History: return history;
  }
  return 0;
}

int hour_bucket_of(std::uint64_t minutes) noexcept { return static_cast<int>((minutes / 60) % 24 / 4); }

int weekday_of(std::uint64_t minutes) noexcept { return static_cast<int>((minutes / (24 * 60)) % 7); }

AccessRecord record_from_snapshot(const ContextSnapshot& s, std::string_view device_id, Label label) {
  return {s.uid, hour_bucket_of(s.minutes), weekday_of(s.minutes), s.ip_class, std::string(device_id), label};
}

double NaiveBayesModel::p_hour(Label c, int bucket) const { return hour_.at(index(c)).at(bucket); }

double NaiveBayesModel::p_weekday(Label c, int day) const { return weekday_.at(index(c)).at(day); }

double NaiveBayesModel::p_ip(Label c, IpClass ip) const { return ip_.at(index(c)).at(static_cast<std::size_t>(ip)); }

double NaiveBayesModel::p_device(Label c, std::string_view device) const {
  auto it = devices_.find(device);
  return it == devices_.end() ? unseen_device_[index(c)] : it->second[index(c)];
}

double NaiveBayesModel::posterior_legitimate(const AccessRecord& r) const {
  std::array<double, 2> log_joint{};
  for (auto c : {Label::Legitimate, Label::Anomalous}) {
    log_joint[index(c)] = std::log(prior(c)) + std::log(p_hour(c, r.hour_bucket)) +
                          std::log(p_weekday(c, r.weekday)) + std::log(p_ip(c, r.ip_class)) +
                          std::log(p_device(c, r.device_id));
  }
  // P(L) = 1 / (1 + exp(logA - logL)).
  return 1.0 / (1.0 + std::exp(log_joint[1] - log_joint[0]));
}

NaiveBayesModel train_classifier(std::span<const AccessRecord> records) {
  std::array<double, 2> n{};
  std::array<std::array<double, kHourBuckets>, 2> hour{};
  std::array<std::array<double, kWeekdays>, 2> day{};
  std::array<std::array<double, kIpClasses>, 2> ip{};
  std::map<std::string, std::array<double, 2>, std::less<>> dev;
  for (const auto& r : records) {
    if (r.hour_bucket < 0 || r.hour_bucket >= kHourBuckets || r.weekday < 0 || r.weekday >= kWeekdays)
      throw Error(Errc::ConfigError, "record feature out of range");
    const auto c = NaiveBayesModel::index(r.label);
    ++n[c];
    ++hour[c][r.hour_bucket];
    ++day[c][r.weekday];
    ++ip[c][static_cast<std::size_t>(r.ip_class)];
    ++dev[r.device_id][c];
  }
  if (n[0] == 0 || n[1] == 0) throw Error(Errc::DegenerateTraining);

  NaiveBayesModel m;
  const double total = n[0] + n[1];
  const double device_cats = static_cast<double>(dev.size() + 1);
  for (std::size_t c = 0; c < 2; ++c) {
    m.priors_[c] = n[c] / total;
    for (int b = 0; b < kHourBuckets; ++b) m.hour_[c][b] = (hour[c][b] + 1) / (n[c] + kHourBuckets);
    for (int d = 0; d < kWeekdays; ++d) m.weekday_[c][d] = (day[c][d] + 1) / (n[c] + kWeekdays);
    for (int i = 0; i < kIpClasses; ++i) m.ip_[c][i] = (ip[c][i] + 1) / (n[c] + kIpClasses);
    for (const auto& [id, counts] : dev) m.devices_[id][c] = (counts[c] + 1) / (n[c] + device_cats);
    m.unseen_device_[c] = 1 / (n[c] + device_cats);
  }
  return m;
}

double classify_access(const NaiveBayesModel& model, const AccessRecord& record) {
  return model.posterior_legitimate(record);
}

double evaluate_factor(const ContextSnapshot& s, Factor f, const NaiveBayesModel* model,
                       std::string_view device_id) {
  switch (f) {
    case Factor::Credentials: return s.credentials_ok ? 1.0 : 0.0;
    case Factor::Bluetooth: return s.bluetooth_present ? 1.0 : 0.0;
    case Factor::Calendar: return s.calendar_claims_present ? 1.0 : 0.0;
    case Factor::IpLocation:
      switch (s.ip_class) {
        case IpClass::HomeSubnet: return 1.0;
        case IpClass::KnownExternal: return 0.5;
        case IpClass::Unknown: return 0.0;
      }
      return 0.0;
    case Factor::History:
      if (model == nullptr) return 0.5;
      return classify_access(*model, record_from_snapshot(s, device_id, Label::Legitimate));
  }
  throw Error(Errc::UnknownFactor);
}

double evaluate_factor(const ContextSnapshot& s, std::string_view factor, const NaiveBayesModel* model,
                       std::string_view device_id) {
  return evaluate_factor(s, parse_factor(factor), model, device_id);
}

FactorScores evaluate_all(const ContextSnapshot& s, const NaiveBayesModel* model, std::string_view device_id) {
  FactorScores out;
  for (auto f : kAllFactors) out[f] = evaluate_factor(s, f, model, device_id);
  return out;
}

double score_confidence(const FactorScores& scores, const FactorWeights& weights) {
  weights.validate();
  double sum = 0;
  for (auto f : kAllFactors) sum += weights.weight(f) * scores[f];
  return std::clamp(sum, 0.0, 1.0);
}

Decision decide_access(double confidence, const AccessPolicy& policy) noexcept {
  if (confidence >= policy.threshold) return Decision::Grant;
  if (confidence >= policy.threshold - policy.step_up_margin) return Decision::StepUp;
  return Decision::Deny;
}

Scheme select_scheme(const ContextSnapshot& s, const SchemeCapabilities& caps) {
  if (s.origin == Origin::Internet && caps.smart_card) return Scheme::Dhs;
  if (s.origin == Origin::Local && caps.dors && caps.mht_history == 0) return Scheme::Dors;
  if (caps.mht) return Scheme::Mht;
  if (caps.dors) return Scheme::Dors;
  throw Error(Errc::NoSchemeAvailable, s.uid);
}

bool calendar_claims_present(std::span<const CalendarInterval> calendar, std::uint64_t minutes) noexcept {
  const auto m = static_cast<std::uint32_t>(minutes % kMinutesPerWeek);
  for (const auto& iv : calendar) {
    if (iv.start <= iv.end ? (m >= iv.start && m < iv.end) : (m >= iv.start || m < iv.end)) return true;
  }
  return false;
}

namespace {

template <typename F>
void for_each_json_line(std::string_view text, F&& fn) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(Errc::ConfigError, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

Label parse_label(std::string_view s) {
  if (s == "legitimate") return Label::Legitimate;
  if (s == "anomalous") return Label::Anomalous;
  throw Error(Errc::ConfigError, "label: " + std::string(s));
}

}  // namespace

std::vector<AccessRecord> parse_records_jsonl(std::string_view text) {
  std::vector<AccessRecord> out;
  for_each_json_line(text, [&](const json& j) {
    AccessRecord r;
    r.uid = j.at("uid").get<std::string>();
    r.hour_bucket = j.at("hour_bucket").get<int>();
    r.weekday = j.at("weekday").get<int>();
    r.ip_class = parse_ip_class(j.at("ip_class").get<std::string>());
    r.device_id = j.at("device_id").get<std::string>();
    r.label = parse_label(j.at("label").get<std::string>());
    if (r.hour_bucket < 0 || r.hour_bucket >= kHourBuckets || r.weekday < 0 || r.weekday >= kWeekdays)
      throw Error(Errc::ConfigError, "record feature out of range");
    out.push_back(std::move(r));
  });
  return out;
}

std::string to_jsonl(std::span<const AccessRecord> records) {
  std::string out;
  for (const auto& r : records) {
    json j{{"uid", r.uid},
           {"hour_bucket", r.hour_bucket},
           {"weekday", r.weekday},
           {"ip_class", to_string(r.ip_class)},
           {"device_id", r.device_id},
           {"label", to_string(r.label)}};
    out += j.dump() + "\n";
  }
  return out;
}

std::map<std::string, std::vector<CalendarInterval>> parse_calendars_jsonl(std::string_view text) {
  std::map<std::string, std::vector<CalendarInterval>> out;
  for_each_json_line(text, [&](const json& j) {
    const auto start = j.at("start").get<std::uint32_t>();
    const auto end = j.at("end").get<std::uint32_t>();
    if (start >= kMinutesPerWeek || end > kMinutesPerWeek) throw Error(Errc::ConfigError, "calendar interval");
    out[j.at("uid").get<std::string>()].push_back({start, end});
  });
  return out;
}

}  // namespace hearth::context
