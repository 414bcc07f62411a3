#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hearth/error.hpp"

namespace hearth::context {

enum class Origin : std::uint8_t { Local, Internet };
enum class IpClass : std::uint8_t { HomeSubnet, KnownExternal, Unknown };
enum class Factor : std::uint8_t { Credentials, Bluetooth, IpLocation, Calendar, History };
enum class Label : std::uint8_t { Legitimate, Anomalous };
enum class Decision : std::uint8_t { Grant, StepUp, Deny };
enum class Scheme : std::uint8_t { Mht, Dors, Dhs };

inline constexpr std::array<Factor, 5> kAllFactors{Factor::Credentials, Factor::Bluetooth, Factor::IpLocation,
                                                   Factor::Calendar, Factor::History};

std::string_view to_string(Origin v) noexcept;
std::string_view to_string(IpClass v) noexcept;
std::string_view to_string(Factor v) noexcept;
std::string_view to_string(Label v) noexcept;
std::string_view to_string(Decision v) noexcept;
std::string_view to_string(Scheme v) noexcept;

/// Throws `Errc::UnknownFactor`.
Factor parse_factor(std::string_view name);
/// Throw `Errc::ConfigError`.
IpClass parse_ip_class(std::string_view name);
Origin parse_origin(std::string_view name);
Scheme parse_scheme(std::string_view name);

struct ContextSnapshot {
  std::string uid;
  Origin origin = Origin::Local;
  IpClass ip_class = IpClass::HomeSubnet;
  bool bluetooth_present = false;
  /// Simulated minutes since the start of the simulation week.
  std::uint64_t minutes = 0;
  bool calendar_claims_present = false;
  bool credentials_ok = false;

  /// Throws `Errc::ConfigError` if origin is internet with bluetooth present.
  void validate() const;
};

struct FactorWeights {
  double credentials = 0.40;
  double bluetooth = 0.20;
  double ip_location = 0.15;
  double calendar = 0.15;
  double history = 0.10;

  /// Each weight in [0,1] and the sum within 1e-9 of 1; else `Errc::InvalidWeights`.
  void validate() const;
  double weight(Factor f) const noexcept;
  friend bool operator==(const FactorWeights&, const FactorWeights&) = default;
};

struct FactorScores {
  std::array<double, 5> values{};

  double& operator[](Factor f) noexcept { return values[static_cast<std::size_t>(f)]; }
  double operator[](Factor f) const noexcept { return values[static_cast<std::size_t>(f)]; }
};

struct AccessPolicy {
  double threshold = 0.6;
  double step_up_margin = 0.2;
};

inline constexpr int kHourBuckets = 6;
inline constexpr int kWeekdays = 7;
inline constexpr int kIpClasses = 3;

struct AccessRecord {
  std::string uid;
  int hour_bucket = 0;  ///< 0..5, four-hour bins
  int weekday = 0;      ///< 0..6
  IpClass ip_class = IpClass::HomeSubnet;
  std::string device_id;
  Label label = Label::Legitimate;

  friend bool operator==(const AccessRecord&, const AccessRecord&) = default;
};

int hour_bucket_of(std::uint64_t minutes) noexcept;
int weekday_of(std::uint64_t minutes) noexcept;
AccessRecord record_from_snapshot(const ContextSnapshot& s, std::string_view device_id, Label label);

/// Categorical naive Bayes over (hour_bucket, weekday, ip_class, device_id)
/// with Laplace smoothing, alpha = 1. Device ids not seen in training share
/// one extra smoothed category.
class NaiveBayesModel {
 public:
  double prior(Label c) const noexcept { return priors_[index(c)]; }
  double p_hour(Label c, int bucket) const;
  double p_weekday(Label c, int day) const;
  double p_ip(Label c, IpClass ip) const;
  double p_device(Label c, std::string_view device) const;
  /// Device vocabulary including the unseen slot.
  std::size_t device_categories() const noexcept { return devices_.size() + 1; }
  const std::map<std::string, std::array<double, 2>, std::less<>>& device_table() const noexcept { return devices_; }
  std::array<double, 2> unseen_device() const noexcept { return unseen_device_; }

  /// P(legitimate | features) with the label field ignored.
  double posterior_legitimate(const AccessRecord& r) const;

 private:
  friend NaiveBayesModel train_classifier(std::span<const AccessRecord> records);
  static std::size_t index(Label c) noexcept { return static_cast<std::size_t>(c); }

  std::array<double, 2> priors_{};
  std::array<std::array<double, kHourBuckets>, 2> hour_{};
  std::array<std::array<double, kWeekdays>, 2> weekday_{};
  std::array<std::array<double, kIpClasses>, 2> ip_{};
  std::map<std::string, std::array<double, 2>, std::less<>> devices_;
  std::array<double, 2> unseen_device_{};
};

/// Throws `Errc::DegenerateTraining` unless both labels occur.
NaiveBayesModel train_classifier(std::span<const AccessRecord> records);
double classify_access(const NaiveBayesModel& model, const AccessRecord& record);

/// Score in [0,1]. Credentials, bluetooth and calendar are boolean; ip
/// location maps home/known/unknown to 1/0.5/0; history is the classifier
/// posterior (0.5 when no model is trained yet).
double evaluate_factor(const ContextSnapshot& s, Factor f, const NaiveBayesModel* model,
                       std::string_view device_id);
/// Same, by name; throws `Errc::UnknownFactor`.
double evaluate_factor(const ContextSnapshot& s, std::string_view factor, const NaiveBayesModel* model,
                       std::string_view device_id);
FactorScores evaluate_all(const ContextSnapshot& s, const NaiveBayesModel* model, std::string_view device_id);

/// Weighted sum; throws `Errc::InvalidWeights`.
double score_confidence(const FactorScores& scores, const FactorWeights& weights);

/// Grant iff confidence >= threshold; StepUp iff threshold - margin <=
/// confidence < threshold; Deny otherwise.
Decision decide_access(double confidence, const AccessPolicy& policy) noexcept;

struct SchemeCapabilities {
  bool mht = false;
  std::uint64_t mht_history = 0;  ///< completed handshakes recorded for the user, any scheme
  bool dors = false;
  bool smart_card = false;
};

/// Internet origin with a card -> DHS; local with DORS keys and no MHT history
/// -> DORS; otherwise MHT, falling back to DORS when MHT is not provisioned.
/// Throws `Errc::NoSchemeAvailable`.
Scheme select_scheme(const ContextSnapshot& s, const SchemeCapabilities& caps);

/// Weekly recurring interval in minutes-of-week, [start, end).
struct CalendarInterval {
  std::uint32_t start = 0;
  std::uint32_t end = 0;

  friend bool operator==(const CalendarInterval&, const CalendarInterval&) = default;
};

inline constexpr std::uint64_t kMinutesPerWeek = 7 * 24 * 60;

bool calendar_claims_present(std::span<const CalendarInterval> calendar, std::uint64_t minutes) noexcept;

/// Line-delimited JSON: uid, hour_bucket, weekday, ip_class, device_id, label.
std::vector<AccessRecord> parse_records_jsonl(std::string_view text);
std::string to_jsonl(std::span<const AccessRecord> records);

/// Line-delimited JSON: uid, start, end.
std::map<std::string, std::vector<CalendarInterval>> parse_calendars_jsonl(std::string_view text);

}  // namespace hearth::context
