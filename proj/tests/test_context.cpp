#include <gtest/gtest.h>

#include <cmath>

#include "hearth/context_engine.hpp"
#include "hearth/datasets.hpp"
#include "hearth/primitives.hpp"
#include "test_support.hpp"

namespace hearth::context {
namespace {

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Malformed;
}

double uniform01(RandomSource& src) {
  const auto b = src.bytes(8);
  WireReader r(b);
  return static_cast<double>(r.u64() >> 11) * 0x1p-53;
}

ContextSnapshot snapshot() {
  ContextSnapshot s;
  s.uid = "alice";
  s.bluetooth_present = true;
  s.credentials_ok = true;
  return s;
}

TEST(Factors, BooleanAndIpMaps) {
  auto s = snapshot();
  EXPECT_EQ(evaluate_factor(s, Factor::Bluetooth, nullptr, "thermostat"), 1.0);
  EXPECT_EQ(evaluate_factor(s, Factor::Credentials, nullptr, "thermostat"), 1.0);
  EXPECT_EQ(evaluate_factor(s, Factor::Calendar, nullptr, "thermostat"), 0.0);
  EXPECT_EQ(evaluate_factor(s, "ip_location", nullptr, "thermostat"), 1.0);
  s.ip_class = IpClass::KnownExternal;
  EXPECT_EQ(evaluate_factor(s, Factor::IpLocation, nullptr, "thermostat"), 0.5);
  s.ip_class = IpClass::Unknown;
  EXPECT_EQ(evaluate_factor(s, Factor::IpLocation, nullptr, "thermostat"), 0.0);
  EXPECT_EQ(evaluate_factor(s, Factor::History, nullptr, "thermostat"), 0.5);
  EXPECT_EQ(code_of([&] { evaluate_factor(s, "retina", nullptr, "x"); }), Errc::UnknownFactor);
}

TEST(Factors, HistoryDelegatesToClassifier) {
  const auto records = parse_records_jsonl(testing::read_text("ip_separable.jsonl"));
  const auto model = train_classifier(records);
  auto s = snapshot();
  s.minutes = 24 * 60 + 9 * 60;  // Tuesday 09:00
  const auto rec = record_from_snapshot(s, "thermostat", Label::Legitimate);
  EXPECT_EQ(evaluate_factor(s, Factor::History, &model, "thermostat"), classify_access(model, rec));
}

TEST(Snapshot, InternetExcludesBluetooth) {
  auto s = snapshot();
  s.origin = Origin::Internet;
  EXPECT_EQ(code_of([&] { s.validate(); }), Errc::ConfigError);
  s.bluetooth_present = false;
  EXPECT_NO_THROW(s.validate());
}

TEST(Confidence, Arithmetic) {
  const FactorWeights w;
  FactorScores all1, all0, cred_bt;
  all1.values.fill(1.0);
  EXPECT_NEAR(score_confidence(all1, w), 1.0, 1e-12);
  EXPECT_EQ(score_confidence(all0, w), 0.0);
  cred_bt[Factor::Credentials] = 1;
  cred_bt[Factor::Bluetooth] = 1;
  EXPECT_NEAR(score_confidence(cred_bt, w), 0.60, 1e-12);
}

TEST(Confidence, InvalidWeights) {
  FactorWeights w;
  w.history = 0.2;
  EXPECT_EQ(code_of([&] { score_confidence(FactorScores{}, w); }), Errc::InvalidWeights);
  FactorWeights neg;
  neg.credentials = -0.1;
  neg.history = 0.6;
  EXPECT_EQ(code_of([&] { neg.validate(); }), Errc::InvalidWeights);
}

TEST(Confidence, MonotoneAndBounded) {
  auto src = RandomSource::seeded(77);
  const FactorWeights w;
  const AccessPolicy policy{0.6, 0.2};
  for (int i = 0; i < 10'000; ++i) {
    FactorScores s;
    for (auto& v : s.values) v = uniform01(src);
    const double base = score_confidence(s, w);
    ASSERT_GE(base, 0.0);
    ASSERT_LE(base, 1.0);
    const auto f = kAllFactors[static_cast<std::size_t>(i) % kAllFactors.size()];
    FactorScores raised = s;
    raised[f] = s[f] + (1.0 - s[f]) * uniform01(src);
    const double up = score_confidence(raised, w);
    ASSERT_GE(up, base);
    ASSERT_FALSE(decide_access(base, policy) == Decision::Grant && decide_access(up, policy) == Decision::Deny);
    ASSERT_LE(static_cast<int>(decide_access(up, policy)), static_cast<int>(decide_access(base, policy)));
  }
}

TEST(Decide, InclusiveBoundaries) {
  const AccessPolicy p{0.6, 0.2};
  EXPECT_EQ(decide_access(0.60, p), Decision::Grant);
  EXPECT_EQ(decide_access(0.45, p), Decision::StepUp);
  EXPECT_EQ(decide_access(0.30, p), Decision::Deny);
  EXPECT_EQ(decide_access(0.40, AccessPolicy{0.5, 0.1}), Decision::StepUp);
  EXPECT_EQ(decide_access(std::nextafter(0.4, 0.0), AccessPolicy{0.5, 0.1}), Decision::Deny);
  EXPECT_EQ(decide_access(std::nextafter(0.6, 0.0), p), Decision::StepUp);
  EXPECT_EQ(decide_access(0.85, AccessPolicy{0.8, 0.2}), Decision::Grant);
  EXPECT_EQ(decide_access(0.60, AccessPolicy{0.9, 0.2}), Decision::Deny);
  EXPECT_EQ(decide_access(1.0, AccessPolicy{1.0, 0.2}), Decision::Grant);
  EXPECT_EQ(decide_access(0.0, AccessPolicy{0.0, 0.2}), Decision::Grant);
}

TEST(NaiveBayes, PriorsByCounting) {
  std::vector<AccessRecord> r(4);
  r[0].label = r[1].label = Label::Legitimate;
  r[2].label = r[3].label = Label::Anomalous;
  const auto m = train_classifier(r);
  EXPECT_DOUBLE_EQ(m.prior(Label::Legitimate), 0.5);
  EXPECT_DOUBLE_EQ(m.prior(Label::Anomalous), 0.5);
}

TEST(NaiveBayes, DegenerateTraining) {
  std::vector<AccessRecord> r(3);
  EXPECT_EQ(code_of([&] { train_classifier(r); }), Errc::DegenerateTraining);
  EXPECT_EQ(code_of([&] { train_classifier({}); }), Errc::DegenerateTraining);
}

TEST(NaiveBayes, HandComputedIpSeparation) {
  const auto records = parse_records_jsonl(testing::read_text("ip_separable.jsonl"));
  ASSERT_EQ(records.size(), 20u);
  const auto m = train_classifier(records);
  // Laplace alpha 1 over three ip classes: 11/13 vs 1/13; the rest cancels.
  EXPECT_NEAR(m.p_ip(Label::Legitimate, IpClass::HomeSubnet), 11.0 / 13.0, 1e-12);
  EXPECT_NEAR(m.p_ip(Label::Anomalous, IpClass::HomeSubnet), 1.0 / 13.0, 1e-12);
  AccessRecord q = records.front();
  EXPECT_NEAR(classify_access(m, q), 11.0 / 12.0, 1e-12);
  EXPECT_GT(classify_access(m, q), 0.9);
  q.ip_class = IpClass::Unknown;
  EXPECT_NEAR(classify_access(m, q), 1.0 / 12.0, 1e-12);
}

TEST(NaiveBayes, SymmetricModelIsHalf) {
  std::vector<AccessRecord> r(2);
  r[0].label = Label::Legitimate;
  r[1].label = Label::Anomalous;
  const auto m = train_classifier(r);
  EXPECT_NEAR(classify_access(m, r[0]), 0.5, 1e-12);
}

TEST(NaiveBayes, TablesAreDistributions) {
  const auto m = train_classifier(harness::synthetic_access_records(3));
  for (auto c : {Label::Legitimate, Label::Anomalous}) {
    double h = 0, d = 0, ip = 0, dev = 0;
    for (int i = 0; i < kHourBuckets; ++i) h += m.p_hour(c, i);
    for (int i = 0; i < kWeekdays; ++i) d += m.p_weekday(c, i);
    for (auto x : {IpClass::HomeSubnet, IpClass::KnownExternal, IpClass::Unknown}) ip += m.p_ip(c, x);
    for (const auto& [id, p] : m.device_table()) dev += p[static_cast<std::size_t>(c)];
    dev += m.unseen_device()[static_cast<std::size_t>(c)];
    EXPECT_NEAR(h, 1.0, 1e-9);
    EXPECT_NEAR(d, 1.0, 1e-9);
    EXPECT_NEAR(ip, 1.0, 1e-9);
    EXPECT_NEAR(dev, 1.0, 1e-9);
    EXPECT_GT(m.p_device(c, "never-seen"), 0.0);
  }
}

TEST(NaiveBayes, PosteriorsComplement) {
  const auto records = harness::synthetic_access_records(5);
  const auto m = train_classifier(records);
  for (const auto& r : records) {
    const double p = classify_access(m, r);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    EXPECT_EQ(p, m.posterior_legitimate(r));
  }
}

TEST(NaiveBayes, SyntheticAccuracy) {
  const auto records = harness::synthetic_access_records(2024, 200);
  ASSERT_EQ(records.size(), 200u);
  EXPECT_EQ(records, harness::synthetic_access_records(2024, 200));
  const auto split = harness::split_records(records);
  ASSERT_EQ(split.train.size(), 160u);
  const auto m = train_classifier(split.train);
  EXPECT_GE(harness::accuracy(m, split.test), 0.9);
}

TEST(SchemeSelection, RuleTable) {
  auto s = snapshot();
  s.origin = Origin::Internet;
  s.bluetooth_present = false;
  EXPECT_EQ(select_scheme(s, {true, 3, true, true}), Scheme::Dhs);
  s.origin = Origin::Local;
  EXPECT_EQ(select_scheme(s, {true, 0, true, true}), Scheme::Dors);
  EXPECT_EQ(select_scheme(s, {true, 1, true, true}), Scheme::Mht);
  EXPECT_EQ(select_scheme(s, {false, 0, true, false}), Scheme::Dors);
  EXPECT_EQ(select_scheme(s, {true, 0, false, true}), Scheme::Mht);
  s.origin = Origin::Internet;
  EXPECT_EQ(select_scheme(s, {true, 2, false, false}), Scheme::Mht);
  EXPECT_EQ(code_of([&] { select_scheme(s, {false, 0, false, false}); }), Errc::NoSchemeAvailable);
  EXPECT_EQ(select_scheme(s, {true, 2, true, true}), select_scheme(s, {true, 2, true, true}));
}

TEST(Calendar, WeeklyIntervals) {
  const auto cals = parse_calendars_jsonl(testing::read_text("calendars.jsonl"));
  ASSERT_EQ(cals.at("alice").size(), 5u);
  EXPECT_TRUE(calendar_claims_present(cals.at("alice"), 18 * 60));
  EXPECT_FALSE(calendar_claims_present(cals.at("alice"), 23 * 60));
  EXPECT_TRUE(calendar_claims_present(cals.at("alice"), kMinutesPerWeek + 19 * 60));
  EXPECT_TRUE(calendar_claims_present(cals.at("bob"), 6 * 1440 + 5));
  EXPECT_FALSE(calendar_claims_present(cals.at("bob"), 5));
}

TEST(Records, JsonlRoundTripAndBuckets) {
  const auto records = harness::synthetic_access_records(9, 30);
  EXPECT_EQ(parse_records_jsonl(to_jsonl(records)), records);
  EXPECT_EQ(hour_bucket_of(0), 0);
  EXPECT_EQ(hour_bucket_of(4 * 60), 1);
  EXPECT_EQ(hour_bucket_of(23 * 60 + 59), 5);
  EXPECT_EQ(weekday_of(1440 * 8), 1);
  EXPECT_EQ(code_of([] { parse_records_jsonl("{\"uid\":\"a\"}\n"); }), Errc::ConfigError);
}

}  // namespace
}  // namespace hearth::context
