#include "hearth/datasets.hpp"

#include "hearth/primitives.hpp"

namespace hearth::harness {

namespace {

std::uint32_t uniform(RandomSource& src, std::uint32_t n) {
  const auto b = src.bytes(4);
  WireReader r(b);
  return r.u32() % n;
}

}  // namespace

std::vector<context::AccessRecord> synthetic_access_records(std::uint64_t seed, std::size_t count) {
  using context::IpClass;
  static const char* const kDevices[] = {"front-lock", "thermostat", "camera"};
  auto src = RandomSource::seeded(seed);
  std::vector<context::AccessRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    context::AccessRecord r;
    r.uid = "user" + std::to_string(uniform(src, 8));
    r.weekday = static_cast<int>(uniform(src, context::kWeekdays));
    r.device_id = kDevices[uniform(src, 3)];
    if (i % 2 == 0) {
      r.label = context::Label::Legitimate;
      r.hour_bucket = 2 + static_cast<int>(uniform(src, 4));  // 08:00 .. 24:00
      r.ip_class = uniform(src, 2) == 0 ? IpClass::HomeSubnet : IpClass::KnownExternal;
    } else {
      r.label = context::Label::Anomalous;
      r.hour_bucket = static_cast<int>(uniform(src, 2));  // 00:00 .. 08:00
      r.ip_class = IpClass::Unknown;
    }
    out.push_back(std::move(r));
  }
  // Deterministic shuffle so the split sees both labels in proportion.
  for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[uniform(src, static_cast<std::uint32_t>(i))]);
  return out;
}

Split split_records(const std::vector<context::AccessRecord>& records, double train_fraction) {
  const auto cut = static_cast<std::size_t>(static_cast<double>(records.size()) * train_fraction);
  return {{records.begin(), records.begin() + static_cast<std::ptrdiff_t>(cut)},
          {records.begin() + static_cast<std::ptrdiff_t>(cut), records.end()}};
}

double accuracy(const context::NaiveBayesModel& model, const std::vector<context::AccessRecord>& test) {
  if (test.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& r : test) {
    const bool legit = context::classify_access(model, r) >= 0.5;
    correct += legit == (r.label == context::Label::Legitimate);
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace hearth::harness
