#pragma once

#include <cstdint>
#include <vector>

#include "hearth/context_engine.hpp"

namespace hearth::harness {

/// Labelled access records whose labels are separable by ip class and hour:
/// legitimate accesses come from the home subnet or a known network between
/// 08:00 and 24:00, anomalous ones from unknown networks or at night.
/// Weekday and device are uniform noise. Deterministic in `seed`.
std::vector<context::AccessRecord> synthetic_access_records(std::uint64_t seed, std::size_t count = 200);

struct Split {
  std::vector<context::AccessRecord> train;
  std::vector<context::AccessRecord> test;
};

/// First `train_fraction` of the records for training, the rest for testing.
Split split_records(const std::vector<context::AccessRecord>& records, double train_fraction = 0.8);

/// Fraction of `test` whose posterior falls on the side of 0.5 matching its label.
double accuracy(const context::NaiveBayesModel& model, const std::vector<context::AccessRecord>& test);

}  // namespace hearth::harness
