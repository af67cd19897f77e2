// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "locun/data/dataset.hpp"

namespace locun::data {

enum class ForgetKind { iid, non_iid };

const char* to_string(ForgetKind kind) noexcept;
ForgetKind forget_kind_from_string(const std::string& name);

struct ForgetSpec {
  ForgetKind kind = ForgetKind::iid;
  double fraction = 0.1;
  std::vector<int> classes;  // non_iid only
  std::uint64_t seed = 0;

  friend bool operator==(const ForgetSpec&, const ForgetSpec&) = default;
};

/// Forget set S and its complement in the training set, both sorted ascending.
struct SplitSet {
  std::vector<std::size_t> forget_indices;
  std::vector<std::size_t> retain_indices;

  DataView forget(const DatasetPtr& train) const { return DataView(train, forget_indices); }
  DataView retain(const DatasetPtr& train) const { return DataView(train, retain_indices); }
};

/// iid: round(fraction * n) indices uniformly without replacement.
/// non_iid: round(fraction * n) indices drawn only from the listed classes,
/// split as evenly as possible between them; a class that is too small
/// contributes all its examples and the rest is spread over the others.
/// Throws ValidationError when the listed classes cannot supply the target.
SplitSet make_split(const Dataset& train, const ForgetSpec& spec);

struct CalibrationSubset {
  std::vector<std::size_t> indices;  // dataset indices into the training set, sorted
  std::vector<std::string> warnings;
};

/// Subset of the retain view with |test| examples whose per-class counts
/// match the test set's. Class quotas that retain cannot cover are filled
/// uniformly from the remaining retain examples, with a warning.
CalibrationSubset mia_calibration_subset(const DataView& retain, const Dataset& test, std::uint64_t seed);

}  // namespace locun::data
