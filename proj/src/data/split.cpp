// SPDX-License-Identifier: Apache-2.0
#include "locun/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "locun/error.hpp"
#include "locun/rng.hpp"

namespace locun::data {

const char* to_string(ForgetKind kind) noexcept { return kind == ForgetKind::iid ? "iid" : "non_iid"; }

ForgetKind forget_kind_from_string(const std::string& name) {
  if (name == "iid") return ForgetKind::iid;
  if (name == "non_iid") return ForgetKind::non_iid;
  throw ConfigError("unknown forget set kind '" + name + "'");
}

namespace {

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& sorted) {
  std::vector<std::size_t> out;
  out.reserve(n - sorted.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (k < sorted.size() && sorted[k] == i) {
      ++k;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

}  // namespace

SplitSet make_split(const Dataset& train, const ForgetSpec& spec) {
  const std::size_t n = train.size();
  if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) throw ConfigError("forget fraction must lie in (0, 1)");
  const auto target = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(n)));
  if (target < 1) throw ConfigError("forget fraction selects no examples (fraction * n < 0.5)");

  SplitSet s;
  if (spec.kind == ForgetKind::iid) {
    Rng rng(spec.seed, Stream::split, {1});
    s.forget_indices = rng.sample(n, target);
  } else {
    if (spec.classes.empty()) throw ConfigError("non_iid forget set needs a non-empty class list");
    std::set<int> uniq(spec.classes.begin(), spec.classes.end());
    if (uniq.size() != spec.classes.size()) throw ConfigError("non_iid forget classes contain duplicates");
    std::vector<std::vector<std::size_t>> members(spec.classes.size());
    for (std::size_t k = 0; k < spec.classes.size(); ++k) {
      const int c = spec.classes[k];
      if (c < 0 || static_cast<std::size_t>(c) >= train.num_classes) {
        throw ConfigError("non_iid forget class " + std::to_string(c) + " outside the label range");
      }
      for (std::size_t i = 0; i < n; ++i)
        if (train.labels[i] == c) members[k].push_back(i);
    }

    // Water-fill the target across classes, capping each at its size.
    std::vector<std::size_t> quota(members.size(), 0);
    std::size_t remaining = target;
    while (remaining > 0) {
      std::vector<std::size_t> open;
      for (std::size_t k = 0; k < members.size(); ++k)
        if (quota[k] < members[k].size()) open.push_back(k);
      if (open.empty()) {
        std::string detail;
        for (std::size_t k = 0; k < members.size(); ++k) {
          detail += (k ? ", " : "") + std::string("class ") + std::to_string(spec.classes[k]) + " has " +
                    std::to_string(members[k].size());
        }
        throw ValidationError("non_iid forget set needs " + std::to_string(target) + " examples but the listed classes hold only " +
                              std::to_string(target - remaining) + " (shortfall " + std::to_string(remaining) +
                              "; " + detail + ")");
      }
      const std::size_t share = remaining / open.size();
      std::size_t extra = remaining % open.size();
      for (std::size_t k : open) {
        std::size_t want = share + (extra > 0 ? 1 : 0);
        if (extra > 0) --extra;
        const std::size_t take = std::min(want, members[k].size() - quota[k]);
        quota[k] += take;
        remaining -= take;
      }
    }

    for (std::size_t k = 0; k < members.size(); ++k) {
      Rng rng(spec.seed, Stream::split, {2, static_cast<std::uint64_t>(spec.classes[k])});
      for (std::size_t pick : rng.sample(members[k].size(), quota[k])) s.forget_indices.push_back(members[k][pick]);
    }
  }
  std::sort(s.forget_indices.begin(), s.forget_indices.end());
  s.retain_indices = complement(n, s.forget_indices);
  return s;
}

CalibrationSubset mia_calibration_subset(const DataView& retain, const Dataset& test, std::uint64_t seed) {
  if (retain.size() < test.size()) {
    throw ValidationError("retain set (" + std::to_string(retain.size()) + ") is smaller than the test set (" +
                          std::to_string(test.size()) + ")");
  }
  const std::size_t classes = retain.dataset().num_classes;
  std::vector<std::size_t> quota = test.class_counts();
  quota.resize(classes, 0);
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t pos = 0; pos < retain.size(); ++pos) {
    by_class[static_cast<std::size_t>(retain.label(pos))].push_back(retain.index(pos));
  }

  CalibrationSubset out;
  std::vector<std::uint8_t> used(retain.dataset().size(), 0);
  std::size_t shortfall = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t take = std::min(quota[c], by_class[c].size());
    if (take < quota[c]) {
      shortfall += quota[c] - take;
      out.warnings.push_back("calibration: class " + std::to_string(c) + " needs " + std::to_string(quota[c]) +
                             " retain examples, only " + std::to_string(by_class[c].size()) +
                             " available; filling from other classes");
    }
    Rng rng(seed, Stream::calibration, {c});
    for (std::size_t pick : rng.sample(by_class[c].size(), take)) {
      out.indices.push_back(by_class[c][pick]);
      used[by_class[c][pick]] = 1;
    }
  }
  if (shortfall > 0) {
    std::vector<std::size_t> rest;
    for (std::size_t pos = 0; pos < retain.size(); ++pos)
      if (!used[retain.index(pos)]) rest.push_back(retain.index(pos));
    std::sort(rest.begin(), rest.end());
    Rng rng(seed, Stream::calibration, {0xf111});
    for (std::size_t pick : rng.sample(rest.size(), shortfall)) out.indices.push_back(rest[pick]);
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

}  // namespace locun::data
