// SPDX-License-Identifier: Apache-2.0
// Brute-force reference implementations shared by unit and acceptance tests.
#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "locun/data/dataset.hpp"
#include "locun/rng.hpp"

namespace locun::testing {

/// Neuron selection of the greedy budget rule, found without sorting: every
/// subset of neurons is enumerated, subsets that are not closed under
/// "outranks" are discarded, and the largest closed subset within budget
/// wins. Ranking: higher score first, then lower position. n <= 20.
inline std::vector<std::uint8_t> greedy_subset_oracle(std::span<const double> score, std::span<const std::size_t> count,
                                                      std::size_t budget) {
  const std::size_t n = score.size();
  std::vector<std::uint32_t> above(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (score[j] > score[i] || (score[j] == score[i] && j < i)) above[i] |= 1u << j;

  std::uint32_t best = 0;
  int best_size = -1;
  for (std::uint32_t s = 0; s < (1u << n); ++s) {
    std::size_t total = 0;
    bool closed = true;
    for (std::size_t i = 0; i < n && closed; ++i) {
      if (!(s >> i & 1u)) continue;
      closed = (above[i] & ~s) == 0;
      total += count[i];
    }
    if (!closed || total > budget) continue;
    const int size = std::popcount(s);
    if (size > best_size) {
      best_size = size;
      best = s;
    }
  }
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = best >> i & 1u;
  return out;
}

/// Indices of the k largest values by a full stable sort (ties keep the lower index).
inline std::vector<std::size_t> exact_topk(std::span<const double> v, std::size_t k) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Best 1-d threshold attacker by exhaustive search: for every split between
/// sorted calibration values and both orientations, count calibration errors;
/// the winner is the first minimum in scan order and the threshold is the
/// midpoint of its gap. Returns how many forget values land on the "unseen" side.
inline std::size_t threshold_oracle_tn(std::span<const double> seen, std::span<const double> unseen,
                                       std::span<const double> forget) {
  std::vector<std::pair<double, int>> pts;
  for (double v : seen) pts.push_back({v, 1});
  for (double v : unseen) pts.push_back({v, 0});
  std::sort(pts.begin(), pts.end());
  std::size_t best_err = std::numeric_limits<std::size_t>::max();
  double best_t = 0.0;
  bool seen_above = true;
  for (std::size_t cut = 0; cut <= pts.size(); ++cut) {
    if (cut > 0 && cut < pts.size() && pts[cut - 1].first == pts[cut].first) continue;
    const double t = cut == 0 ? pts.front().first - 1.0
                     : cut == pts.size() ? pts.back().first + 1.0
                                         : 0.5 * (pts[cut - 1].first + pts[cut].first);
    for (bool up : {true, false}) {
      std::size_t err = 0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const bool predicted_seen = (i >= cut) == up;
        err += predicted_seen != (pts[i].second == 1);
      }
      if (err < best_err) {
        best_err = err;
        best_t = t;
        seen_above = up;
      }
    }
  }
  std::size_t tn = 0;
  for (double f : forget) tn += (f > best_t) != seen_above;
  return tn;
}

/// View over an ad-hoc dataset; labels are not range-checked.
inline data::DataView make_view(nn::Shape shape, std::size_t classes, std::vector<float> features,
                                std::vector<int> labels) {
  auto ds = std::make_shared<data::Dataset>();
  ds->name = "fixture";
  ds->shape = std::move(shape);
  ds->num_classes = classes;
  ds->features = std::move(features);
  ds->labels = std::move(labels);
  return data::DataView::all(ds);
}

}  // namespace locun::testing
