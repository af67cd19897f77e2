// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "locun/data/dataset.hpp"
#include "locun/nn/mask.hpp"
#include "locun/nn/model.hpp"

namespace locun::loc {

struct CritMemTrace {
  std::vector<nn::NeuronId> reset;  // in reset order
  bool flipped = false;             // prediction incorrect when the loop ended
};

struct CritMemResult {
  Mask mask;  // union of every reset channel
  std::vector<CritMemTrace> traces;
  std::size_t exhausted = 0;  // examples that hit the bound without flipping
};

/// max(1, floor(0.05 * channels)).
std::size_t default_critmem_bound(const nn::Model& model);

/// For each forget example, starting from the input parameters: repeatedly
/// zero the not-yet-reset channel with the largest sum |theta_j g_j| on that
/// example until it is misclassified or `max_channels` channels are gone.
CritMemResult critmem(const nn::Model& model, const data::DataView& forget, std::size_t max_channels);

/// Keeps the most frequently reset channels (ties: earliest first reset,
/// then model order) while the parameter total stays within floor(alpha * p).
Mask trim_critmem(const nn::Model& model, const CritMemResult& result, double alpha);

enum class RandomGranularity { channel, parameter };

/// Same number of channels (or parameters) per layer as `reference`, chosen
/// uniformly at random. Channel granularity requires a channel-aligned reference.
Mask random_matched_mask(const Mask& reference, const nn::Model& model, RandomGranularity granularity,
                         std::uint64_t seed);

}  // namespace locun::loc
