// SPDX-License-Identifier: Apache-2.0
#include "locun/localization/critmem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "locun/error.hpp"
#include "locun/nn/engine.hpp"
#include "locun/rng.hpp"

namespace locun::loc {

namespace {

struct Channel {
  nn::NeuronId id;
  nn::ParamRange range;
};

std::vector<Channel> all_channels(const nn::Model& model) {
  std::vector<Channel> out;
  for (std::size_t layer : model.parameterized_layers()) {
    const auto groups = model.neuron_groups(layer);
    for (std::size_t i = 0; i < groups.size(); ++i) out.push_back({{layer, i}, groups[i]});
  }
  return out;
}

bool misclassified(const nn::Model& m, const nn::LabeledBatch& one) {
  return nn::argmax(nn::forward(m, one.features, 1))[0] != one.labels[0];
}

}  // namespace

std::size_t default_critmem_bound(const nn::Model& model) {
  return std::max<std::size_t>(1, model.num_neurons() / 20);
}

CritMemResult critmem(const nn::Model& model, const data::DataView& forget, std::size_t max_channels) {
  if (forget.empty()) throw ValidationError("critmem needs a non-empty forget set");
  if (max_channels == 0) throw ConfigError("critmem bound must be at least 1");
  const std::vector<Channel> channels = all_channels(model);
  const std::size_t bound = std::min(max_channels, channels.size());

  CritMemResult res;
  res.mask = Mask::zeros(model.num_params(), "critmem");
  nn::Model scratch = model;
  std::vector<std::uint8_t> gone(channels.size());
  for (std::size_t pos = 0; pos < forget.size(); ++pos) {
    std::copy(model.params().begin(), model.params().end(), scratch.params().begin());
    std::fill(gone.begin(), gone.end(), 0);
    const nn::LabeledBatch one = forget.slice(pos, pos + 1);
    CritMemTrace trace;
    trace.flipped = misclassified(scratch, one);
    while (!trace.flipped && trace.reset.size() < bound) {
      const nn::LossAndGrads lg = nn::loss_and_grads(scratch, one);
      const auto theta = scratch.params();
      std::size_t best = channels.size();
      double best_score = -1.0;
      for (std::size_t c = 0; c < channels.size(); ++c) {
        if (gone[c]) continue;
        double s = 0.0;
        for (std::size_t j = channels[c].range.begin; j < channels[c].range.end; ++j) s += std::abs(theta[j] * lg.grads[j]);
        if (s > best_score) {
          best_score = s;
          best = c;
        }
      }
      gone[best] = 1;
      for (std::size_t j = channels[best].range.begin; j < channels[best].range.end; ++j) theta[j] = 0.0f;
      trace.reset.push_back(channels[best].id);
      res.mask.set(channels[best].range);
      trace.flipped = misclassified(scratch, one);
    }
    if (!trace.flipped) ++res.exhausted;
    res.traces.push_back(std::move(trace));
  }
  return res;
}

Mask trim_critmem(const nn::Model& model, const CritMemResult& result, double alpha) {
  struct Tally {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::map<nn::NeuronId, Tally> tally;
  std::size_t seq = 0;
  for (const CritMemTrace& t : result.traces) {
    for (const nn::NeuronId& id : t.reset) {
      auto [it, fresh] = tally.try_emplace(id);
      if (fresh) it->second.first = seq;
      ++it->second.count;
      ++seq;
    }
  }
  std::vector<std::pair<nn::NeuronId, Tally>> order(tally.begin(), tally.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first < b.second.first;
  });

  const std::size_t budget = budget_for(alpha, model.num_params());
  Mask mask = Mask::zeros(model.num_params(), "critmem");
  mask.alpha = alpha;
  std::size_t total = 0;
  for (const auto& [id, t] : order) {
    const nn::ParamRange r = model.group_range(id);
    if (total + r.size() > budget) break;
    total += r.size();
    mask.set(r);
  }
  return mask;
}

Mask random_matched_mask(const Mask& reference, const nn::Model& model, RandomGranularity granularity,
                         std::uint64_t seed) {
  if (reference.size() != model.num_params()) throw DimensionError("reference mask length does not match p");
  Mask out = Mask::zeros(model.num_params(), "random:" + reference.strategy_tag);
  out.alpha = reference.alpha;
  for (std::size_t layer : model.parameterized_layers()) {
    Rng rng(seed, Stream::random_mask, {layer});
    const nn::ParamRange lr = model.layer_range(layer);
    if (granularity == RandomGranularity::parameter) {
      for (std::size_t k : rng.sample(lr.size(), reference.popcount(lr))) out.bits[lr.begin + k] = 1;
      continue;
    }
    const auto groups = model.neuron_groups(layer);
    std::size_t chosen = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const std::size_t on = reference.popcount(groups[i]);
      if (on != 0 && on != groups[i].size()) {
        throw ValidationError("reference mask is not channel-aligned at layer " + std::to_string(layer) + " channel " +
                              std::to_string(i));
      }
      chosen += on != 0;
    }
    for (std::size_t i : rng.sample(groups.size(), chosen)) out.set(groups[i]);
  }
  return out;
}

}  // namespace locun::loc
