// SPDX-License-Identifier: Apache-2.0
#include "locun/localization/criticality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "locun/error.hpp"

namespace locun::loc {

const char* to_string(Criterion c) noexcept {
  switch (c) {
    case Criterion::grad_forget:
      return "grad_forget";
    case Criterion::weights_only:
      return "weights_only";
    case Criterion::weighted_grad_train:
      return "weighted_grad_train";
    case Criterion::weighted_grad_forget:
      return "weighted_grad_forget";
  }
  return "?";
}

Criterion criterion_from_string(const std::string& name) {
  for (Criterion c : {Criterion::grad_forget, Criterion::weights_only, Criterion::weighted_grad_train,
                      Criterion::weighted_grad_forget}) {
    if (name == to_string(c)) return c;
  }
  throw ConfigError("unknown criterion '" + name + "'");
}

const char* to_string(Granularity g) noexcept { return g == Granularity::channel ? "channel" : "parameter"; }

Granularity granularity_from_string(const std::string& name) {
  if (name == "channel") return Granularity::channel;
  if (name == "parameter") return Granularity::parameter;
  throw ConfigError("unknown granularity '" + name + "'");
}

bool needs_data(Criterion c) noexcept { return c != Criterion::weights_only; }

const char* to_string(LayerEnd e) noexcept { return e == LayerEnd::deepest ? "deepest" : "shallowest"; }

std::vector<double> accumulate_signed(const nn::Model& model, const data::DataView& data, Criterion criterion,
                                      const ScoreOptions& opts) {
  const auto theta = model.params();
  std::vector<double> acc(theta.size(), 0.0);
  if (criterion == Criterion::weights_only) {
    std::copy(theta.begin(), theta.end(), acc.begin());
    return acc;
  }
  if (data.empty()) throw ValidationError(std::string("criterion ") + to_string(criterion) + " needs a non-empty data set");
  if (opts.batch_size == 0) throw ConfigError("score batch_size must be positive");
  const bool weighted = criterion != Criterion::grad_forget;
  nn::LossOptions lo;
  lo.kind = opts.loss;
  for (std::size_t b = 0; b < data.size(); b += opts.batch_size) {
    const nn::LabeledBatch batch = data.slice(b, std::min(data.size(), b + opts.batch_size));
    const nn::LossAndGrads lg = nn::loss_and_grads(model, batch, lo);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += weighted ? theta[j] * lg.grads[j] : lg.grads[j];
  }
  return acc;
}

double neuron_topk_avg(std::span<const double> sorted_desc, std::size_t h) {
  if (sorted_desc.empty()) throw ValidationError("neuron_topk_avg: empty score list");
  if (h == 0) throw ConfigError("h must be at least 1");
  const std::size_t k = std::min(h, sorted_desc.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += sorted_desc[i];
  return sum / static_cast<double>(k);
}

CriticalityScores finalize_scores(const nn::Model& model, std::span<const double> accumulated, Criterion criterion,
                                  std::size_t h) {
  if (h == 0) throw ConfigError("h must be at least 1");
  if (accumulated.size() != model.num_params()) throw DimensionError("score vector length does not match p");
  CriticalityScores out;
  out.h = h;
  out.criterion = criterion;
  out.param_scores.resize(accumulated.size());
  for (std::size_t j = 0; j < accumulated.size(); ++j) out.param_scores[j] = std::abs(accumulated[j]);

  std::vector<double> buf;
  for (std::size_t layer : model.parameterized_layers()) {
    const auto groups = model.neuron_groups(layer);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const nn::ParamRange r = groups[i];
      buf.assign(out.param_scores.begin() + static_cast<std::ptrdiff_t>(r.begin),
                 out.param_scores.begin() + static_cast<std::ptrdiff_t>(r.end));
      const std::size_t k = std::min(h, buf.size());
      std::partial_sort(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k), buf.end(), std::greater<>());
      out.neuron_scores.push_back({nn::NeuronId{layer, i}, r, neuron_topk_avg(buf, h), r.size()});
    }
  }
  return out;
}

CriticalityScores criticality_scores(const nn::Model& model, const data::DataView& data, Criterion criterion,
                                     const ScoreOptions& opts) {
  if (opts.h == 0) throw ConfigError("h must be at least 1");
  return finalize_scores(model, accumulate_signed(model, data, criterion, opts), criterion, opts.h);
}

Mask build_mask(const CriticalityScores& scores, double alpha, std::size_t p) {
  const std::size_t budget = budget_for(alpha, p);
  std::vector<std::size_t> order(scores.neuron_scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const NeuronScore& x = scores.neuron_scores[a];
    const NeuronScore& y = scores.neuron_scores[b];
    if (x.score != y.score) return x.score > y.score;
    return x.id < y.id;
  });

  Mask mask = Mask::zeros(p, std::string("channel:") + to_string(scores.criterion));
  mask.alpha = alpha;
  std::size_t total = 0;
  for (std::size_t k : order) {
    const NeuronScore& n = scores.neuron_scores[k];
    if (total + n.param_count > budget) break;
    total += n.param_count;
    mask.set(n.range);
  }
  return mask;
}

Mask top_params_mask(std::span<const double> scores, double alpha, std::string tag) {
  const std::size_t k = budget_for(alpha, scores.size());
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  if (k < order.size()) std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);
  Mask mask = Mask::zeros(scores.size(), std::move(tag));
  mask.alpha = alpha;
  for (std::size_t i = 0; i < k; ++i) mask.bits[order[i]] = 1;
  return mask;
}

Mask salloc_mask(const nn::Model& model, const data::DataView& forget, double alpha, const ScoreOptions& opts) {
  if (forget.empty()) throw ValidationError("salloc needs a non-empty forget set");
  std::vector<double> s = accumulate_signed(model, forget, Criterion::grad_forget, opts);
  for (double& v : s) v = std::abs(v);
  return top_params_mask(s, alpha, "salloc");
}

Mask layer_mask(const nn::Model& model, std::size_t k, LayerEnd end) {
  const auto layers = model.parameterized_layers();
  if (k < 1 || k > layers.size()) {
    throw ConfigError("layer count k=" + std::to_string(k) + " outside [1, " + std::to_string(layers.size()) + "]");
  }
  Mask mask = Mask::zeros(model.num_params(), std::string(to_string(end)) + ":" + std::to_string(k));
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t layer = end == LayerEnd::deepest ? layers[layers.size() - 1 - i] : layers[i];
    mask.set(model.layer_range(layer));
  }
  mask.alpha = static_cast<double>(mask.popcount()) / static_cast<double>(model.num_params());
  return mask;
}

Mask layer_budget_mask(const nn::Model& model, double alpha, LayerEnd end) {
  const std::size_t budget = budget_for(alpha, model.num_params());
  const auto layers = model.parameterized_layers();
  std::size_t k = 0;
  std::size_t total = 0;
  while (k < layers.size()) {
    const std::size_t layer = end == LayerEnd::deepest ? layers[layers.size() - 1 - k] : layers[k];
    if (total + model.layer_range(layer).size() > budget) break;
    total += model.layer_range(layer).size();
    ++k;
  }
  Mask mask = k == 0 ? Mask::zeros(model.num_params(), std::string(to_string(end)) + ":0") : layer_mask(model, k, end);
  mask.alpha = alpha;
  return mask;
}

}  // namespace locun::loc
