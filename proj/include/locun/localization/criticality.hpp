// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "locun/data/dataset.hpp"
#include "locun/nn/engine.hpp"
#include "locun/nn/mask.hpp"
#include "locun/nn/model.hpp"

namespace locun::loc {

enum class Criterion { grad_forget, weights_only, weighted_grad_train, weighted_grad_forget };
enum class Granularity { channel, parameter };

const char* to_string(Criterion c) noexcept;
Criterion criterion_from_string(const std::string& name);
const char* to_string(Granularity g) noexcept;
Granularity granularity_from_string(const std::string& name);

/// True for criteria whose score needs a pass over data.
bool needs_data(Criterion c) noexcept;

struct NeuronScore {
  nn::NeuronId id;
  nn::ParamRange range;
  double score = 0.0;
  std::size_t param_count = 0;
};

struct CriticalityScores {
  std::vector<double> param_scores;
  std::vector<NeuronScore> neuron_scores;  // model order: (layer, neuron) ascending
  std::size_t h = 10;
  Criterion criterion = Criterion::weighted_grad_forget;
};

struct ScoreOptions {
  std::size_t h = 10;
  std::size_t batch_size = 128;
  nn::LossKind loss = nn::LossKind::cross_entropy;
};

/// Signed per-parameter sum over consecutive mini-batches of `data` (view
/// order) of theta_j * g_j, or of g_j alone for grad_forget. g is the
/// gradient of the mean batch loss. weights_only returns theta.
std::vector<double> accumulate_signed(const nn::Model& model, const data::DataView& data, Criterion criterion,
                                      const ScoreOptions& opts = {});

/// Absolute value of the accumulator plus per-neuron top-h averages.
CriticalityScores finalize_scores(const nn::Model& model, std::span<const double> accumulated, Criterion criterion,
                                  std::size_t h);

CriticalityScores criticality_scores(const nn::Model& model, const data::DataView& data, Criterion criterion,
                                     const ScoreOptions& opts = {});

/// Mean of the first min(h, size) entries of a descending list.
double neuron_topk_avg(std::span<const double> sorted_desc, std::size_t h);

/// Greedy whole-neuron selection in descending score order; stops at the
/// first neuron whose parameters would push the total past floor(alpha * p).
Mask build_mask(const CriticalityScores& scores, double alpha, std::size_t p);

/// Top floor(alpha * p) parameters by score, ties to the lower index.
Mask top_params_mask(std::span<const double> scores, double alpha, std::string tag = "top_params");

/// Gradient-magnitude selection over one pass of the forget set.
Mask salloc_mask(const nn::Model& model, const data::DataView& forget, double alpha, const ScoreOptions& opts = {});

enum class LayerEnd { deepest, shallowest };

const char* to_string(LayerEnd e) noexcept;

/// All parameters of the k parameterized layers nearest the chosen end.
Mask layer_mask(const nn::Model& model, std::size_t k, LayerEnd end);

/// layer_mask with the largest k whose parameter count fits floor(alpha * p);
/// empty when even one layer does not fit.
Mask layer_budget_mask(const nn::Model& model, double alpha, LayerEnd end);

}  // namespace locun::loc
