// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "locun/nn/model.hpp"

namespace locun::nn {

/// Row-major feature matrix, one example per row.
struct ExampleBatch {
  std::vector<float> features;
  std::size_t size = 0;
};

struct LabeledBatch {
  std::vector<float> features;
  std::vector<int> labels;
  std::size_t size = 0;
};

struct Logits {
  std::vector<double> values;  // size * classes
  std::size_t size = 0;
  std::size_t classes = 0;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * classes, classes}; }
};

enum class LossKind { cross_entropy, squared };

struct LossOptions {
  LossKind kind = LossKind::cross_entropy;
  double l1_lambda = 0.0;
  bool negate = false;
};

struct LossAndGrads {
  double loss = 0.0;
  std::vector<double> grads;
};

/// Activations are computed in double precision from the float parameters.
Logits forward(const Model& model, std::span<const float> features, std::size_t count);
inline Logits forward(const Model& model, const ExampleBatch& batch) {
  return forward(model, batch.features, batch.size);
}

/// Mean loss over the batch plus l1_lambda * ||params||_1, and its gradient.
/// Squared loss targets one-hot labels; with a single output the label value
/// itself is the target. With `negate` the gradient (not the loss) is flipped.
LossAndGrads loss_and_grads(const Model& model, const LabeledBatch& batch, const LossOptions& opts = {});

/// Same objective evaluated at an explicit double-precision parameter vector.
double loss_at(const Model& model, std::span<const double> params, const LabeledBatch& batch,
               const LossOptions& opts = {});

/// Central difference (L(theta + eps e_j) - L(theta - eps e_j)) / (2 eps), in double.
double finite_diff_grad(const Model& model, const LabeledBatch& batch, std::size_t j, double eps,
                        const LossOptions& opts = {});

/// Argmax per row; ties go to the lowest class index.
std::vector<int> argmax(const Logits& logits);

/// Softmax probabilities per row (max-shifted).
std::vector<double> softmax(const Logits& logits);

/// Smallest |pre-activation| seen by any ReLU on this batch. Gradient checks
/// use it to avoid evaluating finite differences across a kink.
double min_relu_margin(const Model& model, std::span<const float> features, std::size_t count);

}  // namespace locun::nn
