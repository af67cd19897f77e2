// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "locun/data/dataset.hpp"
#include "locun/nn/engine.hpp"
#include "locun/nn/mask.hpp"
#include "locun/nn/model.hpp"
#include "locun/nn/optim.hpp"

namespace locun::unlearn {

enum class Algorithm { rft, finetune, neggrad, neggrad_plus, random_label, l1_sparse, retrain_oracle };

const char* to_string(Algorithm a) noexcept;
Algorithm algorithm_from_string(const std::string& name);

/// Per-algorithm schedule shape: cosine with floor 0.01 for finetune,
/// l1_sparse, rft and retraining; cosine with floor 0.5 for random_label;
/// constant for neggrad and neggrad_plus.
nn::Schedule default_schedule(Algorithm a, double lr);

struct UnlearnConfig {
  Algorithm algorithm = Algorithm::finetune;
  std::size_t epochs = 5;
  /// total_steps is derived from epochs and data size when the run starts.
  nn::Schedule schedule;
  std::size_t batch_size = 128;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double l1_lambda = 0.0;
  double beta = 0.95;
  std::uint64_t seed = 0;
  std::optional<Mask> mask;
  nn::LossKind loss = nn::LossKind::cross_entropy;

  /// Throws ConfigError for fields that do not fit the algorithm.
  void validate() const;
};

struct UnlearnOutcome {
  nn::Model model;
  std::size_t steps_taken = 0;
  std::vector<double> loss_trace;
  UnlearnConfig config_echo;
  std::chrono::duration<double> wall_time{0};
};

/// Reinitializes the masked parameters, then trains mask plus classifier layer on retain.
UnlearnOutcome reset_finetune(const nn::Model& model, const Mask& mask, const data::DataView& retain,
                              const UnlearnConfig& cfg);
UnlearnOutcome finetune(const nn::Model& model, const data::DataView& retain, const UnlearnConfig& cfg);
/// Gradient ascent on the forget loss.
UnlearnOutcome neggrad(const nn::Model& model, const data::DataView& forget, const UnlearnConfig& cfg);
/// Each step pairs a retain batch with the next forget batch (the forget set
/// is cycled); the update direction is beta * g_retain - (1 - beta) * g_forget.
UnlearnOutcome neggrad_plus(const nn::Model& model, const data::DataView& retain, const data::DataView& forget,
                            const UnlearnConfig& cfg);
/// Relabels the forget set once, then trains on retain plus the relabeled forget set.
UnlearnOutcome random_label(const nn::Model& model, const data::DataView& retain, const data::DataView& forget,
                            const UnlearnConfig& cfg);
UnlearnOutcome l1_sparse(const nn::Model& model, const data::DataView& retain, const UnlearnConfig& cfg);

/// Fresh model from `arch`, initialized with cfg.seed and trained on `data`.
/// Used both for the original model and, on the retain set, for the oracle.
UnlearnOutcome train_from_scratch(const nn::ArchSpec& arch, const data::DataView& data, const UnlearnConfig& cfg);
nn::Model retrain_oracle(const data::DataView& retain, const nn::ArchSpec& arch, const UnlearnConfig& cfg);

/// Oracle recipe derived from the original one: epochs / 2.5 (at least 1), half the learning rate.
UnlearnConfig oracle_config(const UnlearnConfig& original);

/// Forget labels redrawn uniformly from the other C - 1 classes.
data::DataView relabel(const data::DataView& forget, std::size_t classes, std::uint64_t seed);

/// Dispatches on cfg.algorithm; rft requires cfg.mask.
UnlearnOutcome run(const nn::Model& model, const data::DataView& retain, const data::DataView& forget,
                   const UnlearnConfig& cfg);

/// Parameters an algorithm may touch beyond its mask: the classifier layer for rft, nothing otherwise.
Mask exempt_set(Algorithm a, const nn::Model& model);

}  // namespace locun::unlearn
