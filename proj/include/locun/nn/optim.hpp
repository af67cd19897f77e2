// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "locun/nn/mask.hpp"
#include "locun/nn/model.hpp"

namespace locun::nn {

struct OptimizerState {
  std::vector<float> velocity;
  double momentum = 0.9;
  double weight_decay = 0.0;

  static OptimizerState for_model(const Model& model, double momentum = 0.9, double weight_decay = 0.0);
  /// Zeroes velocity wherever the mask is set (after reinitialization).
  void reset_velocity(const Mask& mask);
};

/// Momentum SGD restricted to mask=1 entries:
///   v <- momentum * v + (g + weight_decay * theta);  theta <- theta - lr * v.
/// Entries with mask=0 (both parameter and velocity) are not written.
void masked_sgd_step(Model& model, OptimizerState& state, std::span<const double> grads, const Mask& mask, double lr);

enum class ScheduleKind { constant, cosine };

struct Schedule {
  ScheduleKind kind = ScheduleKind::cosine;
  double lr_init = 0.1;
  double eta_min_frac = 0.01;
  std::int64_t total_steps = 1;
};

const char* to_string(ScheduleKind kind) noexcept;
ScheduleKind schedule_kind_from_string(const std::string& name);

/// Learning rate at `step`. Steps past total_steps clamp to the floor.
double schedule_lr(const Schedule& sched, std::int64_t step);

/// Kaiming-uniform fan-in weights (bound sqrt(6 / fan_in)), zero biases.
/// The value drawn for parameter j depends only on (seed, j).
void init_params(Model& model, std::uint64_t seed);

/// Redraws masked parameters from the initialization distribution; others untouched.
/// Velocity is owned by the caller and must be reset separately.
void reinit_params(Model& model, const Mask& mask, std::uint64_t seed);

/// Text label recorded in checkpoints.
inline constexpr const char* kInitDescription = "kaiming_uniform_fan_in(bound=sqrt(6/fan_in)); bias=0";

}  // namespace locun::nn
