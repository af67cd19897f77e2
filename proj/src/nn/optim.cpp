// SPDX-License-Identifier: Apache-2.0
#include "locun/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "locun/error.hpp"
#include "locun/rng.hpp"

namespace locun::nn {

OptimizerState OptimizerState::for_model(const Model& model, double momentum, double weight_decay) {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  return OptimizerState{std::vector<float>(model.num_params(), 0.0f), momentum, weight_decay};
}

void OptimizerState::reset_velocity(const Mask& mask) {
  if (mask.size() != velocity.size()) throw DimensionError("mask length does not match optimizer state");
  for (std::size_t j = 0; j < velocity.size(); ++j)
    if (mask.bits[j]) velocity[j] = 0.0f;
}

void masked_sgd_step(Model& model, OptimizerState& state, std::span<const double> grads, const Mask& mask, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive, got " + std::to_string(lr));
  const std::size_t p = model.num_params();
  if (grads.size() != p || mask.size() != p || state.velocity.size() != p) {
    throw DimensionError("gradient, mask and velocity must all have length p");
  }
  auto theta = model.params();
  for (std::size_t j = 0; j < p; ++j) {
    if (!mask.bits[j]) continue;
    const double g = grads[j] + state.weight_decay * theta[j];
    const double v = state.momentum * state.velocity[j] + g;
    state.velocity[j] = static_cast<float>(v);
    theta[j] = static_cast<float>(theta[j] - lr * v);
  }
}

const char* to_string(ScheduleKind kind) noexcept { return kind == ScheduleKind::constant ? "constant" : "cosine"; }

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "constant") return ScheduleKind::constant;
  if (name == "cosine") return ScheduleKind::cosine;
  throw ConfigError("unknown schedule '" + name + "'");
}

double schedule_lr(const Schedule& sched, std::int64_t step) {
  if (sched.kind == ScheduleKind::constant) return sched.lr_init;
  const double eta_min = sched.eta_min_frac * sched.lr_init;
  if (sched.total_steps <= 0 || step >= sched.total_steps) return eta_min;
  const double t = static_cast<double>(std::max<std::int64_t>(step, 0)) / static_cast<double>(sched.total_steps);
  return eta_min + (sched.lr_init - eta_min) * (1.0 + std::cos(std::numbers::pi * t)) / 2.0;
}

namespace {

// Deterministic uniform draw in [-1, 1) for (seed, j).
double unit_draw(std::uint64_t seed, std::size_t j) {
  const std::uint64_t bits = mix64(derive_seed(seed, {static_cast<std::uint64_t>(Stream::init)}) ^ mix64(j));
  return static_cast<double>(bits >> 11) * 0x1.0p-52 - 1.0;
}

void draw(Model& model, const Mask* mask, std::uint64_t seed) {
  auto theta = model.params();
  for (std::size_t li : model.parameterized_layers()) {
    const LayerSpec& l = model.layer(li);
    const double bound = std::sqrt(6.0 / static_cast<double>(l.fan_in()));
    const std::size_t weights_per_group = l.fan_in();
    for (const ParamRange& g : model.neuron_groups(li)) {
      for (std::size_t j = g.begin; j < g.end; ++j) {
        if (mask && !mask->bits[j]) continue;
        const bool is_bias = j - g.begin >= weights_per_group;
        theta[j] = is_bias ? 0.0f : static_cast<float>(bound * unit_draw(seed, j));
      }
    }
  }
}

}  // namespace

void init_params(Model& model, std::uint64_t seed) { draw(model, nullptr, seed); }

void reinit_params(Model& model, const Mask& mask, std::uint64_t seed) {
  if (mask.size() != model.num_params()) throw DimensionError("mask length does not match model");
  draw(model, &mask, seed);
}

}  // namespace locun::nn
