// SPDX-License-Identifier: Apache-2.0
#include "locun/unlearning/unlearn.hpp"

#include <algorithm>
#include <cmath>

#include "locun/error.hpp"
#include "locun/rng.hpp"

namespace locun::unlearn {

namespace {

constexpr Algorithm kAll[] = {Algorithm::rft,          Algorithm::finetune,  Algorithm::neggrad,
                              Algorithm::neggrad_plus, Algorithm::random_label, Algorithm::l1_sparse,
                              Algorithm::retrain_oracle};

std::size_t steps_per_epoch(std::size_t n, std::size_t batch) { return (n + batch - 1) / batch; }

using Clock = std::chrono::steady_clock;

// Shuffled mini-batch descent over `data`. With a second view, each step also
// takes the next batch of it and mixes the gradients as in NegGrad+.
UnlearnOutcome descend(nn::Model model, const Mask& update, const data::DataView& data, const UnlearnConfig& cfg,
                       const nn::LossOptions& lo, const data::DataView* ascend = nullptr) {
  const auto t0 = Clock::now();
  UnlearnOutcome out;
  out.config_echo = cfg;
  if (cfg.epochs == 0) {
    out.model = std::move(model);
    out.wall_time = Clock::now() - t0;
    return out;
  }
  if (data.empty()) throw ValidationError(std::string(to_string(cfg.algorithm)) + ": training data is empty");
  if (ascend && ascend->empty()) throw ValidationError("neggrad_plus: forget set is empty");

  const std::size_t per_epoch = steps_per_epoch(data.size(), cfg.batch_size);
  nn::Schedule sched = cfg.schedule;
  sched.total_steps = static_cast<std::int64_t>(per_epoch * cfg.epochs);
  out.config_echo.schedule = sched;
  nn::OptimizerState state = nn::OptimizerState::for_model(model, cfg.momentum, cfg.weight_decay);

  std::vector<std::size_t> asc_order;
  std::size_t asc_pos = 0;
  std::uint64_t asc_cycle = 0;
  std::vector<std::size_t> positions;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = data::epoch_order(data.size(), cfg.seed, epoch);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      positions.assign(order.begin() + static_cast<std::ptrdiff_t>(b),
                       order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + cfg.batch_size)));
      nn::LossAndGrads lg = nn::loss_and_grads(model, data.gather(positions), lo);
      if (ascend) {
        positions.clear();
        while (positions.size() < cfg.batch_size && positions.size() < ascend->size()) {
          if (asc_pos == asc_order.size()) {
            asc_order = data::epoch_order(ascend->size(), derive_seed(cfg.seed, {static_cast<std::uint64_t>(Stream::forget_cycle)}),
                                          asc_cycle++);
            asc_pos = 0;
          }
          positions.push_back(asc_order[asc_pos++]);
        }
        const nn::LossAndGrads lf = nn::loss_and_grads(model, ascend->gather(positions), lo);
        for (std::size_t j = 0; j < lg.grads.size(); ++j) {
          lg.grads[j] = cfg.beta * lg.grads[j] - (1.0 - cfg.beta) * lf.grads[j];
        }
        lg.loss = cfg.beta * lg.loss - (1.0 - cfg.beta) * lf.loss;
      }
      nn::masked_sgd_step(model, state, lg.grads, update, nn::schedule_lr(sched, static_cast<std::int64_t>(out.steps_taken)));
      out.loss_trace.push_back(lg.loss);
      ++out.steps_taken;
    }
  }
  out.model = std::move(model);
  out.wall_time = Clock::now() - t0;
  return out;
}

Mask update_mask(const UnlearnConfig& cfg, const nn::Model& model) {
  if (!cfg.mask) return Mask::ones(model.num_params(), "full");
  if (cfg.mask->size() != model.num_params()) throw DimensionError("mask length does not match p");
  return *cfg.mask;
}

nn::LossOptions loss_options(const UnlearnConfig& cfg) {
  nn::LossOptions lo;
  lo.kind = cfg.loss;
  return lo;
}

}  // namespace

const char* to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::rft:
      return "rft";
    case Algorithm::finetune:
      return "finetune";
    case Algorithm::neggrad:
      return "neggrad";
    case Algorithm::neggrad_plus:
      return "neggrad_plus";
    case Algorithm::random_label:
      return "random_label";
    case Algorithm::l1_sparse:
      return "l1_sparse";
    case Algorithm::retrain_oracle:
      return "retrain_oracle";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (Algorithm a : kAll)
    if (name == to_string(a)) return a;
  throw ConfigError("unknown algorithm '" + name + "'");
}

nn::Schedule default_schedule(Algorithm a, double lr) {
  nn::Schedule s;
  s.lr_init = lr;
  switch (a) {
    case Algorithm::neggrad:
    case Algorithm::neggrad_plus:
      s.kind = nn::ScheduleKind::constant;
      s.eta_min_frac = 1.0;
      break;
    case Algorithm::random_label:
      s.kind = nn::ScheduleKind::cosine;
      s.eta_min_frac = 0.5;
      break;
    default:
      s.kind = nn::ScheduleKind::cosine;
      s.eta_min_frac = 0.01;
  }
  return s;
}

void UnlearnConfig::validate() const {
  const std::string name = to_string(algorithm);
  if (batch_size == 0) throw ConfigError(name + ": batch_size must be positive");
  if (!(schedule.lr_init > 0.0)) throw ConfigError(name + ": learning rate must be positive");
  if (!(schedule.eta_min_frac >= 0.0 && schedule.eta_min_frac <= 1.0)) {
    throw ConfigError(name + ": eta_min_frac must lie in [0, 1]");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError(name + ": momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError(name + ": weight_decay must be >= 0");
  if (algorithm == Algorithm::l1_sparse) {
    if (!(l1_lambda > 0.0)) throw ConfigError("l1_sparse: l1_lambda must be positive");
  } else if (l1_lambda != 0.0) {
    throw ConfigError(name + ": l1_lambda applies to l1_sparse only");
  }
  if (algorithm == Algorithm::neggrad_plus && !(beta > 0.0 && beta <= 1.0)) {
    throw ConfigError("neggrad_plus: beta must lie in (0, 1]");
  }
  if (algorithm == Algorithm::rft && !mask) throw ConfigError("rft: a mask is required");
}

Mask exempt_set(Algorithm a, const nn::Model& model) {
  Mask m = Mask::zeros(model.num_params(), "exempt");
  if (a == Algorithm::rft) m.set(model.layer_range(model.classifier_layer()));
  return m;
}

UnlearnOutcome reset_finetune(const nn::Model& model, const Mask& mask, const data::DataView& retain,
                              const UnlearnConfig& cfg) {
  UnlearnConfig c = cfg;
  c.algorithm = Algorithm::rft;
  c.mask = mask;
  c.validate();
  if (mask.size() != model.num_params()) throw DimensionError("mask length does not match p");
  nn::Model m = model;
  nn::reinit_params(m, mask, derive_seed(cfg.seed, {static_cast<std::uint64_t>(Stream::init), 1}));
  Mask update = mask;
  update |= exempt_set(Algorithm::rft, model);
  return descend(std::move(m), update, retain, c, loss_options(c));
}

UnlearnOutcome finetune(const nn::Model& model, const data::DataView& retain, const UnlearnConfig& cfg) {
  UnlearnConfig c = cfg;
  c.algorithm = Algorithm::finetune;
  c.validate();
  return descend(model, update_mask(c, model), retain, c, loss_options(c));
}

UnlearnOutcome neggrad(const nn::Model& model, const data::DataView& forget, const UnlearnConfig& cfg) {
  UnlearnConfig c = cfg;
  c.algorithm = Algorithm::neggrad;
  c.validate();
  nn::LossOptions lo = loss_options(c);
  lo.negate = true;
  return descend(model, update_mask(c, model), forget, c, lo);
}

UnlearnOutcome neggrad_plus(const nn::Model& model, const data::DataView& retain, const data::DataView& forget,
                            const UnlearnConfig& cfg) {
  UnlearnConfig c = cfg;
  c.algorithm = Algorithm::neggrad_plus;
  c.validate();
  if (retain.empty() || forget.empty()) throw ValidationError("neggrad_plus needs non-empty retain and forget sets");
  return descend(model, update_mask(c, model), retain, c, loss_options(c), &forget);
}

data::DataView relabel(const data::DataView& forget, std::size_t classes, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("random_label needs at least two classes");
  Rng rng(seed, Stream::relabel);
  std::vector<int> labels(forget.size());
  for (std::size_t i = 0; i < forget.size(); ++i) {
    const auto y = static_cast<std::size_t>(forget.label(i));
    labels[i] = static_cast<int>((y + 1 + rng.index(classes - 1)) % classes);
  }
  return forget.with_labels(std::move(labels));
}

UnlearnOutcome random_label(const nn::Model& model, const data::DataView& retain, const data::DataView& forget,
                            const UnlearnConfig& cfg) {
  UnlearnConfig c = cfg;
  c.algorithm = Algorithm::random_label;
  c.validate();
  const data::DataView mixed = data::DataView::concat(retain, relabel(forget, model.num_classes(), c.seed));
  return descend(model, update_mask(c, model), mixed, c, loss_options(c));
}

UnlearnOutcome l1_sparse(const nn::Model& model, const data::DataView& retain, const UnlearnConfig& cfg) {
  UnlearnConfig c = cfg;
  c.algorithm = Algorithm::l1_sparse;
  c.validate();
  nn::LossOptions lo = loss_options(c);
  lo.l1_lambda = c.l1_lambda;
  return descend(model, update_mask(c, model), retain, c, lo);
}

UnlearnOutcome train_from_scratch(const nn::ArchSpec& arch, const data::DataView& data, const UnlearnConfig& cfg) {
  UnlearnConfig c = cfg;
  c.mask.reset();
  c.l1_lambda = 0.0;
  c.algorithm = Algorithm::retrain_oracle;
  c.validate();
  nn::Model m = nn::Model::build(arch);
  nn::init_params(m, cfg.seed);
  const Mask all = Mask::ones(m.num_params(), "full");
  return descend(std::move(m), all, data, c, loss_options(c));
}

nn::Model retrain_oracle(const data::DataView& retain, const nn::ArchSpec& arch, const UnlearnConfig& cfg) {
  return train_from_scratch(arch, retain, cfg).model;
}

UnlearnConfig oracle_config(const UnlearnConfig& original) {
  UnlearnConfig c = original;
  c.algorithm = Algorithm::retrain_oracle;
  c.epochs = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(original.epochs) / 2.5)));
  c.schedule.lr_init = 0.5 * original.schedule.lr_init;
  return c;
}

UnlearnOutcome run(const nn::Model& model, const data::DataView& retain, const data::DataView& forget,
                   const UnlearnConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::rft:
      if (!cfg.mask) throw ConfigError("rft: a mask is required");
      return reset_finetune(model, *cfg.mask, retain, cfg);
    case Algorithm::finetune:
      return finetune(model, retain, cfg);
    case Algorithm::neggrad:
      return neggrad(model, forget, cfg);
    case Algorithm::neggrad_plus:
      return neggrad_plus(model, retain, forget, cfg);
    case Algorithm::random_label:
      return random_label(model, retain, forget, cfg);
    case Algorithm::l1_sparse:
      return l1_sparse(model, retain, cfg);
    case Algorithm::retrain_oracle: {
      const auto t0 = Clock::now();
      UnlearnOutcome out = train_from_scratch(model.arch(), retain, cfg);
      out.wall_time = Clock::now() - t0;
      return out;
    }
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace locun::unlearn
