// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/regimes/train_loop.hpp"

#include <cmath>
#include <numeric>

#include "seqforce/errors.hpp"
#include "seqforce/random.hpp"
#include "seqforce/regimes/steps.hpp"

namespace seqforce::regimes {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ContractError("batch_size must be >= 1");
  optimizer.validate();
}

TrainState TrainState::fresh(model::ModelParams params, const RegimeConfig& regime, std::uint64_t seed) {
  TrainState s;
  s.params = std::move(params);
  s.adam = AdamState::for_params(s.params.tensors());
  if (const auto* pf = std::get_if<ProfessorForcing>(&regime)) {
    s.discriminator =
        DiscriminatorParams::init(behavior_dim(s.params.config), pf->discriminator_hidden, derive_seed(seed, {0xd15c}));
    s.discriminator_adam = AdamState::for_params(s.discriminator->tensors());
  }
  return s;
}

std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size) {
  return (dataset_size + batch_size - 1) / batch_size;
}

std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed, {0xe90c, epoch});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

namespace {

bool finite(const StepResult& r) {
  auto ok = [](const std::optional<double>& v) { return !v || std::isfinite(*v); };
  return std::isfinite(r.loss) && std::isfinite(r.loss_y) && ok(r.loss_alpha) && ok(r.loss_stop) &&
         ok(r.loss_adversarial) && ok(r.disc_loss);
}

}  // namespace

void train_loop(TrainState& state, const tasks::Dataset& dataset, const RegimeConfig& regime,
                const TrainConfig& config, const model::ModelParams* teacher, const metrics::MetricSink& sink,
                std::optional<std::size_t> stop_at_step) {
  config.validate();
  validate(regime);
  if (dataset.empty() || config.epochs == 0) return;
  if (needs_discriminator(regime) && !state.discriminator) {
    throw ContractError("train state for professor forcing has no discriminator");
  }
  const std::size_t per_epoch = steps_per_epoch(dataset.size(), config.batch_size);
  const std::size_t total = per_epoch * config.epochs;
  const std::size_t end = stop_at_step ? std::min(total, *stop_at_step) : total;

  std::vector<std::size_t> order;
  std::size_t order_epoch = static_cast<std::size_t>(-1);
  while (state.step < end) {
    const std::size_t epoch = state.step / per_epoch;
    const std::size_t pos = state.step % per_epoch;
    if (epoch != order_epoch) {
      order = epoch_permutation(config.seed, epoch, dataset.size());
      order_epoch = epoch;
    }
    tasks::Dataset batch;
    for (std::size_t i = pos * config.batch_size; i < std::min(dataset.size(), (pos + 1) * config.batch_size); ++i) {
      batch.push_back(dataset[order[i]]);
    }

    TrainState before = state;
    auto params = state.params.tensors();
    state.params.zero_grad();
    std::vector<ad::Tensor*> disc_params;
    if (state.discriminator) {
      disc_params = state.discriminator->tensors();
      state.discriminator->zero_grad();
    }
    StepResult r;
    try {
      r = regime_step(regime, batch, state.params, {teacher, state.discriminator ? &*state.discriminator : nullptr,
                                                    state.step, config.seed});
    } catch (const NumericError& e) {
      before.params.clear_grad();
      throw DivergenceError("divergence at step " + std::to_string(before.step) + ": " + e.what(), std::move(before));
    }
    if (!finite(r)) {
      before.params.clear_grad();
      throw DivergenceError("divergence at step " + std::to_string(before.step) + ": non-finite loss",
                            std::move(before));
    }
    const double grad_norm = clip_gradients(params, config.optimizer.clip_norm);
    adam_update(params, state.adam, config.optimizer);
    if (state.discriminator) {
      clip_gradients(disc_params, config.optimizer.clip_norm);
      adam_update(disc_params, *state.discriminator_adam, config.optimizer);
    }
    state.params.clear_grad();
    if (state.discriminator) {
      for (auto* t : disc_params) t->clear_grad();
    }
    if (!state.params.all_finite()) {
      before.params.clear_grad();
      throw DivergenceError("divergence at step " + std::to_string(before.step) + ": non-finite parameters",
                            std::move(before));
    }

    if (sink) {
      const std::size_t step = state.step;
      auto emit = [&](const char* name, double value) {
        metrics::MetricRecord rec;
        rec.name = name;
        rec.value = value;
        rec.step = step;
        rec.extra["epoch"] = static_cast<double>(epoch);
        rec.extra["regime"] = std::string(regime_name(regime));
        sink(rec);
      };
      emit("loss", r.loss);
      emit("loss_y", r.loss_y);
      if (r.loss_alpha) emit("loss_alpha", *r.loss_alpha);
      if (r.loss_stop) emit("loss_stop", *r.loss_stop);
      if (r.loss_adversarial) emit("loss_adversarial", *r.loss_adversarial);
      if (r.disc_loss) emit("disc_loss", *r.disc_loss);
      if (r.epsilon) emit("epsilon", *r.epsilon);
      emit("grad_norm", grad_norm);
    }
    ++state.step;
  }
}

}  // namespace seqforce::regimes
