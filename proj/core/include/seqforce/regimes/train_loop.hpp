// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqforce/metrics/metric_record.hpp"
#include "seqforce/model/params.hpp"
#include "seqforce/regimes/discriminator.hpp"
#include "seqforce/regimes/optimizer.hpp"
#include "seqforce/regimes/regime_config.hpp"
#include "seqforce/tasks/aligned_pair.hpp"

namespace seqforce::regimes {

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 16;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Everything that evolves during training. Copyable snapshot; resuming from a saved
/// state reproduces the uninterrupted run exactly.
struct TrainState {
  model::ModelParams params;
  AdamState adam;
  std::optional<DiscriminatorParams> discriminator;
  std::optional<AdamState> discriminator_adam;
  std::size_t step = 0;

  /// Fresh state for a regime: adds a discriminator when the regime needs one.
  static TrainState fresh(model::ModelParams params, const RegimeConfig& regime, std::uint64_t seed);

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

/// Loss became non-finite. Carries the state from before the failing step.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, TrainState snapshot)
      : std::runtime_error(what), snapshot_(std::move(snapshot)) {}
  const TrainState& snapshot() const noexcept { return snapshot_; }

 private:
  TrainState snapshot_;
};

std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size);

/// Order of the examples in `epoch`; a function of (seed, epoch) only.
std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::size_t epoch, std::size_t n);

/// Trains until `config.epochs` epochs are complete, or until `state.step` reaches
/// `stop_at_step`. Emits per-step records ("loss", "loss_y", "grad_norm", ...) to `sink`.
void train_loop(TrainState& state, const tasks::Dataset& dataset, const RegimeConfig& regime,
                const TrainConfig& config, const model::ModelParams* teacher, const metrics::MetricSink& sink,
                std::optional<std::size_t> stop_at_step = std::nullopt);

}  // namespace seqforce::regimes
