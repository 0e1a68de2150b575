// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "seqforce/autodiff/tensor.hpp"

namespace seqforce::regimes {

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; 0 disables clipping.
  double clip_norm = 1.0;

  void validate() const;
  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// First and second moments per parameter tensor plus the update count.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t t = 0;

  static AdamState for_params(std::span<ad::Tensor* const> params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// L2 norm of all gradients together (missing gradients count as zero).
double global_grad_norm(std::span<ad::Tensor* const> params);

/// Rescales every gradient so the global norm is at most `max_norm`. Returns the norm before clipping.
double clip_gradients(std::span<ad::Tensor* const> params, double max_norm);

/// One bias-corrected Adam update from the current gradients.
void adam_update(std::span<ad::Tensor* const> params, AdamState& state, const OptimizerConfig& config);

}  // namespace seqforce::regimes
