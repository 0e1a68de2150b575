// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/regimes/optimizer.hpp"

#include <cmath>

#include "seqforce/errors.hpp"

namespace seqforce::regimes {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ContractError("betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ContractError("adam epsilon must be > 0");
  if (!(clip_norm >= 0.0)) throw ContractError("clip_norm must be >= 0");
}

AdamState AdamState::for_params(std::span<ad::Tensor* const> params) {
  AdamState s;
  for (const auto* p : params) {
    s.m.emplace_back(p->size(), 0.0);
    s.v.emplace_back(p->size(), 0.0);
  }
  return s;
}

double global_grad_norm(std::span<ad::Tensor* const> params) {
  double total = 0.0;
  for (const auto* p : params) {
    if (!p->has_grad()) continue;
    for (double g : p->grad()) total += g * g;
  }
  return std::sqrt(total);
}

double clip_gradients(std::span<ad::Tensor* const> params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto* p : params) {
      if (!p->has_grad()) continue;
      std::vector<double> scaled(p->grad().begin(), p->grad().end());
      for (auto& g : scaled) g *= factor;
      p->zero_grad();
      p->accumulate_grad(scaled);
    }
  }
  return norm;
}

void adam_update(std::span<ad::Tensor* const> params, AdamState& state, const OptimizerConfig& config) {
  if (state.m.size() != params.size()) throw ContractError("adam state does not match the parameter list");
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    if (state.m[i].size() != p->size()) throw ContractError("adam state does not match the parameter shapes");
    if (!p->has_grad()) continue;
    const auto g = p->grad();
    auto values = p->values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      values[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

}  // namespace seqforce::regimes
