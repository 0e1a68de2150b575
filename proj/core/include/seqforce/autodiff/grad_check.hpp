// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "seqforce/autodiff/tape.hpp"

namespace seqforce::ad {

/// A scalar-valued tensor program: receives one leaf per input, returns the loss.
using Program = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  // Location and values of the worst component.
  std::size_t input = 0;
  std::size_t component = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t components_checked = 0;
};

/// Compares reverse-mode gradients of `f` against fourth-order central differences.
///
/// Relative error per component is |a - n| / max(|a|, |n|, 1e-8). Inputs are perturbed
/// in place and restored bit-for-bit. `h` must lie in [1e-7, 1e-3].
GradCheckResult grad_check(const Program& f, std::span<Tensor* const> inputs, double h = 1e-5);

/// Convenience overload over owned inputs.
GradCheckResult grad_check(const Program& f, std::vector<Tensor> inputs, double h = 1e-5);

}  // namespace seqforce::ad
