// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "seqforce/errors.hpp"

namespace seqforce::ad {

namespace {

double evaluate(const Program& f, std::span<Tensor* const> inputs) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (auto* t : inputs) leaves.push_back(tape.leaf(*t, false));
  return f(tape, leaves).item();
}

}  // namespace

GradCheckResult grad_check(const Program& f, std::span<Tensor* const> inputs, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw ContractError("grad_check step must lie in [1e-7, 1e-3]");

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (auto* t : inputs) leaves.push_back(tape.leaf(*t, true));
    const Var loss = f(tape, leaves);
    if (loss.size() != 1) throw ContractError("grad_check program must return a single-element loss");
    tape.backward(loss);
    for (const auto& v : leaves) analytic.push_back(tape.grad(v));
  }

  GradCheckResult result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto values = inputs[i]->values();
    for (std::size_t c = 0; c < values.size(); ++c) {
      const double saved = values[c];
      auto at = [&](double offset) {
        values[c] = saved + offset;
        const double v = evaluate(f, inputs);
        values[c] = saved;
        return v;
      };
      const double near = at(h) - at(-h);
      const double far = at(2 * h) - at(-2 * h);
      const double numeric = (8 * near - far) / (12 * h);
      const double a = analytic[i][c];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double err = std::fabs(a - numeric) / denom;
      ++result.components_checked;
      if (err > result.max_relative_error || result.components_checked == 1) {
        result.max_relative_error = err;
        result.input = i;
        result.component = c;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

GradCheckResult grad_check(const Program& f, std::vector<Tensor> inputs, double h) {
  std::vector<Tensor*> ptrs;
  ptrs.reserve(inputs.size());
  for (auto& t : inputs) ptrs.push_back(&t);
  return grad_check(f, ptrs, h);
}

}  // namespace seqforce::ad
