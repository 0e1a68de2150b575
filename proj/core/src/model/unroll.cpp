// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/model/unroll.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqforce/errors.hpp"

namespace seqforce::model {

ad::Var Unrolled::alignment() const {
  std::vector<ad::Var> rows;
  rows.reserve(steps.size());
  for (const auto& s : steps) rows.push_back(s.alpha);
  return ad::stack(rows);
}

ad::Tensor Unrolled::alignment_values() const {
  ad::Tensor out({steps.size(), enc.length});
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const auto a = steps[t].alpha.value();
    std::copy(a.begin(), a.end(), out.row(t).begin());
  }
  return out;
}

ExamplePlan uniform_plan(std::size_t steps, HistorySource source) {
  ExamplePlan plan;
  plan.history.assign(steps, source);
  return plan;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

HistoryInput select_history(const ModelConfig& cfg, const StepOutput& out, Selection selection, Rng* rng) {
  const auto values = out.output.value();
  if (!cfg.categorical()) {
    const std::size_t D = cfg.frame_dim;
    const auto last = values.subspan(values.size() - D, D);
    return HistoryInput::of_frame(std::vector<double>(last.begin(), last.end()));
  }
  if (selection == Selection::Argmax) return HistoryInput::of_token(argmax(values));
  if (rng == nullptr) throw ContractError("select_history: sampling requires an rng");
  const double u = uniform01(*rng);
  double cumulative = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    cumulative += std::exp(values[k]);
    if (u < cumulative) return HistoryInput::of_token(k);
  }
  return HistoryInput::of_token(values.size() - 1);
}

Unrolled unroll(const BoundParams& p, const tasks::AlignedPair& pair, const ExamplePlan& plan, Selection selection,
                Rng* rng) {
  const auto& cfg = *p.config;
  const std::size_t steps = plan.history.size();
  if (steps == 0) throw ContractError("unroll: plan has no steps");
  if (!plan.context_alignment.empty() && plan.context_alignment.size() != steps) {
    throw ContractError("unroll: context alignment has " + std::to_string(plan.context_alignment.size()) +
                        " rows for " + std::to_string(steps) + " steps");
  }
  if (plan.replay != nullptr && plan.replay->inputs.size() != steps) {
    throw ContractError("unroll: replay trace length does not match the plan");
  }
  auto& tape = *p.leaves.front().tape();
  Unrolled u;
  u.enc = encode(p, pair.src);
  u.steps.reserve(steps);
  u.trace.sources = plan.history;
  u.trace.inputs.reserve(steps);

  DecoderState state = initial_state(tape, p);
  ad::Var alpha = initial_alignment(tape, u.enc.length);
  HistoryInput generated = HistoryInput::start();
  for (std::size_t t = 0; t < steps; ++t) {
    HistoryInput y_prev;
    if (plan.replay != nullptr) {
      y_prev = plan.replay->inputs[t];
    } else if (t == 0) {
      y_prev = HistoryInput::start();
    } else if (plan.history[t] == HistorySource::Reference) {
      y_prev = reference_history(cfg, pair, t);
    } else {
      y_prev = generated;
    }
    std::optional<ad::Var> ctx;
    if (!plan.context_alignment.empty()) {
      ctx = plan.context_alignment[t];
      if (ctx->shape() != ad::Shape{u.enc.length}) {
        throw ContractError("unroll: context alignment row " + std::to_string(t) + " has shape " +
                            ad::to_string(ctx->shape()) + ", source length is " + std::to_string(u.enc.length));
      }
    }
    auto out = decode_step(p, u.enc, state, y_prev, alpha, ctx);
    if (plan.replay == nullptr && t + 1 < steps) generated = select_history(cfg, out, selection, rng);
    state = out.state;
    alpha = out.alpha;
    u.trace.inputs.push_back(std::move(y_prev));
    u.steps.push_back(std::move(out));
  }
  return u;
}

}  // namespace seqforce::model
