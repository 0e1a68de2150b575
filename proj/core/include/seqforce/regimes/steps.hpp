// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqforce/autodiff/grad_check.hpp"
#include "seqforce/model/params.hpp"
#include "seqforce/regimes/discriminator.hpp"
#include "seqforce/regimes/regime_config.hpp"
#include "seqforce/tasks/aligned_pair.hpp"

namespace seqforce::regimes {

using Batch = std::span<const tasks::AlignedPair>;

/// Losses of one regime step. Every loss is a batch mean of per-example means over steps.
struct StepResult {
  /// Objective minimized by the model parameters. Excludes the stop term.
  double loss = 0.0;
  /// Output loss: NLL per token (with EOS) or L1 per frame.
  double loss_y = 0.0;
  std::optional<double> loss_alpha;
  /// Binary cross-entropy of the stop predictor (continuous models).
  std::optional<double> loss_stop;
  /// Weighted adversarial part of the professor-forcing objective.
  std::optional<double> loss_adversarial;
  std::optional<double> disc_loss;
  std::optional<double> epsilon;
};

/// Everything a step needs beyond the model: the attention-forcing teacher, the
/// discriminator, and the (seed, step) pair that fixes all randomness of the step.
struct RegimeInputs {
  const model::ModelParams* teacher = nullptr;
  DiscriminatorParams* discriminator = nullptr;
  std::size_t step_index = 0;
  std::uint64_t seed = 0;
};

/// Runs one regime on a batch and adds the gradients to `params` (and the discriminator).
StepResult regime_step(const RegimeConfig& config, Batch batch, model::ModelParams& params,
                       const RegimeInputs& inputs);

StepResult teacher_forcing_step(Batch batch, model::ModelParams& params);
StepResult free_running_step(Batch batch, model::ModelParams& params, Selection mode, std::uint64_t seed = 0,
                             std::size_t step_index = 0);
StepResult scheduled_sampling_token_step(Batch batch, model::ModelParams& params, std::size_t step_index,
                                         const ScheduleSpec& schedule, std::uint64_t seed,
                                         Selection mode = Selection::Argmax);
StepResult scheduled_sampling_seq_step(Batch batch, model::ModelParams& params, std::size_t step_index,
                                       const ScheduleSpec& schedule, std::uint64_t seed,
                                       Selection mode = Selection::Argmax);
/// `teacher` may be null only in tied mode.
StepResult attention_forcing_step(Batch batch, model::ModelParams& student, const model::ModelParams* teacher,
                                  const AttentionForcing& config, std::uint64_t seed = 0,
                                  std::size_t step_index = 0);
StepResult modified_attention_forcing_step(Batch batch, model::ModelParams& student,
                                           const model::ModelParams* teacher,
                                           const ModifiedAttentionForcing& config);
StepResult professor_forcing_step(Batch batch, model::ModelParams& generator, DiscriminatorParams& discriminator,
                                  const ProfessorForcing& config, std::uint64_t seed = 0,
                                  std::size_t step_index = 0);

/// sum_t sum_l ref log(ref / gen) over the rows of two alignment matrices, both clamped at 1e-12.
double alignment_kl_loss(const ad::Tensor& alpha_ref, const ad::Tensor& alpha_gen);
/// Batch form: the per-example sums averaged over examples.
double alignment_kl_loss(std::span<const ad::Tensor> alpha_ref, std::span<const ad::Tensor> alpha_gen);
/// Training form: per-step mean KL of one example, differentiable in both arguments.
ad::Var alignment_kl(ad::Var alpha_ref, ad::Var alpha_gen);

/// Random streams of a step: coins decide history sources, samples choose tokens.
Rng coin_rng(std::uint64_t seed, std::size_t step_index);
Rng sample_rng(std::uint64_t seed, std::size_t step_index);

/// Per-sequence coins of sequence-level scheduled sampling; true selects the reference.
std::vector<bool> sequence_coins(std::uint64_t seed, std::size_t step_index, std::size_t batch_size,
                                 double epsilon);

struct RegimeGradCheck {
  std::string name;
  ad::GradCheckResult result;
};

/// Finite-difference checks of every differentiable objective of a regime with all
/// data-dependent history choices replayed from one forward pass. Produces checks named
/// "<regime>/model", "<regime>/stop" (continuous) and "pf/discriminator".
std::vector<RegimeGradCheck> grad_check_regime(const RegimeConfig& config, Batch batch, model::ModelParams& params,
                                               const RegimeInputs& inputs, double h = 1e-5);

}  // namespace seqforce::regimes
