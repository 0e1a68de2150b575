// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "seqforce/autodiff/tensor.hpp"
#include "seqforce/model/params.hpp"
#include "seqforce/model/unroll.hpp"
#include "seqforce/tasks/aligned_pair.hpp"

namespace seqforce::decoding {

using tasks::Token;
using tasks::TokenSeq;

/// One generated output with its alignment.
struct Generation {
  /// Tokens without EOS, or a (frames, D) matrix.
  std::variant<TokenSeq, ad::Tensor> output;
  /// One row per decode step (the EOS step included). Empty when no step ran.
  ad::Tensor alignment;
  /// Per-block stop probabilities of a continuous model.
  std::vector<double> stop_probs;
  std::size_t steps = 0;
  bool truncated = false;

  bool discrete() const noexcept { return std::holds_alternative<TokenSeq>(output); }
  const TokenSeq& tokens() const { return std::get<TokenSeq>(output); }
  const ad::Tensor& frames() const { return std::get<ad::Tensor>(output); }
  /// Number of emitted tokens or frames.
  std::size_t length() const;
};

/// Free-running inference. Stops at EOS (discrete), at a stop probability >= 0.5
/// (continuous) or after `max_steps` decode steps, which sets `truncated`.
Generation greedy_decode(const model::ModelParams& params, const TokenSeq& src, std::size_t max_steps);

/// Free-running inference for exactly `steps` decode steps, ignoring EOS and stop.
/// Continuous output is cut to `frames` frames when given.
Generation greedy_decode_fixed(const model::ModelParams& params, const TokenSeq& src, std::size_t steps,
                               std::optional<std::size_t> frames = std::nullopt);

/// Free-running generation with sampled history, used by the Bayes-risk estimator.
Generation sample_decode(const model::ModelParams& params, const TokenSeq& src, std::size_t max_steps, Rng& rng);

struct BeamConfig {
  std::size_t width = 10;
  std::size_t max_steps = 100;
  bool length_normalization = false;
};

struct Hypothesis {
  TokenSeq tokens;  // without EOS
  double log_prob = 0.0;
  /// Ranking score: log_prob, or log_prob per decode step with length normalization.
  double score = 0.0;
  bool finished = false;
  ad::Tensor alignment;
};

/// Keeps the `width` best partial hypotheses per step and stops when all of them are
/// finished or after `max_steps` steps. Equal scores keep the earlier candidate, with
/// candidates ordered by parent rank and then by token index. Returns hypotheses sorted
/// by score, best first.
std::vector<Hypothesis> beam_search_decode(const model::ModelParams& params, const TokenSeq& src,
                                           const BeamConfig& config);

/// Reference history: y'_{1:T} with exactly the reference length, plus alpha.
Generation teacher_forced_generate(const model::ModelParams& params, const tasks::AlignedPair& pair);

/// Generated history with the context built from `alpha_ref`. Produces exactly
/// `target_length` tokens or frames; `alpha_ref` needs one row per decode step.
Generation attention_forced_generate(const model::ModelParams& params, const TokenSeq& src,
                                     const ad::Tensor& alpha_ref, std::size_t target_length);

}  // namespace seqforce::decoding
