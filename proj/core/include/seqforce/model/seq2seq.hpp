// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "seqforce/autodiff/ops.hpp"
#include "seqforce/model/params.hpp"
#include "seqforce/tasks/aligned_pair.hpp"

namespace seqforce::model {

using tasks::Token;

/// h_{1:L} plus the attention key projection h W_key, computed once per source.
struct EncoderStates {
  ad::Var h;     // (L, H)
  ad::Var keys;  // (L, A)
  std::size_t length = 0;
};

/// Recurrent decoder memory; `top()` is the state vector s_t seen by attention and heads.
struct DecoderState {
  std::vector<ad::Var> layers;
  ad::Var top() const { return layers.back(); }
};

/// The y_{t-1} fed to a decoder step: the start symbol, a token or a frame.
struct HistoryInput {
  enum class Kind { Start, Token, Frame } kind = Kind::Start;
  Token token = 0;
  std::vector<double> frame;

  static HistoryInput start() { return {}; }
  static HistoryInput of_token(Token t) { return {Kind::Token, t, {}}; }
  static HistoryInput of_frame(std::vector<double> f) { return {Kind::Frame, 0, std::move(f)}; }
};

/// One GRU update h' = GRU(h, x) with gate order [reset, update, candidate].
ad::Var gru_step(const GruWeights<ad::Var>& g, ad::Var x, ad::Var h);

/// Embedding + bidirectional GRU. Throws DataError on out-of-vocabulary tokens or a
/// length outside [1, max_source_length].
EncoderStates encode(const BoundParams& p, std::span<const Token> x);

/// s_0 = 0 for every layer.
DecoderState initial_state(ad::Tape& tape, const BoundParams& p);

/// s_t = GRU(s_{t-1}, embed(y_{t-1})) or GRU(s_{t-1}, prenet(y_{t-1})).
DecoderState decoder_step(const BoundParams& p, const DecoderState& prev, const HistoryInput& y_prev);

/// Uniform alignment used as alpha_0.
ad::Var initial_alignment(ad::Tape& tape, std::size_t length);

/// Hybrid attention: score_l = v . tanh(W s_t + V h_l + U f_l + b), f = conv1d(alpha_prev).
ad::Var attend(const BoundParams& p, ad::Var s_t, const EncoderStates& enc, ad::Var alpha_prev);

/// c = sum_l alpha_l h_l.
ad::Var context(ad::Var alpha, ad::Var h);

/// Log-probabilities over tgt_vocab + 1 symbols (last is end-of-sequence).
ad::Var output_head_categorical(const BoundParams& p, ad::Var s_t, ad::Var c_t);

/// Mode of the Laplace output distribution: an (r, D) block of frames.
ad::Var output_head_continuous(const BoundParams& p, ad::Var s_t, ad::Var c_t);

/// Stop logit of the continuous head. Its features are detached, so only the stop
/// weights receive gradient from it.
ad::Var stop_logit(const BoundParams& p, ad::Var s_t, ad::Var c_t);

/// One full decode step.
struct StepOutput {
  DecoderState state;
  ad::Var alpha;    // the model's own alignment
  ad::Var context;  // built from `context_alignment` when given, else from `alpha`
  ad::Var output;   // log-probs or frame block
  std::optional<ad::Var> stop;
};

StepOutput decode_step(const BoundParams& p, const EncoderStates& enc, const DecoderState& prev,
                       const HistoryInput& y_prev, ad::Var alpha_prev,
                       std::optional<ad::Var> context_alignment = std::nullopt);

/// Decode steps needed for a target: T + 1 (with EOS) or ceil(T / r).
std::size_t decode_steps(const ModelConfig& cfg, const tasks::AlignedPair& pair);

/// History item the reference supplies at step t (t >= 1).
HistoryInput reference_history(const ModelConfig& cfg, const tasks::AlignedPair& pair, std::size_t t);

}  // namespace seqforce::model
