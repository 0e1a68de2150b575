// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "seqforce/autodiff/tape.hpp"
#include "seqforce/autodiff/tensor.hpp"

namespace seqforce::model {

enum class OutputKind { Categorical, Continuous };

/// Architecture hyperparameters of one encoder-attention-decoder model.
struct ModelConfig {
  OutputKind output = OutputKind::Categorical;
  std::size_t src_vocab = 20;
  /// Categorical: number of data tokens; the end-of-sequence id is `tgt_vocab`.
  std::size_t tgt_vocab = 20;
  /// Continuous: frame dimension D.
  std::size_t frame_dim = 8;
  /// Frames emitted per decode step (continuous only).
  std::size_t reduction_factor = 1;
  std::size_t embed_dim = 16;
  std::size_t encoder_hidden = 16;  // per direction
  std::size_t encoder_layers = 1;
  std::size_t decoder_hidden = 32;
  std::size_t decoder_layers = 1;
  std::size_t attention_dim = 16;
  std::size_t location_filters = 8;
  std::size_t location_kernel = 11;
  std::size_t prenet_dim = 16;
  std::size_t max_source_length = 64;

  void validate() const;
  bool categorical() const noexcept { return output == OutputKind::Categorical; }
  std::size_t encoder_dim() const noexcept { return 2 * encoder_hidden; }
  std::size_t eos() const noexcept { return tgt_vocab; }
  /// Width of the output head: vocabulary + EOS, or r * D.
  std::size_t output_size() const noexcept;
  std::size_t decoder_input_dim() const noexcept;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <class T>
struct GruWeights {
  T w_input;   // (in, 3H), gate order [reset, update, candidate]
  T w_hidden;  // (H, 3H)
  T b_input;   // (3H)
  T b_hidden;  // (3H)
};

/// Parameter layout shared by the value form (Tensor) and the bound form (Var).
/// Groups: encoder.* (theta_h), decoder.* (theta_s), attention.* (theta_alpha), output.* (theta_y).
template <class T>
struct Weights {
  T src_embed;
  std::vector<GruWeights<T>> enc_fwd;
  std::vector<GruWeights<T>> enc_bwd;
  T tgt_embed;  // categorical: (V + 1, E); row V is the learned start/EOS symbol
  T prenet_w;   // continuous: (D, P), tanh prenet
  T prenet_b;
  std::vector<GruWeights<T>> dec;
  T att_query;     // (Hd, A)
  T att_key;       // (H, A)
  T att_location;  // (F, A)
  T att_bias;      // (A)
  T att_conv;      // (F, 1, K)
  T att_score;     // (A)
  T out_w;         // (Hd + H, output_size)
  T out_b;
  T stop_w;  // continuous: (Hd + H)
  T stop_b;
};

/// Calls f(name, member) for every parameter present under `cfg`, in canonical order.
template <class W, class F>
void visit_weights(W& w, const ModelConfig& cfg, F&& f) {
  f("encoder.embed", w.src_embed);
  for (std::size_t l = 0; l < w.enc_fwd.size(); ++l) {
    for (int dir = 0; dir < 2; ++dir) {
      auto& g = dir == 0 ? w.enc_fwd[l] : w.enc_bwd[l];
      const std::string p = std::string("encoder.") + (dir == 0 ? "fwd" : "bwd") + std::to_string(l) + ".";
      f(p + "w_input", g.w_input);
      f(p + "w_hidden", g.w_hidden);
      f(p + "b_input", g.b_input);
      f(p + "b_hidden", g.b_hidden);
    }
  }
  if (cfg.categorical()) {
    f("decoder.embed", w.tgt_embed);
  } else {
    f("decoder.prenet_w", w.prenet_w);
    f("decoder.prenet_b", w.prenet_b);
  }
  for (std::size_t l = 0; l < w.dec.size(); ++l) {
    const std::string p = "decoder.gru" + std::to_string(l) + ".";
    f(p + "w_input", w.dec[l].w_input);
    f(p + "w_hidden", w.dec[l].w_hidden);
    f(p + "b_input", w.dec[l].b_input);
    f(p + "b_hidden", w.dec[l].b_hidden);
  }
  f("attention.query", w.att_query);
  f("attention.key", w.att_key);
  f("attention.location", w.att_location);
  f("attention.bias", w.att_bias);
  f("attention.conv", w.att_conv);
  f("attention.score", w.att_score);
  f("output.w", w.out_w);
  f("output.b", w.out_b);
  if (!cfg.categorical()) {
    f("output.stop_w", w.stop_w);
    f("output.stop_b", w.stop_b);
  }
}

/// The parameter set of one model. Value type: copy it to snapshot.
struct ModelParams {
  ModelConfig config;
  Weights<ad::Tensor> w;

  /// Glorot-uniform weights, zero biases, deterministic in `seed`.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  std::vector<std::pair<std::string, ad::Tensor*>> named();
  std::vector<std::pair<std::string, const ad::Tensor*>> named() const;
  std::vector<ad::Tensor*> tensors();
  std::size_t parameter_count() const;
  bool all_finite() const;
  void zero_grad();
  void clear_grad();

  friend bool operator==(const ModelParams& a, const ModelParams& b);
};

/// Parameters recorded as leaves on a tape.
struct BoundParams {
  const ModelConfig* config = nullptr;
  Weights<ad::Var> w;
  /// Leaves in canonical order, matching ModelParams::named().
  std::vector<ad::Var> leaves;
};

BoundParams bind(ad::Tape& tape, const ModelParams& params, bool track);
/// Rebuilds a binding from leaves already on a tape (canonical order).
BoundParams bind_leaves(const ModelConfig& config, std::span<const ad::Var> leaves);
/// Adds tape gradients of `bound` leaves into the matching parameter grads.
void accumulate_grads(const ad::Tape& tape, const BoundParams& bound, ModelParams& params);

}  // namespace seqforce::model
