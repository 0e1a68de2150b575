// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/model/seq2seq.hpp"

#include <string>

#include "seqforce/errors.hpp"

namespace seqforce::model {

namespace {

using ad::Var;

// One GRU update given the input projection x W_input + b_input (3H).
Var gru_cell(const GruWeights<Var>& g, Var x_proj, Var h) {
  const std::size_t H = h.size();
  const Var h_proj = ad::add(ad::matmul(h, g.w_hidden), g.b_hidden);
  const Var gates = ad::sigmoid(ad::add(ad::slice(x_proj, 0, 2 * H), ad::slice(h_proj, 0, 2 * H)));
  const Var reset = ad::slice(gates, 0, H);
  const Var update = ad::slice(gates, H, 2 * H);
  const Var candidate =
      ad::tanh(ad::add(ad::slice(x_proj, 2 * H, 3 * H), ad::mul(reset, ad::slice(h_proj, 2 * H, 3 * H))));
  return ad::add(candidate, ad::mul(update, ad::sub(h, candidate)));
}

Var zeros(ad::Tape& tape, std::size_t n) { return tape.constant({n}, std::vector<double>(n, 0.0)); }

// Runs one direction of a GRU layer over precomputed input projections (L, 3H).
std::vector<Var> run_direction(const GruWeights<Var>& g, Var projections, std::size_t hidden, bool reverse) {
  auto& tape = *projections.tape();
  const std::size_t len = projections.shape()[0];
  std::vector<Var> states(len);
  Var h = zeros(tape, hidden);
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t pos = reverse ? len - 1 - i : i;
    h = gru_cell(g, ad::row(projections, pos), h);
    states[pos] = h;
  }
  return states;
}

}  // namespace

Var gru_step(const GruWeights<Var>& g, Var x, Var h) {
  if (g.w_input.shape().size() != 2 || x.shape() != ad::Shape{g.w_input.shape()[0]}) {
    throw ShapeError("gru_step", "input " + ad::to_string(x.shape()) + " vs w_input " +
                                     ad::to_string(g.w_input.shape()));
  }
  return gru_cell(g, ad::add(ad::matmul(x, g.w_input), g.b_input), h);
}

EncoderStates encode(const BoundParams& p, std::span<const Token> x) {
  const auto& cfg = *p.config;
  if (x.empty() || x.size() > cfg.max_source_length) {
    throw DataError("source length " + std::to_string(x.size()) + " outside [1, " +
                    std::to_string(cfg.max_source_length) + "]");
  }
  for (auto tok : x) {
    if (tok >= cfg.src_vocab) {
      throw DataError("source token " + std::to_string(tok) + " outside vocabulary of size " +
                      std::to_string(cfg.src_vocab));
    }
  }
  Var layer_in = ad::embedding_lookup(p.w.src_embed, x);
  for (std::size_t l = 0; l < p.w.enc_fwd.size(); ++l) {
    const auto& fwd = p.w.enc_fwd[l];
    const auto& bwd = p.w.enc_bwd[l];
    const Var proj_f = ad::add(ad::matmul(layer_in, fwd.w_input), fwd.b_input);
    const Var proj_b = ad::add(ad::matmul(layer_in, bwd.w_input), bwd.b_input);
    const auto hf = run_direction(fwd, proj_f, cfg.encoder_hidden, false);
    const auto hb = run_direction(bwd, proj_b, cfg.encoder_hidden, true);
    layer_in = ad::concat({ad::stack(hf), ad::stack(hb)}, 1);
  }
  EncoderStates enc;
  enc.h = layer_in;
  enc.keys = ad::matmul(layer_in, p.w.att_key);
  enc.length = x.size();
  return enc;
}

DecoderState initial_state(ad::Tape& tape, const BoundParams& p) {
  DecoderState s;
  for (std::size_t l = 0; l < p.w.dec.size(); ++l) s.layers.push_back(zeros(tape, p.config->decoder_hidden));
  return s;
}

DecoderState decoder_step(const BoundParams& p, const DecoderState& prev, const HistoryInput& y_prev) {
  const auto& cfg = *p.config;
  if (prev.layers.size() != p.w.dec.size()) throw ContractError("decoder_step: state has wrong layer count");
  for (const auto& l : prev.layers) {
    if (l.size() != cfg.decoder_hidden) {
      throw ShapeError("decoder_step", ad::to_string(l.shape()) + " vs hidden " + std::to_string(cfg.decoder_hidden));
    }
  }
  auto& tape = *prev.layers.front().tape();
  Var input;
  if (cfg.categorical()) {
    Token tok = cfg.eos();  // the start symbol shares the boundary row with EOS
    if (y_prev.kind == HistoryInput::Kind::Token) {
      tok = y_prev.token;
      if (tok > cfg.eos()) throw ContractError("decoder_step: history token outside vocabulary");
    } else if (y_prev.kind == HistoryInput::Kind::Frame) {
      throw ContractError("decoder_step: frame history fed to a categorical model");
    }
    input = ad::embedding_lookup(p.w.tgt_embed, tok);
  } else {
    std::vector<double> frame(cfg.frame_dim, 0.0);
    if (y_prev.kind == HistoryInput::Kind::Frame) {
      if (y_prev.frame.size() != cfg.frame_dim) {
        throw ShapeError("decoder_step", "frame of size " + std::to_string(y_prev.frame.size()) + " vs D=" +
                                             std::to_string(cfg.frame_dim));
      }
      frame = y_prev.frame;
    } else if (y_prev.kind == HistoryInput::Kind::Token) {
      throw ContractError("decoder_step: token history fed to a continuous model");
    }
    const Var f = tape.constant({cfg.frame_dim}, std::move(frame));
    input = ad::tanh(ad::add(ad::matmul(f, p.w.prenet_w), p.w.prenet_b));
  }
  DecoderState next;
  for (std::size_t l = 0; l < p.w.dec.size(); ++l) {
    const auto& g = p.w.dec[l];
    const Var proj = ad::add(ad::matmul(input, g.w_input), g.b_input);
    const Var h = gru_cell(g, proj, prev.layers[l]);
    next.layers.push_back(h);
    input = h;
  }
  return next;
}

Var initial_alignment(ad::Tape& tape, std::size_t length) {
  return tape.constant({length}, std::vector<double>(length, 1.0 / static_cast<double>(length)));
}

Var attend(const BoundParams& p, Var s_t, const EncoderStates& enc, Var alpha_prev) {
  if (alpha_prev.shape() != ad::Shape{enc.length}) {
    throw ContractError("attend: previous alignment " + ad::to_string(alpha_prev.shape()) +
                        " does not match source length " + std::to_string(enc.length));
  }
  const Var query = ad::add(ad::matmul(s_t, p.w.att_query), p.w.att_bias);
  const Var location = ad::matmul(ad::conv1d(alpha_prev, p.w.att_conv), p.w.att_location);
  const Var energy = ad::tanh(ad::add(ad::add(enc.keys, location), query));
  return ad::softmax(ad::matmul(energy, p.w.att_score));
}

Var context(Var alpha, Var h) {
  if (h.shape().size() != 2 || alpha.shape() != ad::Shape{h.shape()[0]}) {
    throw ContractError("context: alignment " + ad::to_string(alpha.shape()) + " vs encodings " +
                        ad::to_string(h.shape()));
  }
  return ad::matmul(alpha, h);
}

Var output_head_categorical(const BoundParams& p, Var s_t, Var c_t) {
  const Var logits = ad::add(ad::matmul(ad::concat({s_t, c_t}), p.w.out_w), p.w.out_b);
  return ad::log_softmax(logits);
}

Var output_head_continuous(const BoundParams& p, Var s_t, Var c_t) {
  const auto& cfg = *p.config;
  const Var flat = ad::add(ad::matmul(ad::concat({s_t, c_t}), p.w.out_w), p.w.out_b);
  return ad::reshape(flat, {cfg.reduction_factor, cfg.frame_dim});
}

Var stop_logit(const BoundParams& p, Var s_t, Var c_t) {
  const Var features = ad::detach(ad::concat({s_t, c_t}));
  return ad::add(ad::matmul(features, p.w.stop_w), p.w.stop_b);
}

StepOutput decode_step(const BoundParams& p, const EncoderStates& enc, const DecoderState& prev,
                       const HistoryInput& y_prev, Var alpha_prev, std::optional<Var> context_alignment) {
  StepOutput out;
  out.state = decoder_step(p, prev, y_prev);
  const Var s = out.state.top();
  out.alpha = attend(p, s, enc, alpha_prev);
  out.context = context(context_alignment ? *context_alignment : out.alpha, enc.h);
  if (p.config->categorical()) {
    out.output = output_head_categorical(p, s, out.context);
  } else {
    out.output = output_head_continuous(p, s, out.context);
    out.stop = stop_logit(p, s, out.context);
  }
  return out;
}

std::size_t decode_steps(const ModelConfig& cfg, const tasks::AlignedPair& pair) {
  if (cfg.categorical() != pair.discrete()) throw ContractError("target kind does not match the model head");
  const std::size_t T = pair.target_length();
  if (cfg.categorical()) return T + 1;
  if (T == 0) throw ContractError("continuous target with zero frames");
  return (T + cfg.reduction_factor - 1) / cfg.reduction_factor;
}

HistoryInput reference_history(const ModelConfig& cfg, const tasks::AlignedPair& pair, std::size_t t) {
  if (t == 0) return HistoryInput::start();
  if (cfg.categorical()) return HistoryInput::of_token(pair.tokens().at(t - 1));
  const auto& frames = pair.frames();
  const std::size_t idx = std::min(t * cfg.reduction_factor, frames.rows()) - 1;
  const auto row = frames.row(idx);
  return HistoryInput::of_frame(std::vector<double>(row.begin(), row.end()));
}

}  // namespace seqforce::model
