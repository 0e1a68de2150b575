// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/model/params.hpp"

#include <stdexcept>

#include "seqforce/errors.hpp"
#include "seqforce/random.hpp"

namespace seqforce::model {

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ContractError(std::string("invalid model config: ") + what);
  };
  require(src_vocab >= 1, "src_vocab must be >= 1");
  require(embed_dim >= 1 && encoder_hidden >= 1 && decoder_hidden >= 1, "dimensions must be positive");
  require(encoder_layers >= 1 && decoder_layers >= 1, "layer counts must be >= 1");
  require(attention_dim >= 1 && location_filters >= 1 && location_kernel >= 1, "attention dims must be positive");
  require(max_source_length >= 1, "max_source_length must be >= 1");
  if (categorical()) {
    require(tgt_vocab >= 1, "tgt_vocab must be >= 1");
  } else {
    require(frame_dim >= 1, "frame_dim must be >= 1");
    require(reduction_factor >= 1, "reduction_factor must be >= 1");
    require(prenet_dim >= 1, "prenet_dim must be >= 1");
  }
}

std::size_t ModelConfig::output_size() const noexcept {
  return categorical() ? tgt_vocab + 1 : reduction_factor * frame_dim;
}

std::size_t ModelConfig::decoder_input_dim() const noexcept { return categorical() ? embed_dim : prenet_dim; }

namespace {

ad::Tensor glorot(ad::Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  ad::Tensor t(std::move(shape));
  glorot_uniform(t, fan_in, fan_out, rng);
  return t;
}

GruWeights<ad::Tensor> init_gru(std::size_t in, std::size_t hidden, Rng& rng) {
  GruWeights<ad::Tensor> g;
  g.w_input = glorot({in, 3 * hidden}, in, hidden, rng);
  g.w_hidden = glorot({hidden, 3 * hidden}, hidden, hidden, rng);
  g.b_input = ad::Tensor({3 * hidden});
  g.b_hidden = ad::Tensor({3 * hidden});
  return g;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng = make_rng(seed, {0x5eed});
  ModelParams p;
  p.config = config;
  auto& w = p.w;
  const auto E = config.embed_dim;
  const auto He = config.encoder_hidden;
  const auto H = config.encoder_dim();
  const auto Hd = config.decoder_hidden;
  const auto A = config.attention_dim;
  const auto F = config.location_filters;
  const auto K = config.location_kernel;

  w.src_embed = glorot({config.src_vocab, E}, config.src_vocab, E, rng);
  for (std::size_t l = 0; l < config.encoder_layers; ++l) {
    const std::size_t in = l == 0 ? E : H;
    w.enc_fwd.push_back(init_gru(in, He, rng));
    w.enc_bwd.push_back(init_gru(in, He, rng));
  }
  if (config.categorical()) {
    w.tgt_embed = glorot({config.tgt_vocab + 1, E}, config.tgt_vocab + 1, E, rng);
  } else {
    w.prenet_w = glorot({config.frame_dim, config.prenet_dim}, config.frame_dim, config.prenet_dim, rng);
    w.prenet_b = ad::Tensor({config.prenet_dim});
  }
  for (std::size_t l = 0; l < config.decoder_layers; ++l) {
    const std::size_t in = l == 0 ? config.decoder_input_dim() : Hd;
    w.dec.push_back(init_gru(in, Hd, rng));
  }
  w.att_query = glorot({Hd, A}, Hd, A, rng);
  w.att_key = glorot({H, A}, H, A, rng);
  w.att_location = glorot({F, A}, F, A, rng);
  w.att_bias = ad::Tensor({A});
  w.att_conv = glorot({F, 1, K}, K, F * K, rng);
  w.att_score = glorot({A}, A, 1, rng);
  w.out_w = glorot({Hd + H, config.output_size()}, Hd + H, config.output_size(), rng);
  w.out_b = ad::Tensor({config.output_size()});
  if (!config.categorical()) {
    w.stop_w = glorot({Hd + H}, Hd + H, 1, rng);
    w.stop_b = ad::Tensor({1});
  }
  return p;
}

std::vector<std::pair<std::string, ad::Tensor*>> ModelParams::named() {
  std::vector<std::pair<std::string, ad::Tensor*>> out;
  visit_weights(w, config, [&](const std::string& name, ad::Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

std::vector<std::pair<std::string, const ad::Tensor*>> ModelParams::named() const {
  std::vector<std::pair<std::string, const ad::Tensor*>> out;
  visit_weights(w, config, [&](const std::string& name, const ad::Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

std::vector<ad::Tensor*> ModelParams::tensors() {
  std::vector<ad::Tensor*> out;
  visit_weights(w, config, [&](const std::string&, ad::Tensor& t) { out.push_back(&t); });
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) n += t->size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& [name, t] : named()) {
    if (!t->all_finite()) return false;
  }
  return true;
}

void ModelParams::zero_grad() {
  for (auto* t : tensors()) t->zero_grad();
}

void ModelParams::clear_grad() {
  for (auto* t : tensors()) t->clear_grad();
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (!(a.config == b.config)) return false;
  const auto na = a.named();
  const auto nb = b.named();
  if (na.size() != nb.size()) return false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    if (na[i].first != nb[i].first || !(*na[i].second == *nb[i].second)) return false;
  }
  return true;
}

namespace {

Weights<ad::Var> skeleton(const ModelConfig& config) {
  Weights<ad::Var> w;
  w.enc_fwd.resize(config.encoder_layers);
  w.enc_bwd.resize(config.encoder_layers);
  w.dec.resize(config.decoder_layers);
  return w;
}

}  // namespace

BoundParams bind(ad::Tape& tape, const ModelParams& params, bool track) {
  BoundParams b;
  b.config = &params.config;
  b.w = skeleton(params.config);
  const auto named = params.named();
  std::size_t i = 0;
  visit_weights(b.w, params.config, [&](const std::string&, ad::Var& v) {
    v = tape.leaf(*named[i++].second, track);
    b.leaves.push_back(v);
  });
  return b;
}

BoundParams bind_leaves(const ModelConfig& config, std::span<const ad::Var> leaves) {
  BoundParams b;
  b.config = &config;
  b.w = skeleton(config);
  std::size_t i = 0;
  visit_weights(b.w, config, [&](const std::string& name, ad::Var& v) {
    if (i >= leaves.size()) throw ContractError("bind_leaves: missing leaf for " + name);
    v = leaves[i++];
    b.leaves.push_back(v);
  });
  if (i != leaves.size()) throw ContractError("bind_leaves: too many leaves");
  return b;
}

void accumulate_grads(const ad::Tape& tape, const BoundParams& bound, ModelParams& params) {
  auto tensors = params.tensors();
  if (tensors.size() != bound.leaves.size()) throw ContractError("accumulate_grads: binding does not match params");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tape.has_grad(bound.leaves[i])) {
      tensors[i]->accumulate_grad(tape.grad(bound.leaves[i]));
    } else if (!tensors[i]->has_grad()) {
      tensors[i]->zero_grad();
    }
  }
}

}  // namespace seqforce::model
