// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/regimes/discriminator.hpp"

#include "seqforce/errors.hpp"
#include "seqforce/model/seq2seq.hpp"
#include "seqforce/random.hpp"

namespace seqforce::regimes {

namespace {

template <class D, class F>
void visit(D& d, F&& f) {
  f("disc.gru.w_input", d.gru.w_input);
  f("disc.gru.w_hidden", d.gru.w_hidden);
  f("disc.gru.b_input", d.gru.b_input);
  f("disc.gru.b_hidden", d.gru.b_hidden);
  f("disc.out_w", d.out_w);
  f("disc.out_b", d.out_b);
}

}  // namespace

DiscriminatorParams DiscriminatorParams::init(std::size_t input_dim, std::size_t hidden, std::uint64_t seed) {
  if (input_dim == 0 || hidden == 0) throw ContractError("discriminator dimensions must be positive");
  Rng rng = make_rng(seed, {0xd15c});
  DiscriminatorParams d;
  d.input_dim = input_dim;
  d.hidden = hidden;
  d.gru.w_input = ad::Tensor({input_dim, 3 * hidden});
  glorot_uniform(d.gru.w_input, input_dim, hidden, rng);
  d.gru.w_hidden = ad::Tensor({hidden, 3 * hidden});
  glorot_uniform(d.gru.w_hidden, hidden, hidden, rng);
  d.gru.b_input = ad::Tensor({3 * hidden});
  d.gru.b_hidden = ad::Tensor({3 * hidden});
  d.out_w = ad::Tensor({hidden});
  glorot_uniform(d.out_w, hidden, 1, rng);
  d.out_b = ad::Tensor({1});
  return d;
}

std::vector<std::pair<std::string, ad::Tensor*>> DiscriminatorParams::named() {
  std::vector<std::pair<std::string, ad::Tensor*>> out;
  visit(*this, [&](const char* name, ad::Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

std::vector<std::pair<std::string, const ad::Tensor*>> DiscriminatorParams::named() const {
  std::vector<std::pair<std::string, const ad::Tensor*>> out;
  visit(*this, [&](const char* name, const ad::Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

std::vector<ad::Tensor*> DiscriminatorParams::tensors() {
  std::vector<ad::Tensor*> out;
  visit(*this, [&](const char*, ad::Tensor& t) { out.push_back(&t); });
  return out;
}

void DiscriminatorParams::zero_grad() {
  for (auto* t : tensors()) t->zero_grad();
}

bool operator==(const DiscriminatorParams& a, const DiscriminatorParams& b) {
  return a.input_dim == b.input_dim && a.hidden == b.hidden && a.gru.w_input == b.gru.w_input &&
         a.gru.w_hidden == b.gru.w_hidden && a.gru.b_input == b.gru.b_input && a.gru.b_hidden == b.gru.b_hidden &&
         a.out_w == b.out_w && a.out_b == b.out_b;
}

BoundDiscriminator bind(ad::Tape& tape, const DiscriminatorParams& params, bool track) {
  BoundDiscriminator b;
  const auto named = params.named();
  std::size_t i = 0;
  visit(b, [&](const char*, ad::Var& v) {
    v = tape.leaf(*named[i++].second, track);
    b.leaves.push_back(v);
  });
  return b;
}

BoundDiscriminator bind_leaves(std::span<const ad::Var> leaves) {
  if (leaves.size() != 6) throw ContractError("discriminator binding needs 6 leaves");
  BoundDiscriminator b;
  std::size_t i = 0;
  visit(b, [&](const char*, ad::Var& v) {
    v = leaves[i++];
    b.leaves.push_back(v);
  });
  return b;
}

void accumulate_grads(const ad::Tape& tape, const BoundDiscriminator& bound, DiscriminatorParams& params) {
  auto tensors = params.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tape.has_grad(bound.leaves[i])) {
      tensors[i]->accumulate_grad(tape.grad(bound.leaves[i]));
    } else if (!tensors[i]->has_grad()) {
      tensors[i]->zero_grad();
    }
  }
}

std::size_t behavior_dim(const model::ModelConfig& cfg) { return cfg.decoder_hidden + cfg.max_source_length; }

std::vector<ad::Var> behavior_sequence(const model::ModelConfig& cfg, const model::Unrolled& u) {
  const std::size_t pad = cfg.max_source_length - u.enc.length;
  std::vector<ad::Var> out;
  out.reserve(u.steps.size());
  for (const auto& step : u.steps) {
    auto& tape = *step.alpha.tape();
    if (pad == 0) {
      out.push_back(ad::concat({step.state.top(), step.alpha}));
    } else {
      const ad::Var zeros = tape.constant({pad}, std::vector<double>(pad, 0.0));
      out.push_back(ad::concat({step.state.top(), step.alpha, zeros}));
    }
  }
  return out;
}

ad::Var discriminator_logit(const BoundDiscriminator& d, std::span<const ad::Var> behavior) {
  if (behavior.empty()) throw ContractError("discriminator needs a non-empty behavior sequence");
  auto& tape = *behavior.front().tape();
  const std::size_t hidden = d.out_w.size();
  ad::Var h = tape.constant({hidden}, std::vector<double>(hidden, 0.0));
  for (const auto& beta : behavior) h = model::gru_step(d.gru, beta, h);
  return ad::add(ad::matmul(h, d.out_w), d.out_b);
}

}  // namespace seqforce::regimes
