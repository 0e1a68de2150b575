// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqforce/model/params.hpp"
#include "seqforce/model/unroll.hpp"

namespace seqforce::regimes {

/// GRU classifier over behavior sequences; outputs the logit of "teacher forcing".
struct DiscriminatorParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 16;
  model::GruWeights<ad::Tensor> gru;
  ad::Tensor out_w;  // (hidden)
  ad::Tensor out_b;  // (1)

  static DiscriminatorParams init(std::size_t input_dim, std::size_t hidden, std::uint64_t seed);

  std::vector<std::pair<std::string, ad::Tensor*>> named();
  std::vector<std::pair<std::string, const ad::Tensor*>> named() const;
  std::vector<ad::Tensor*> tensors();
  void zero_grad();

  friend bool operator==(const DiscriminatorParams& a, const DiscriminatorParams& b);
};

struct BoundDiscriminator {
  model::GruWeights<ad::Var> gru;
  ad::Var out_w;
  ad::Var out_b;
  std::vector<ad::Var> leaves;
};

BoundDiscriminator bind(ad::Tape& tape, const DiscriminatorParams& params, bool track);
BoundDiscriminator bind_leaves(std::span<const ad::Var> leaves);
void accumulate_grads(const ad::Tape& tape, const BoundDiscriminator& bound, DiscriminatorParams& params);

/// Width of beta_t = [s_t; alpha_t padded with zeros to max_source_length].
std::size_t behavior_dim(const model::ModelConfig& cfg);

/// beta_1..beta_T of an unrolled example.
std::vector<ad::Var> behavior_sequence(const model::ModelConfig& cfg, const model::Unrolled& u);

/// Logit of D(beta_{1:T}); D = sigmoid(logit).
ad::Var discriminator_logit(const BoundDiscriminator& d, std::span<const ad::Var> behavior);

}  // namespace seqforce::regimes
