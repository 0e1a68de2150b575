// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "seqforce/autodiff/tensor.hpp"

namespace seqforce::tasks {

using Token = std::size_t;
using TokenSeq = std::vector<Token>;

/// One training example: source tokens, a discrete or continuous target and an
/// optional gold alignment (T x L, one-hot rows).
struct AlignedPair {
  TokenSeq src;
  std::variant<TokenSeq, ad::Tensor> tgt;  // tokens, or a T x D frame matrix
  std::optional<ad::Tensor> align;

  bool discrete() const noexcept { return std::holds_alternative<TokenSeq>(tgt); }
  const TokenSeq& tokens() const { return std::get<TokenSeq>(tgt); }
  const ad::Tensor& frames() const { return std::get<ad::Tensor>(tgt); }
  /// Number of target tokens or frames.
  std::size_t target_length() const;

  friend bool operator==(const AlignedPair& a, const AlignedPair& b);
};

using Dataset = std::vector<AlignedPair>;

/// Checks that every row of `alpha` is a probability vector within `tol`.
bool is_row_stochastic(const ad::Tensor& alpha, double tol = 1e-6);

}  // namespace seqforce::tasks
