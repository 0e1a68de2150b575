// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "seqforce/autodiff/tensor.hpp"
#include "seqforce/random.hpp"
#include "seqforce/tasks/aligned_pair.hpp"

namespace seqforce::tasks {

enum class TaskKind { Copy, Expansion, Reorder };

/// Output order applied by the reorder task.
enum class ReorderRule {
  Identity,
  /// Swaps adjacent pairs: "a b c d e" -> "b a d c e".
  BlockSwap,
};

struct TaskSpec {
  TaskKind kind = TaskKind::Copy;
  std::size_t vocab = 20;
  std::size_t min_length = 5;
  std::size_t max_length = 12;

  // expansion
  std::size_t min_duration = 1;
  std::size_t max_duration = 3;
  /// Explicit per-symbol durations; drawn from `seed` when empty.
  std::vector<std::size_t> durations;
  std::size_t frame_dim = 8;
  double noise_std = 0.05;

  // reorder
  ReorderRule rule = ReorderRule::BlockSwap;
  /// Each example independently uses `rule` or the identity order with probability 1/2.
  bool ambiguous = false;

  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// Duration of every symbol of an expansion task.
std::vector<std::size_t> expansion_durations(const TaskSpec& spec);
/// Frame prototype of every symbol: a (vocab, D) matrix.
ad::Tensor expansion_prototypes(const TaskSpec& spec);

/// Applies a reorder rule to a sequence, returning the permutation `perm` with out[i] = x[perm[i]].
std::vector<std::size_t> reorder_permutation(ReorderRule rule, std::size_t length);

/// Generators are deterministic in (spec.seed, stream). Different streams give
/// independent splits over the same symbol inventory.
Dataset gen_copy(const TaskSpec& spec, std::size_t n, std::uint64_t stream = 0);
Dataset gen_expansion(const TaskSpec& spec, std::size_t n, std::uint64_t stream = 0);
Dataset gen_reorder(const TaskSpec& spec, std::size_t n, std::uint64_t stream = 0);
/// Dispatches on spec.kind.
Dataset generate(const TaskSpec& spec, std::size_t n, std::uint64_t stream = 0);

/// Expands a source with the given durations and prototypes, adding noise from `rng`
/// when noise_std > 0.
AlignedPair expand(const TaskSpec& spec, const TokenSeq& src, const std::vector<std::size_t>& durations,
                   const ad::Tensor& prototypes, Rng& rng);

}  // namespace seqforce::tasks
