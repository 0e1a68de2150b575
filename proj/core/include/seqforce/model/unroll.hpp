// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "seqforce/model/seq2seq.hpp"
#include "seqforce/random.hpp"

namespace seqforce::model {

/// Where the history item y_{t-1} of a step comes from.
enum class HistorySource : unsigned char { Reference, Generated };

/// How a generated discrete token is chosen from the predicted distribution.
enum class Selection { Argmax, Sample };

/// Realized history of one unrolled example. Replaying it reproduces the unroll
/// with every data-dependent choice held fixed.
struct HistoryTrace {
  std::vector<HistorySource> sources;
  std::vector<HistoryInput> inputs;
};

/// Per-example unroll instructions.
struct ExamplePlan {
  /// One entry per decode step; the entry of step 0 is ignored (start symbol).
  std::vector<HistorySource> history;
  /// When non-empty, one alignment per step used for the context vector.
  std::vector<ad::Var> context_alignment;
  /// When set, history inputs are taken from here instead of being computed.
  const HistoryTrace* replay = nullptr;
};

/// The full decode of one example.
struct Unrolled {
  EncoderStates enc;
  std::vector<StepOutput> steps;
  HistoryTrace trace;

  /// The model's own alignments stacked into a (steps, L) matrix.
  ad::Var alignment() const;
  /// Values of the alignment matrix.
  ad::Tensor alignment_values() const;
};

/// Uniform plan with `steps` entries.
ExamplePlan uniform_plan(std::size_t steps, HistorySource source);

/// Chooses the generated history item from a step output. Draws exactly one uniform
/// from `rng` in Sample mode for categorical models, none otherwise.
HistoryInput select_history(const ModelConfig& cfg, const StepOutput& out, Selection selection, Rng* rng);

/// Runs encode and the planned decode steps. Without a replay trace a generated item is
/// selected after every step but the last, so Sample mode consumes the same number of draws for any plan of equal length.
/// Generated history is a constant: no gradient flows through it.
Unrolled unroll(const BoundParams& p, const tasks::AlignedPair& pair, const ExamplePlan& plan,
                Selection selection = Selection::Argmax, Rng* rng = nullptr);

/// Argmax index over a vector of log-probabilities; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

}  // namespace seqforce::model
