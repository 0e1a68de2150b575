// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "seqforce/autodiff/tensor.hpp"
#include "seqforce/model/params.hpp"
#include "seqforce/tasks/aligned_pair.hpp"

namespace seqforce::metrics {

using tasks::TokenSeq;

struct BleuOptions {
  std::size_t max_order = 4;
  /// Add-one smoothing of the n-gram precisions for n > 1.
  bool smoothing = false;
};

/// Corpus BLEU in [0, 1]: clipped n-gram counts summed over the corpus, geometric mean of
/// the precisions with equal weights, times the brevity penalty.
double bleu_corpus(std::span<const TokenSeq> hypotheses, std::span<const TokenSeq> references,
                   const BleuOptions& options = {});

/// BLEU of one sentence pair.
double bleu_sentence(const TokenSeq& hypothesis, const TokenSeq& reference, const BleuOptions& options = {});

/// Mean over frames of the L1 distance between rows.
double l1_frame_error(const ad::Tensor& y_hat, const ad::Tensor& y_ref);

struct AlignmentDiagnostics {
  /// Mean row entropy in nats.
  double mean_entropy = 0.0;
  /// Fraction of consecutive steps whose argmax does not move backwards (1 for a single row).
  double monotonicity = 1.0;
  /// Column sums.
  std::vector<double> coverage;
};

AlignmentDiagnostics alignment_diagnostics(const ad::Tensor& alpha);

/// Mean over rows of KL(gold_t || alpha_t), both clamped at 1e-12.
double mean_row_kl(const ad::Tensor& gold, const ad::Tensor& alpha);

/// Levenshtein distance between token sequences.
std::size_t edit_distance(const TokenSeq& a, const TokenSeq& b);

/// Task loss D(reference, hypothesis) used by the Bayes-risk estimator.
using SequenceLoss = std::function<double(const TokenSeq& reference, const TokenSeq& hypothesis)>;
/// 1 - add-one smoothed sentence BLEU.
SequenceLoss bleu_loss();
SequenceLoss edit_distance_loss();

struct BayesRisk {
  double mean = 0.0;
  /// Standard error of the mean over the M samples.
  double standard_error = 0.0;
};

/// Monte-Carlo estimate of E_{y ~ p(.|x)} D(y_ref, y) from M free-running samples.
BayesRisk bayes_risk_estimate(const model::ModelParams& params, const TokenSeq& src, const TokenSeq& reference,
                              std::size_t samples, const SequenceLoss& loss, std::uint64_t seed,
                              std::size_t max_steps = 100);

}  // namespace seqforce::metrics
