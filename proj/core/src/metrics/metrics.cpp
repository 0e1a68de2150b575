// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "seqforce/decoding/decoding.hpp"
#include "seqforce/errors.hpp"
#include "seqforce/random.hpp"

namespace seqforce::metrics {

namespace {

using NgramCounts = std::map<TokenSeq, std::size_t>;

NgramCounts ngrams(const TokenSeq& seq, std::size_t n) {
  NgramCounts counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[TokenSeq(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

struct BleuStats {
  std::vector<double> matches;
  std::vector<double> totals;
  double hyp_length = 0.0;
  double ref_length = 0.0;
};

void accumulate(BleuStats& s, const TokenSeq& hyp, const TokenSeq& ref) {
  for (std::size_t n = 1; n <= s.matches.size(); ++n) {
    const auto h = ngrams(hyp, n);
    const auto r = ngrams(ref, n);
    for (const auto& [gram, count] : h) {
      const auto it = r.find(gram);
      if (it != r.end()) s.matches[n - 1] += static_cast<double>(std::min(count, it->second));
    }
    s.totals[n - 1] += static_cast<double>(hyp.size() >= n ? hyp.size() - n + 1 : 0);
  }
  s.hyp_length += static_cast<double>(hyp.size());
  s.ref_length += static_cast<double>(ref.size());
}

double score(const BleuStats& s, const BleuOptions& options) {
  if (s.hyp_length == 0.0) return 0.0;
  double log_sum = 0.0;
  const double orders = static_cast<double>(s.matches.size());
  for (std::size_t n = 0; n < s.matches.size(); ++n) {
    double m = s.matches[n];
    double t = s.totals[n];
    if (options.smoothing && n > 0) {
      m += 1.0;
      t += 1.0;
    }
    if (m == 0.0 || t == 0.0) return 0.0;
    log_sum += std::log(m / t) / orders;
  }
  const double bp = s.hyp_length >= s.ref_length ? 1.0 : std::exp(1.0 - s.ref_length / s.hyp_length);
  return bp * std::exp(log_sum);
}

BleuStats empty_stats(const BleuOptions& options) {
  if (options.max_order == 0) throw ContractError("BLEU max_order must be >= 1");
  BleuStats s;
  s.matches.assign(options.max_order, 0.0);
  s.totals.assign(options.max_order, 0.0);
  return s;
}

void require_simplex_rows(const ad::Tensor& alpha, const char* op) {
  if (!tasks::is_row_stochastic(alpha)) throw ContractError(std::string(op) + ": rows must be probability vectors");
}

}  // namespace

double bleu_corpus(std::span<const TokenSeq> hypotheses, std::span<const TokenSeq> references,
                   const BleuOptions& options) {
  if (hypotheses.empty()) throw ContractError("bleu_corpus: empty corpus");
  if (hypotheses.size() != references.size()) {
    throw ContractError("bleu_corpus: " + std::to_string(hypotheses.size()) + " hypotheses for " +
                        std::to_string(references.size()) + " references");
  }
  auto stats = empty_stats(options);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) accumulate(stats, hypotheses[i], references[i]);
  return score(stats, options);
}

double bleu_sentence(const TokenSeq& hypothesis, const TokenSeq& reference, const BleuOptions& options) {
  auto stats = empty_stats(options);
  accumulate(stats, hypothesis, reference);
  return score(stats, options);
}

double l1_frame_error(const ad::Tensor& y_hat, const ad::Tensor& y_ref) {
  if (y_hat.shape() != y_ref.shape() || y_hat.rank() != 2) {
    throw ContractError("l1_frame_error: shapes " + ad::to_string(y_hat.shape()) + " and " +
                        ad::to_string(y_ref.shape()) + " must be equal matrices");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < y_hat.size(); ++i) total += std::fabs(y_hat[i] - y_ref[i]);
  return total / static_cast<double>(y_hat.rows());
}

AlignmentDiagnostics alignment_diagnostics(const ad::Tensor& alpha) {
  require_simplex_rows(alpha, "alignment_diagnostics");
  AlignmentDiagnostics d;
  const std::size_t T = alpha.rows();
  const std::size_t L = alpha.cols();
  d.coverage.assign(L, 0.0);
  double entropy = 0.0;
  std::size_t forward = 0;
  std::size_t previous = 0;
  for (std::size_t t = 0; t < T; ++t) {
    const auto row = alpha.row(t);
    std::size_t best = 0;
    for (std::size_t l = 0; l < L; ++l) {
      if (row[l] > 0.0) entropy -= row[l] * std::log(row[l]);
      d.coverage[l] += row[l];
      if (row[l] > row[best]) best = l;
    }
    if (t > 0 && best >= previous) ++forward;
    previous = best;
  }
  d.mean_entropy = entropy / static_cast<double>(T);
  d.monotonicity = T > 1 ? static_cast<double>(forward) / static_cast<double>(T - 1) : 1.0;
  return d;
}

double mean_row_kl(const ad::Tensor& gold, const ad::Tensor& alpha) {
  if (gold.shape() != alpha.shape() || gold.rank() != 2) {
    throw ContractError("mean_row_kl: shapes " + ad::to_string(gold.shape()) + " and " +
                        ad::to_string(alpha.shape()) + " differ");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const double p = std::max(gold[i], 1e-12);
    const double q = std::max(alpha[i], 1e-12);
    total += p * (std::log(p) - std::log(q));
  }
  return total / static_cast<double>(gold.rows());
}

std::size_t edit_distance(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

SequenceLoss bleu_loss() {
  return [](const TokenSeq& ref, const TokenSeq& hyp) { return 1.0 - bleu_sentence(hyp, ref, {4, true}); };
}

SequenceLoss edit_distance_loss() {
  return [](const TokenSeq& ref, const TokenSeq& hyp) { return static_cast<double>(edit_distance(ref, hyp)); };
}

BayesRisk bayes_risk_estimate(const model::ModelParams& params, const TokenSeq& src, const TokenSeq& reference,
                              std::size_t samples, const SequenceLoss& loss, std::uint64_t seed,
                              std::size_t max_steps) {
  if (samples < 1) throw ContractError("bayes_risk_estimate: need at least one sample");
  if (!params.config.categorical()) throw ContractError("bayes_risk_estimate: needs a categorical model");
  Rng rng = make_rng(seed, {0xba7e5});
  std::vector<double> values;
  values.reserve(samples);
  for (std::size_t m = 0; m < samples; ++m) {
    const auto g = decoding::sample_decode(params, src, max_steps, rng);
    values.push_back(loss(reference, g.tokens()));
  }
  BayesRisk r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(samples);
  if (samples > 1) {
    double var = 0.0;
    for (double v : values) var += (v - r.mean) * (v - r.mean);
    var /= static_cast<double>(samples - 1);
    r.standard_error = std::sqrt(var / static_cast<double>(samples));
  }
  return r;
}

}  // namespace seqforce::metrics
