// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "seqforce/decoding/decoding.hpp"
#include "seqforce/errors.hpp"
#include "seqforce/model/unroll.hpp"
#include "seqforce/tasks/generators.hpp"
#include "toy.hpp"

namespace seqforce::decoding {
namespace {

using seqforce::testing::toy_model;
using seqforce::testing::toy_task;

// Log-probability of `y` followed by EOS, scored one step at a time with reference history.
double score_sequence(const model::ModelParams& params, const TokenSeq& src, const TokenSeq& y) {
  ad::Tape tape;
  const auto p = model::bind(tape, params, false);
  const auto enc = model::encode(p, src);
  auto state = model::initial_state(tape, p);
  auto alpha = model::initial_alignment(tape, enc.length);
  double total = 0.0;
  for (std::size_t t = 0; t <= y.size(); ++t) {
    const auto history = t == 0 ? model::HistoryInput::start() : model::HistoryInput::of_token(y[t - 1]);
    const auto out = model::decode_step(p, enc, state, history, alpha);
    const Token target = t < y.size() ? y[t] : params.config.eos();
    total += out.output.value()[target];
    state = out.state;
    alpha = out.alpha;
  }
  return total;
}

model::ModelConfig vocab4() {
  auto cfg = toy_model(false);
  cfg.src_vocab = 4;
  cfg.tgt_vocab = 4;
  return cfg;
}

TEST(Beam, WidthOneMatchesGreedy) {
  const auto cfg = toy_model(false);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto params = model::ModelParams::init(cfg, seed);
    const TokenSeq src{1, 3, 0, 2};
    const auto greedy = greedy_decode(params, src, 12);
    const auto beam = beam_search_decode(params, src, {1, 12, false});
    ASSERT_EQ(beam.size(), 1u);
    EXPECT_EQ(beam[0].tokens, greedy.tokens()) << "seed " << seed;
    EXPECT_EQ(beam[0].finished, !greedy.truncated);
  }
}

TEST(Beam, ExhaustiveWidthFindsTheBestSequence) {
  const auto cfg = vocab4();
  const TokenSeq src{0, 1, 3};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto params = model::ModelParams::init(cfg, 100 + seed);
    // Every sequence of length <= 3.
    double best = -std::numeric_limits<double>::infinity();
    TokenSeq best_y;
    std::vector<TokenSeq> frontier{{}};
    for (std::size_t len = 0; len <= 3; ++len) {
      std::vector<TokenSeq> grown;
      for (const auto& y : frontier) {
        const double s = score_sequence(params, src, y);
        if (s > best) {
          best = s;
          best_y = y;
        }
        for (Token k = 0; k < 4; ++k) {
          auto z = y;
          z.push_back(k);
          grown.push_back(z);
        }
      }
      frontier = std::move(grown);
    }
    const auto hyps = beam_search_decode(params, src, {400, 4, false});
    const auto it = std::find_if(hyps.begin(), hyps.end(), [](const Hypothesis& h) { return h.finished; });
    ASSERT_NE(it, hyps.end());
    EXPECT_EQ(it->tokens, best_y);
    EXPECT_NEAR(it->log_prob, best, 1e-12);
    for (const auto& h : hyps) {
      if (h.finished) EXPECT_NEAR(h.log_prob, score_sequence(params, src, h.tokens), 1e-12);
    }
    const auto narrow = beam_search_decode(params, src, {3, 4, false});
    EXPECT_LE(narrow.front().log_prob, best + 1e-12);
  }
}

TEST(Beam, SortedBestFirstAndRejectsBadInput) {
  const auto params = model::ModelParams::init(toy_model(false), 3);
  const auto hyps = beam_search_decode(params, {1, 2}, {5, 6, false});
  EXPECT_TRUE(std::is_sorted(hyps.begin(), hyps.end(),
                             [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; }));
  EXPECT_THROW(beam_search_decode(params, {1, 2}, {0, 6, false}), ContractError);
  const auto cont = model::ModelParams::init(toy_model(true), 3);
  EXPECT_THROW(beam_search_decode(cont, {1, 2}, {2, 6, false}), ContractError);
}

TEST(Beam, LengthNormalizedScoreIsPerStep) {
  const auto params = model::ModelParams::init(toy_model(false), 4);
  for (const auto& h : beam_search_decode(params, {0, 4, 2}, {4, 8, true})) {
    const double steps = static_cast<double>(h.tokens.size() + (h.finished ? 1 : 0));
    EXPECT_NEAR(h.score, h.log_prob / steps, 1e-12);
  }
}

TEST(Greedy, TruncatesAtMaxSteps) {
  const auto params = model::ModelParams::init(toy_model(false), 0);
  const auto g = greedy_decode(params, {1, 2, 3}, 1);
  EXPECT_LE(g.steps, 1u);
  if (g.truncated) EXPECT_EQ(g.tokens().size(), 1u);
  EXPECT_EQ(g.alignment.rows(), g.steps);
}

TEST(Greedy, FixedStepsIgnoresStop) {
  const auto params = model::ModelParams::init(toy_model(true, 2), 0);
  const auto g = greedy_decode_fixed(params, {1, 2}, 3, 5);
  EXPECT_EQ(g.steps, 3u);
  EXPECT_EQ(g.frames().rows(), 5u);
  EXPECT_EQ(g.alignment.rows(), 3u);
  EXPECT_TRUE(tasks::is_row_stochastic(g.alignment));
}

class Guided : public ::testing::TestWithParam<bool> {};

TEST_P(Guided, TeacherAndAttentionForcedHaveReferenceLength) {
  const bool continuous = GetParam();
  const auto cfg = toy_model(continuous, continuous ? 2 : 1);
  const auto params = model::ModelParams::init(cfg, 5);
  for (const auto& pair : tasks::generate(toy_task(continuous), 30, 3)) {
    const auto tf = teacher_forced_generate(params, pair);
    EXPECT_EQ(tf.length(), pair.target_length());
    EXPECT_FALSE(tf.truncated);
    const auto af = attention_forced_generate(params, pair.src, tf.alignment, pair.target_length());
    EXPECT_EQ(af.length(), pair.target_length());
    EXPECT_EQ(af.alignment.rows(), tf.alignment.rows());
  }
}

INSTANTIATE_TEST_SUITE_P(Heads, Guided, ::testing::Values(false, true));

TEST(Guided, AttentionForcedValidatesReference) {
  const auto params = model::ModelParams::init(toy_model(false), 5);
  const TokenSeq src{1, 2};
  EXPECT_THROW(attention_forced_generate(params, src, ad::Tensor::matrix(2, 2, {1, 0, 0, 1}), 3), ContractError);
  EXPECT_THROW(attention_forced_generate(params, src, ad::Tensor::matrix(4, 2, {1, 0, 0, 1, 1, 0, 0.2, 0.2}), 3),
               ContractError);
}

TEST(Sample, DeterministicInRng) {
  const auto params = model::ModelParams::init(toy_model(false), 6);
  Rng a = make_rng(3);
  Rng b = make_rng(3);
  EXPECT_EQ(sample_decode(params, {1, 2, 0}, 10, a).tokens(), sample_decode(params, {1, 2, 0}, 10, b).tokens());
}

}  // namespace
}  // namespace seqforce::decoding
