// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "seqforce/errors.hpp"
#include "seqforce/tasks/dataset_io.hpp"
#include "seqforce/tasks/generators.hpp"
#include "toy.hpp"

namespace seqforce::tasks {
namespace {

TEST(Generators, CopyTargetsEqualSources) {
  TaskSpec spec;
  spec.vocab = 7;
  for (const auto& p : gen_copy(spec, 50)) {
    EXPECT_EQ(p.tokens(), p.src);
    EXPECT_GE(p.src.size(), spec.min_length);
    EXPECT_LE(p.src.size(), spec.max_length);
    for (auto t : p.src) EXPECT_LT(t, 7u);
    ASSERT_TRUE(p.align.has_value());
    for (std::size_t i = 0; i < p.src.size(); ++i) EXPECT_EQ((*p.align)(i, i), 1.0);
  }
}

TEST(Generators, BlockSwapPermutation) {
  EXPECT_EQ(reorder_permutation(ReorderRule::BlockSwap, 5), (std::vector<std::size_t>{1, 0, 3, 2, 4}));
  EXPECT_EQ(reorder_permutation(ReorderRule::BlockSwap, 4), (std::vector<std::size_t>{1, 0, 3, 2}));
  EXPECT_EQ(reorder_permutation(ReorderRule::Identity, 3), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Generators, ReorderAlignmentPointsAtSource) {
  TaskSpec spec;
  spec.kind = TaskKind::Reorder;
  spec.ambiguous = true;
  std::size_t identity = 0;
  const auto data = gen_reorder(spec, 400);
  for (const auto& p : data) {
    const auto& a = *p.align;
    for (std::size_t t = 0; t < p.tokens().size(); ++t) {
      std::size_t l = 0;
      while (a(t, l) != 1.0) ++l;
      EXPECT_EQ(p.tokens()[t], p.src[l]);
    }
    bool same = true;
    for (std::size_t t = 0; t < p.src.size(); ++t) same = same && a(t, t) == 1.0;
    identity += same;
  }
  // Both orders occur with probability near one half.
  EXPECT_GT(identity, 150u);
  EXPECT_LT(identity, 250u);
}

TEST(Generators, ExpansionFollowsDurations) {
  TaskSpec spec;
  spec.kind = TaskKind::Expansion;
  spec.vocab = 6;
  spec.noise_std = 0.0;
  spec.frame_dim = 3;
  const auto dur = expansion_durations(spec);
  const auto proto = expansion_prototypes(spec);
  ASSERT_EQ(dur.size(), 6u);
  for (const auto& p : gen_expansion(spec, 20)) {
    std::size_t total = 0;
    for (auto s : p.src) total += dur[s];
    ASSERT_EQ(p.frames().rows(), total);
    EXPECT_EQ(p.frames().cols(), 3u);
    std::size_t t = 0;
    for (std::size_t l = 0; l < p.src.size(); ++l) {
      for (std::size_t k = 0; k < dur[p.src[l]]; ++k, ++t) {
        EXPECT_EQ((*p.align)(t, l), 1.0);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(p.frames()(t, j), proto(p.src[l], j));
      }
    }
  }
}

TEST(Generators, ExplicitDurationsAreUsed) {
  TaskSpec spec;
  spec.kind = TaskKind::Expansion;
  spec.vocab = 3;
  spec.durations = {1, 2, 3};
  EXPECT_EQ(expansion_durations(spec), spec.durations);
  Rng rng = make_rng(0);
  const auto p = expand(spec, {2, 0, 1}, spec.durations, expansion_prototypes(spec), rng);
  EXPECT_EQ(p.target_length(), 6u);
}

TEST(Generators, DeterministicPerSeedAndStream) {
  const auto spec = seqforce::testing::toy_task(true, 4);
  EXPECT_EQ(generate(spec, 10, 0), generate(spec, 10, 0));
  EXPECT_NE(generate(spec, 10, 0), generate(spec, 10, 1));
  auto other = spec;
  other.seed = 5;
  EXPECT_NE(generate(spec, 10, 0), generate(other, 10, 0));
}

TEST(Generators, ValidateRejectsBadSpecs) {
  TaskSpec spec;
  spec.min_length = 6;
  spec.max_length = 3;
  EXPECT_THROW(spec.validate(), ContractError);
  TaskSpec exp;
  exp.kind = TaskKind::Expansion;
  exp.durations = {1, 2};
  EXPECT_THROW(gen_expansion(exp, 1), ContractError);
  EXPECT_THROW(gen_copy(exp, 1), ContractError);
}

TEST(DatasetIo, RoundTripsBothTargetKinds) {
  for (bool continuous : {false, true}) {
    const auto data = generate(seqforce::testing::toy_task(continuous), 15, 2);
    std::stringstream s;
    write_dataset(s, data);
    EXPECT_EQ(read_dataset(s), data);
  }
}

TEST(DatasetIo, CollectsEveryMalformedLine) {
  std::istringstream in(
      "{\"src\": [1, 2], \"tgt\": [2]}\n"
      "\n"
      "not json\n"
      "{\"tgt\": [1]}\n"
      "{\"src\": [1], \"tgt\": [1], \"align\": [[0.5, 0.2]]}\n"
      "{\"src\": [1, 2], \"tgt\": [[0.5, 1.0], [0.1]]}\n");
  try {
    read_dataset(in);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.lines(), (std::vector<std::size_t>{3, 4, 5, 6}));
    EXPECT_NE(std::string(e.what()).find("line 4: missing field 'src'"), std::string::npos);
  }
}

TEST(DatasetIo, FormatOptions) {
  const std::string line = "{\"src\": [1, 2], \"tgt\": [2, 1]}\n";
  std::istringstream a(line);
  EXPECT_THROW(read_dataset(a, {TargetFormat::Auto, true}), DataError);
  std::istringstream b(line);
  EXPECT_THROW(read_dataset(b, {TargetFormat::Frames}), DataError);
  std::istringstream c("{\"src\": [3]}\n");
  DatasetFormat loose;
  loose.allow_missing_target = true;
  const auto d = read_dataset(c, loose);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_TRUE(d[0].tokens().empty());
}

TEST(AlignedPair, RowStochastic) {
  EXPECT_TRUE(is_row_stochastic(ad::Tensor::matrix(2, 2, {0.3, 0.7, 1.0, 0.0})));
  EXPECT_FALSE(is_row_stochastic(ad::Tensor::matrix(1, 2, {0.3, 0.6})));
  EXPECT_FALSE(is_row_stochastic(ad::Tensor::matrix(1, 2, {1.2, -0.2})));
}

}  // namespace
}  // namespace seqforce::tasks
