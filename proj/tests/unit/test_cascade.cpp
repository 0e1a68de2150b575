// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "seqforce/cascade/cascade.hpp"
#include "seqforce/errors.hpp"
#include "seqforce/tasks/generators.hpp"
#include "toy.hpp"

namespace seqforce::cascade {
namespace {

using seqforce::testing::toy_model;
using seqforce::testing::toy_task;

TEST(Waveform, SynthesisIsLinearPlusRamp) {
  const WaveformSpec spec{3, 2, 7};
  const auto m = spec.matrix();
  ASSERT_EQ(m.shape(), (ad::Shape{3, 2}));
  const auto frames = ad::Tensor::matrix(2, 2, {1.0, -2.0, 0.5, 0.0});
  const auto w = synthesize(spec, frames);
  ASSERT_EQ(w.size(), 6u);
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double expected = m(j, 0) * frames(t, 0) + m(j, 1) * frames(t, 1) + static_cast<double>(j) / 3.0;
      EXPECT_NEAR(w[t * 3 + j], expected, 1e-15);
    }
  }
  EXPECT_THROW(synthesize(spec, ad::Tensor::matrix(1, 3, {0, 0, 0})), ContractError);
}

TEST(Waveform, WaveL1) {
  const std::vector<double> a{0, 0, 1, 1};
  const std::vector<double> b{1, 0, 1, 3};
  EXPECT_DOUBLE_EQ(wave_l1(a, b, 2), 1.5);
  EXPECT_THROW(wave_l1(a, std::vector<double>{1.0}, 2), ContractError);
}

TEST(Modes, NamesRoundTrip) {
  for (auto m : {UpstreamMode::TeacherForced, UpstreamMode::AttentionForced, UpstreamMode::FreeRunning}) {
    EXPECT_EQ(mode_from_name(mode_name(m)), m);
  }
}

class Corpora : public ::testing::Test {
 protected:
  model::ModelConfig cfg = toy_model(true, 2);
  model::ModelParams upstream = model::ModelParams::init(cfg, 3);
  tasks::Dataset data = tasks::generate(toy_task(true), 12, 0);
  WaveformSpec wave{4, cfg.frame_dim, 1};
};

TEST_F(Corpora, GuidedModesMatchReferenceLength) {
  for (auto mode : {UpstreamMode::TeacherForced, UpstreamMode::AttentionForced}) {
    const auto corpus = generate_feature_corpus(data, upstream, mode, wave);
    ASSERT_EQ(corpus.size(), data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      EXPECT_EQ(corpus[i].features.rows(), data[i].target_length());
      EXPECT_EQ(corpus[i].wave, synthesize(wave, data[i].frames()));
    }
    EXPECT_NO_THROW(check_corpus(corpus, 4));
  }
}

TEST_F(Corpora, FreeRunningIsRejected) {
  EXPECT_THROW(generate_feature_corpus(data, upstream, UpstreamMode::FreeRunning, wave), ContractError);
}

TEST_F(Corpora, CheckCatchesLengthMismatch) {
  auto corpus = generate_feature_corpus(data, upstream, UpstreamMode::TeacherForced, wave);
  corpus[3].wave.pop_back();
  EXPECT_THROW(check_corpus(corpus, 4), ContractError);
}

TEST_F(Corpora, SaveLoadRoundTrip) {
  const auto corpus = generate_feature_corpus(data, upstream, UpstreamMode::AttentionForced, wave);
  const auto path = seqforce::testing::scratch_dir("cascade_io") / "corpus.jsonl";
  save_corpus(path, corpus);
  EXPECT_EQ(load_corpus(path), corpus);
}

TEST_F(Corpora, DownstreamTrainingReducesLoss) {
  // Reference frames as features: the wave is a learnable function of them.
  Corpus corpus;
  for (const auto& p : data) corpus.push_back({p.src, p.frames(), synthesize(wave, p.frames()), p.align});
  const DownstreamConfig dc{cfg.frame_dim, 4, 6};
  auto phi = DownstreamParams::init(dc, 5);
  auto mean_l1 = [&](const DownstreamParams& p) {
    double total = 0.0;
    for (const auto& item : corpus) total += wave_l1(downstream_forward(p, item.features), item.wave, 4);
    return total / static_cast<double>(corpus.size());
  };
  const double before = mean_l1(phi);
  DownstreamTrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 4;
  tc.optimizer.learning_rate = 1e-2;
  std::size_t records = 0;
  train_downstream(corpus, phi, tc, [&](const metrics::MetricRecord& r) {
    EXPECT_EQ(r.name, "downstream_loss");
    ++records;
  });
  EXPECT_GT(records, 0u);
  EXPECT_LT(mean_l1(phi), 0.7 * before);
}

TEST_F(Corpora, PipelineForcesReferenceLength) {
  const auto phi = DownstreamParams::init({cfg.frame_dim, 4, 6}, 5);
  const auto ref = synthesize(wave, data[0].frames());
  const auto out = run_pipeline(data[0].src, upstream, phi, 50, &ref);
  EXPECT_EQ(out.wave.size(), ref.size());
  ASSERT_TRUE(out.l1.has_value());
  EXPECT_DOUBLE_EQ(*out.l1, wave_l1(out.wave, ref, 4));
  const auto free = run_pipeline(data[0].src, upstream, phi, 3);
  EXPECT_EQ(free.wave.size(), free.upstream.frames().rows() * 4);
  EXPECT_FALSE(free.l1.has_value());
}

}  // namespace
}  // namespace seqforce::cascade
