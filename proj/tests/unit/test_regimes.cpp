// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "seqforce/errors.hpp"
#include "seqforce/regimes/optimizer.hpp"
#include "seqforce/regimes/schedule.hpp"
#include "seqforce/regimes/steps.hpp"
#include "seqforce/regimes/train_loop.hpp"
#include "toy.hpp"

namespace seqforce::regimes {
namespace {

using seqforce::testing::toy_model;
using seqforce::testing::toy_task;

std::vector<std::vector<double>> grads(model::ModelParams& p) {
  std::vector<std::vector<double>> out;
  for (auto* t : p.tensors()) {
    out.emplace_back(t->has_grad() ? std::vector<double>(t->grad().begin(), t->grad().end())
                                   : std::vector<double>(t->size(), 0.0));
  }
  return out;
}

struct StepRun {
  StepResult result;
  std::vector<std::vector<double>> grads;
};

StepRun run(const RegimeConfig& regime, const tasks::Dataset& batch, const model::ModelConfig& cfg,
            std::size_t step_index, const model::ModelParams* teacher = nullptr) {
  auto params = model::ModelParams::init(cfg, 11);
  params.zero_grad();
  auto disc = DiscriminatorParams::init(behavior_dim(cfg), 4, 12);
  const auto r = regime_step(regime, batch, params, {teacher, &disc, step_index, 99});
  return {r, grads(params)};
}

TEST(Schedule, MatchesClosedForms) {
  ScheduleSpec lin{ScheduleKind::Linear, 100, 0.1};
  EXPECT_DOUBLE_EQ(lin.epsilon(0), 1.0);
  EXPECT_DOUBLE_EQ(lin.epsilon(50), 0.5);
  EXPECT_DOUBLE_EQ(lin.epsilon(95), 0.1);
  ScheduleSpec exp{ScheduleKind::Exponential, 100};
  EXPECT_NEAR(exp.epsilon(100), 0.01, 1e-12);
  EXPECT_NEAR(exp.epsilon(50), 0.1, 1e-12);
  ScheduleSpec sig{ScheduleKind::InverseSigmoid, 100, 0.0, 10.0};
  EXPECT_DOUBLE_EQ(sig.epsilon(0), 1.0);
  EXPECT_NEAR(sig.epsilon(30), 11.0 / (10.0 + std::exp(3.0)), 1e-15);
}

TEST(Schedule, MonotoneAndBounded) {
  for (auto kind : {ScheduleKind::Linear, ScheduleKind::Exponential, ScheduleKind::InverseSigmoid}) {
    ScheduleSpec s{kind, 200, 0.05, 20.0};
    double prev = 1.0;
    for (std::size_t i = 0; i < 400; ++i) {
      const double e = s.epsilon(i);
      EXPECT_LE(e, prev);
      EXPECT_GE(e, 0.05);
      EXPECT_LE(e, 1.0);
      prev = e;
    }
  }
}

TEST(Schedule, NamesRoundTrip) {
  for (auto kind : {ScheduleKind::Linear, ScheduleKind::Exponential, ScheduleKind::InverseSigmoid}) {
    EXPECT_EQ(schedule_from_name(schedule_name(kind)), kind);
  }
}

TEST(RegimeConfig, NamesRoundTrip) {
  for (const char* name : {"tf", "fr", "ss-token", "ss-seq", "af", "maf", "pf"}) {
    const auto r = regime_from_name(name);
    ASSERT_TRUE(r.has_value()) << name;
    EXPECT_EQ(regime_name(*r), name);
  }
  EXPECT_FALSE(regime_from_name("bogus").has_value());
}

TEST(RegimeConfig, ValidateRejectsNegativeWeights) {
  AttentionForcing af;
  af.gamma = -1.0;
  EXPECT_THROW(validate(RegimeConfig{af}), ContractError);
  ProfessorForcing pf;
  pf.lambda_free = -0.5;
  EXPECT_THROW(validate(RegimeConfig{pf}), ContractError);
}

TEST(AlignmentKl, HandValueAndProperties) {
  const auto p = ad::Tensor::matrix(1, 2, {0.5, 0.5});
  const auto q = ad::Tensor::matrix(1, 2, {0.25, 0.75});
  EXPECT_NEAR(alignment_kl_loss(p, q), 0.1438410362, 1e-9);
  EXPECT_EQ(alignment_kl_loss(p, p), 0.0);
  Rng rng = make_rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto a = seqforce::testing::random_simplex(6, rng);
    const auto b = seqforce::testing::random_simplex(6, rng);
    EXPECT_GE(alignment_kl_loss(ad::Tensor::matrix(1, 6, a), ad::Tensor::matrix(1, 6, b)), 0.0);
  }
  EXPECT_THROW(alignment_kl_loss(p, ad::Tensor::matrix(1, 3, {0.2, 0.3, 0.5})), ContractError);
}

TEST(AlignmentKl, TrainingFormIsPerStepMean) {
  ad::Tape tape;
  const auto ref = tape.constant({2, 2}, {0.5, 0.5, 0.9, 0.1});
  const auto gen = tape.constant({2, 2}, {0.25, 0.75, 0.5, 0.5});
  const double row0 = 0.5 * std::log(2.0) + 0.5 * std::log(0.5 / 0.75);
  const double row1 = 0.9 * std::log(0.9 / 0.5) + 0.1 * std::log(0.1 / 0.5);
  EXPECT_NEAR(alignment_kl(ref, gen).item(), 0.5 * (row0 + row1), 1e-14);
}

class Degeneracy : public ::testing::TestWithParam<bool> {};

TEST_P(Degeneracy, ScheduledSamplingEndpoints) {
  const bool continuous = GetParam();
  const auto cfg = toy_model(continuous, continuous ? 2 : 1);
  const auto batch = tasks::generate(toy_task(continuous), 2, 0);
  const ScheduleSpec always{ScheduleKind::Linear, 10, 1.0};
  const ScheduleSpec never{ScheduleKind::Linear, 1, 0.0};
  const auto tf = run(TeacherForcing{}, batch, cfg, 5);
  const auto fr = run(FreeRunning{}, batch, cfg, 5);
  for (const auto& ss : {run(ScheduledSamplingToken{always}, batch, cfg, 5),
                         run(ScheduledSamplingSeq{always}, batch, cfg, 5)}) {
    EXPECT_EQ(ss.result.loss, tf.result.loss);
    EXPECT_EQ(ss.grads, tf.grads);
  }
  for (const auto& ss : {run(ScheduledSamplingToken{never}, batch, cfg, 5),
                         run(ScheduledSamplingSeq{never}, batch, cfg, 5)}) {
    EXPECT_EQ(ss.result.loss, fr.result.loss);
    EXPECT_EQ(ss.grads, fr.grads);
  }
}

TEST_P(Degeneracy, ProfessorForcingWithoutAdversaryIsTeacherForcing) {
  const bool continuous = GetParam();
  const auto cfg = toy_model(continuous);
  const auto batch = tasks::generate(toy_task(continuous), 2, 1);
  ProfessorForcing pf;
  pf.lambda_free = 0.0;
  pf.lambda_teacher = 0.0;
  pf.use_teacher_term = true;
  const auto tf = run(TeacherForcing{}, batch, cfg, 0);
  const auto p = run(pf, batch, cfg, 0);
  EXPECT_EQ(p.result.loss, tf.result.loss);
  EXPECT_EQ(p.grads, tf.grads);
  EXPECT_TRUE(p.result.disc_loss.has_value());
}

INSTANTIATE_TEST_SUITE_P(Heads, Degeneracy, ::testing::Values(false, true));

TEST(AttentionForcing, TiedNeedsNoTeacherUntiedDoes) {
  const auto cfg = toy_model(false);
  const auto batch = tasks::generate(toy_task(false), 2, 0);
  AttentionForcing tied;
  tied.tied = true;
  EXPECT_NO_THROW(run(tied, batch, cfg, 0));
  EXPECT_THROW(run(AttentionForcing{}, batch, cfg, 0), ContractError);
}

TEST(AttentionForcing, ReportsAlignmentLoss) {
  const auto cfg = toy_model(false);
  const auto batch = tasks::generate(toy_task(false), 2, 0);
  const auto teacher = model::ModelParams::init(cfg, 77);
  const auto r = run(AttentionForcing{}, batch, cfg, 0, &teacher);
  ASSERT_TRUE(r.result.loss_alpha.has_value());
  EXPECT_GE(*r.result.loss_alpha, 0.0);
  EXPECT_NEAR(r.result.loss, r.result.loss_y + *r.result.loss_alpha, 1e-12);
}

TEST(Coins, SequenceCoinsFollowEpsilon) {
  const auto all = sequence_coins(1, 0, 50, 1.0);
  EXPECT_TRUE(std::all_of(all.begin(), all.end(), [](bool b) { return b; }));
  const auto none = sequence_coins(1, 0, 50, 0.0);
  EXPECT_TRUE(std::none_of(none.begin(), none.end(), [](bool b) { return b; }));
  EXPECT_EQ(sequence_coins(4, 7, 20, 0.5), sequence_coins(4, 7, 20, 0.5));
}

TEST(Optimizer, AdamFirstStepMovesByLearningRate) {
  ad::Tensor p = ad::Tensor::vector({1.0, -2.0});
  p.accumulate_grad(std::vector<double>{0.5, -3.0});
  ad::Tensor* params[] = {&p};
  auto state = AdamState::for_params(params);
  OptimizerConfig cfg;
  cfg.learning_rate = 0.01;
  adam_update(params, state, cfg);
  // Bias-corrected first step: m_hat = g, v_hat = g^2.
  EXPECT_NEAR(p[0], 1.0 - 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], -2.0 + 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_EQ(state.t, 1u);
}

TEST(Optimizer, ClipScalesToGlobalNorm) {
  ad::Tensor a = ad::Tensor::vector({3.0});
  ad::Tensor b = ad::Tensor::vector({4.0});
  a.accumulate_grad(std::vector<double>{3.0});
  b.accumulate_grad(std::vector<double>{4.0});
  ad::Tensor* params[] = {&a, &b};
  EXPECT_DOUBLE_EQ(clip_gradients(params, 1.0), 5.0);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
  EXPECT_NEAR(global_grad_norm(params), 1.0, 1e-15);
}

TEST(TrainLoop, EpochPermutationIsAPermutation) {
  const auto p = epoch_permutation(3, 2, 37);
  std::set<std::size_t> s(p.begin(), p.end());
  EXPECT_EQ(s.size(), 37u);
  EXPECT_EQ(*s.rbegin(), 36u);
  EXPECT_EQ(p, epoch_permutation(3, 2, 37));
  EXPECT_NE(p, epoch_permutation(3, 3, 37));
}

TEST(TrainLoop, ResumeMatchesUninterruptedRun) {
  const auto cfg = toy_model(false);
  const auto data = tasks::generate(toy_task(false), 12, 0);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.seed = 9;
  const RegimeConfig regime = ScheduledSamplingToken{ScheduleSpec{ScheduleKind::Linear, 6}};
  std::vector<metrics::MetricRecord> full_log;
  auto full = TrainState::fresh(model::ModelParams::init(cfg, 1), regime, 1);
  train_loop(full, data, regime, tc, nullptr, [&](const metrics::MetricRecord& r) { full_log.push_back(r); });

  std::vector<metrics::MetricRecord> split_log;
  auto part = TrainState::fresh(model::ModelParams::init(cfg, 1), regime, 1);
  auto sink = [&](const metrics::MetricRecord& r) { split_log.push_back(r); };
  train_loop(part, data, regime, tc, nullptr, sink, 4);
  EXPECT_EQ(part.step, 4u);
  const TrainState copy = part;
  part = copy;
  train_loop(part, data, regime, tc, nullptr, sink);
  EXPECT_TRUE(part == full);
  EXPECT_EQ(split_log, full_log);
}

TEST(TrainLoop, DivergenceCarriesSnapshot) {
  const auto cfg = toy_model(false);
  const auto data = tasks::generate(toy_task(false), 8, 0);
  TrainConfig tc;
  tc.epochs = 50;
  tc.batch_size = 4;
  tc.optimizer.learning_rate = 1e300;
  tc.optimizer.clip_norm = 0.0;
  auto state = TrainState::fresh(model::ModelParams::init(cfg, 1), TeacherForcing{}, 1);
  try {
    train_loop(state, data, TeacherForcing{}, tc, nullptr, nullptr);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_TRUE(e.snapshot().params.all_finite());
  }
}

}  // namespace
}  // namespace seqforce::regimes
