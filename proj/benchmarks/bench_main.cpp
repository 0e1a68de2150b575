// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "seqforce/autodiff/ops.hpp"
#include "seqforce/decoding/decoding.hpp"
#include "seqforce/metrics/metrics.hpp"
#include "seqforce/regimes/steps.hpp"
#include "seqforce/tasks/generators.hpp"

namespace {

using namespace seqforce;

ad::Tensor random_tensor(ad::Shape shape, std::uint64_t seed) {
  ad::Tensor t(std::move(shape));
  Rng rng = make_rng(seed);
  for (auto& v : t.values()) v = normal(rng);
  return t;
}

model::ModelConfig bench_model(bool continuous) {
  model::ModelConfig cfg;
  cfg.output = continuous ? model::OutputKind::Continuous : model::OutputKind::Categorical;
  cfg.src_vocab = 20;
  cfg.tgt_vocab = 20;
  cfg.frame_dim = 8;
  cfg.location_filters = 4;
  cfg.location_kernel = 5;
  return cfg;
}

tasks::Dataset bench_batch(bool continuous) {
  tasks::TaskSpec spec;
  spec.kind = continuous ? tasks::TaskKind::Expansion : tasks::TaskKind::Reorder;
  spec.vocab = 20;
  spec.min_length = 4;
  spec.max_length = 8;
  return tasks::generate(spec, 16, 0);
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor({n, n}, 1);
  const auto b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    ad::Tape tape;
    const auto loss = ad::sum(ad::matmul(tape.leaf(a, true), tape.leaf(b, true)));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(loss));
  }
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(16)->Arg(64);

void BM_RegimeStep(benchmark::State& state) {
  const bool continuous = state.range(0) == 1;
  const bool attention = state.range(1) == 1;
  const auto cfg = bench_model(continuous);
  const auto batch = bench_batch(continuous);
  auto params = model::ModelParams::init(cfg, 0);
  const auto teacher = model::ModelParams::init(cfg, 1);
  const regimes::RegimeConfig regime =
      attention ? regimes::RegimeConfig{regimes::AttentionForcing{}} : regimes::RegimeConfig{regimes::TeacherForcing{}};
  std::size_t step = 0;
  for (auto _ : state) {
    params.zero_grad();
    benchmark::DoNotOptimize(regimes::regime_step(regime, batch, params, {&teacher, nullptr, step++, 0}).loss);
  }
}
BENCHMARK(BM_RegimeStep)->ArgNames({"continuous", "af"})->Args({0, 0})->Args({0, 1})->Args({1, 0})->Args({1, 1});

void BM_BeamSearch(benchmark::State& state) {
  const auto params = model::ModelParams::init(bench_model(false), 0);
  const tasks::TokenSeq src{1, 5, 7, 2, 9, 11};
  const decoding::BeamConfig config{static_cast<std::size_t>(state.range(0)), 12, false};
  for (auto _ : state) benchmark::DoNotOptimize(decoding::beam_search_decode(params, src, config));
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(4)->Arg(10);

void BM_CorpusBleu(benchmark::State& state) {
  const auto data = tasks::generate([] {
    tasks::TaskSpec s;
    s.kind = tasks::TaskKind::Reorder;
    s.ambiguous = true;
    return s;
  }(), 1000, 0);
  std::vector<tasks::TokenSeq> hyp;
  std::vector<tasks::TokenSeq> ref;
  for (const auto& p : data) {
    hyp.push_back(p.src);
    ref.push_back(p.tokens());
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::bleu_corpus(hyp, ref));
}
BENCHMARK(BM_CorpusBleu);

}  // namespace

BENCHMARK_MAIN();
