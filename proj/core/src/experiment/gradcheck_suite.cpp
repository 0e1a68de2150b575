// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/experiment/gradcheck_suite.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <ostream>

#include "seqforce/autodiff/grad_check.hpp"
#include "seqforce/autodiff/ops.hpp"
#include "seqforce/random.hpp"
#include "seqforce/regimes/steps.hpp"
#include "seqforce/tasks/generators.hpp"

namespace seqforce::experiment {

namespace {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

Tensor random_tensor(Shape shape, std::uint64_t stream, double lo = -1.5, double hi = 1.5) {
  Tensor t(std::move(shape));
  Rng rng = make_rng(0x9c4ec4, {stream});
  for (auto& v : t.values()) v = uniform(rng, lo, hi);
  return t;
}

// Values bounded away from zero so kinks are never straddled by the stencil.
Tensor away_from_zero(Shape shape, std::uint64_t stream) {
  Tensor t = random_tensor(std::move(shape), stream, 0.2, 1.5);
  Rng rng = make_rng(0x519, {stream});
  for (auto& v : t.values()) {
    if (uniform01(rng) < 0.5) v = -v;
  }
  return t;
}

// sum(op(inputs) * c) with a fixed random c, so every output component matters.
ad::Program weighted(std::function<Var(Tape&, std::span<const Var>)> op, Shape out_shape) {
  const Tensor c = random_tensor(std::move(out_shape), 0xc0);
  return [op = std::move(op), c](Tape& tape, std::span<const Var> x) {
    return ad::sum(ad::mul(op(tape, x), tape.constant(c)));
  };
}

struct PrimitiveCase {
  std::string name;
  ad::Program program;
  std::vector<Tensor> inputs;
};

std::vector<PrimitiveCase> primitive_cases() {
  std::vector<PrimitiveCase> cases;
  auto unary = [&](std::string name, Var (*op)(Var), Tensor x) {
    const Shape s = x.shape();
    cases.push_back({std::move(name), weighted([op](Tape&, std::span<const Var> v) { return op(v[0]); }, s),
                     {std::move(x)}});
  };
  cases.push_back({"matmul/matrix-matrix",
                   weighted([](Tape&, std::span<const Var> v) { return ad::matmul(v[0], v[1]); }, {3, 2}),
                   {random_tensor({3, 4}, 1), random_tensor({4, 2}, 2)}});
  cases.push_back({"matmul/vector-matrix",
                   weighted([](Tape&, std::span<const Var> v) { return ad::matmul(v[0], v[1]); }, {3}),
                   {random_tensor({4}, 3), random_tensor({4, 3}, 4)}});
  cases.push_back({"matmul/matrix-vector",
                   weighted([](Tape&, std::span<const Var> v) { return ad::matmul(v[0], v[1]); }, {3}),
                   {random_tensor({3, 4}, 5), random_tensor({4}, 6)}});
  cases.push_back({"add", weighted([](Tape&, std::span<const Var> v) { return ad::add(v[0], v[1]); }, {2, 3}),
                   {random_tensor({2, 3}, 7), random_tensor({2, 3}, 8)}});
  cases.push_back({"add/broadcast",
                   weighted([](Tape&, std::span<const Var> v) { return ad::add(v[0], v[1]); }, {2, 3}),
                   {random_tensor({2, 3}, 9), random_tensor({3}, 10)}});
  cases.push_back({"sub", weighted([](Tape&, std::span<const Var> v) { return ad::sub(v[0], v[1]); }, {2, 3}),
                   {random_tensor({2, 3}, 11), random_tensor({2, 3}, 12)}});
  cases.push_back({"mul", weighted([](Tape&, std::span<const Var> v) { return ad::mul(v[0], v[1]); }, {2, 3}),
                   {random_tensor({2, 3}, 13), random_tensor({2, 3}, 14)}});
  cases.push_back({"scale", weighted([](Tape&, std::span<const Var> v) { return ad::scale(v[0], -1.7); }, {4}),
                   {random_tensor({4}, 15)}});
  cases.push_back({"concat/axis0",
                   weighted([](Tape&, std::span<const Var> v) { return ad::concat({v[0], v[1]}, 0); }, {3, 3}),
                   {random_tensor({2, 3}, 16), random_tensor({1, 3}, 17)}});
  cases.push_back({"concat/axis1",
                   weighted([](Tape&, std::span<const Var> v) { return ad::concat({v[0], v[1]}, 1); }, {2, 5}),
                   {random_tensor({2, 3}, 18), random_tensor({2, 2}, 19)}});
  cases.push_back({"stack", weighted([](Tape&, std::span<const Var> v) { return ad::stack(v); }, {2, 3}),
                   {random_tensor({3}, 20), random_tensor({3}, 21)}});
  cases.push_back({"slice", weighted([](Tape&, std::span<const Var> v) { return ad::slice(v[0], 1, 4); }, {3}),
                   {random_tensor({5}, 22)}});
  cases.push_back({"row", weighted([](Tape&, std::span<const Var> v) { return ad::row(v[0], 1); }, {3}),
                   {random_tensor({2, 3}, 23)}});
  cases.push_back({"reshape",
                   weighted([](Tape&, std::span<const Var> v) { return ad::reshape(v[0], {2, 3}); }, {2, 3}),
                   {random_tensor({6}, 24)}});
  unary("tanh", ad::tanh, random_tensor({2, 3}, 25));
  unary("sigmoid", ad::sigmoid, random_tensor({2, 3}, 26));
  unary("relu", ad::relu, away_from_zero({2, 3}, 27));
  unary("exp", ad::exp, random_tensor({2, 3}, 28));
  unary("log", ad::log, random_tensor({2, 3}, 29, 0.3, 2.0));
  unary("abs", ad::abs, away_from_zero({2, 3}, 30));
  unary("log_sigmoid", ad::log_sigmoid, random_tensor({2, 3}, 31, -4.0, 4.0));
  cases.push_back({"sum", [](Tape&, std::span<const Var> v) { return ad::scale(ad::sum(v[0]), 0.7); },
                   {random_tensor({2, 3}, 32)}});
  cases.push_back({"mean", [](Tape&, std::span<const Var> v) { return ad::mean(ad::mul(v[0], v[0])); },
                   {random_tensor({2, 3}, 33)}});
  cases.push_back({"conv1d/single-channel",
                   weighted([](Tape&, std::span<const Var> v) { return ad::conv1d(v[0], v[1]); }, {5, 2}),
                   {random_tensor({5}, 34), random_tensor({2, 1, 3}, 35)}});
  cases.push_back({"conv1d/multi-channel",
                   weighted([](Tape&, std::span<const Var> v) { return ad::conv1d(v[0], v[1]); }, {4, 3}),
                   {random_tensor({4, 2}, 36), random_tensor({3, 2, 3}, 37)}});
  cases.push_back({"embedding_lookup",
                   weighted(
                       [](Tape&, std::span<const Var> v) {
                         const std::size_t idx[] = {0, 2, 2};
                         return ad::embedding_lookup(v[0], idx);
                       },
                       {3, 2}),
                   {random_tensor({4, 2}, 38)}});
  cases.push_back({"softmax",
                   weighted([](Tape&, std::span<const Var> v) { return ad::softmax(v[0]); }, {5}),
                   {random_tensor({5}, 39)}});
  cases.push_back({"softmax/axis0",
                   weighted([](Tape&, std::span<const Var> v) { return ad::softmax(v[0], 0); }, {3, 2}),
                   {random_tensor({3, 2}, 40)}});
  cases.push_back({"log_softmax",
                   weighted([](Tape&, std::span<const Var> v) { return ad::log_softmax(v[0]); }, {5}),
                   {random_tensor({5}, 41)}});
  cases.push_back({"kl_divergence",
                   [](Tape&, std::span<const Var> v) {
                     return ad::kl_divergence(ad::softmax(v[0]), ad::softmax(v[1]));
                   },
                   {random_tensor({2, 3}, 42), random_tensor({2, 3}, 43)}});
  return cases;
}

struct ToyProblem {
  std::string head;
  model::ModelConfig config;
  tasks::Dataset batch;
};

std::vector<ToyProblem> toy_problems() {
  model::ModelConfig base;
  base.src_vocab = 5;
  base.embed_dim = 4;
  base.encoder_hidden = 3;
  base.decoder_hidden = 4;
  base.attention_dim = 3;
  base.location_filters = 2;
  base.location_kernel = 3;
  base.prenet_dim = 3;
  base.max_source_length = 6;

  tasks::TaskSpec spec;
  spec.vocab = 5;
  spec.min_length = 2;
  spec.max_length = 3;

  std::vector<ToyProblem> out;
  auto cat = base;
  cat.tgt_vocab = 5;
  out.push_back({"categorical", cat, tasks::generate(spec, 2, 0)});

  auto cont = base;
  cont.output = model::OutputKind::Continuous;
  cont.frame_dim = 3;
  cont.reduction_factor = 2;
  spec.kind = tasks::TaskKind::Expansion;
  spec.frame_dim = 3;
  out.push_back({"continuous", cont, tasks::generate(spec, 2, 0)});
  return out;
}

std::vector<regimes::RegimeConfig> toy_regimes() {
  const regimes::ScheduleSpec schedule{regimes::ScheduleKind::Linear, 10};
  regimes::AttentionForcing tied;
  tied.tied = true;
  regimes::ProfessorForcing pf;
  pf.use_teacher_term = true;
  return {regimes::TeacherForcing{},
          regimes::FreeRunning{},
          regimes::ScheduledSamplingToken{schedule},
          regimes::ScheduledSamplingSeq{schedule},
          regimes::AttentionForcing{},
          tied,
          regimes::ModifiedAttentionForcing{},
          pf};
}

}  // namespace

bool GradCheckReport::passed() const {
  for (const auto& e : entries) {
    if (!e.passed) return false;
  }
  return !entries.empty();
}

std::vector<GradCheckEntry> GradCheckReport::failures() const {
  std::vector<GradCheckEntry> out;
  for (const auto& e : entries) {
    if (!e.passed) out.push_back(e);
  }
  return out;
}

GradCheckReport run_gradcheck_suite(const GradCheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckReport report;
  report.tolerance = options.tolerance;
  auto add = [&](std::string name, const ad::GradCheckResult& r) {
    report.entries.push_back(
        {std::move(name), r.max_relative_error, r.components_checked, r.max_relative_error < options.tolerance});
  };
  if (options.primitives) {
    for (auto& c : primitive_cases()) add(c.name, ad::grad_check(c.program, std::move(c.inputs), options.primitive_step));
  }
  if (options.regimes) {
    for (const auto& toy : toy_problems()) {
      auto params = model::ModelParams::init(toy.config, 1);
      const auto teacher = model::ModelParams::init(toy.config, 2);
      auto disc = regimes::DiscriminatorParams::init(regimes::behavior_dim(toy.config), 3, 3);
      for (const auto& regime : toy_regimes()) {
        const auto checks = regimes::grad_check_regime(regime, toy.batch, params, {&teacher, &disc, 3, 7},
                                                       options.regime_step);
        std::string prefix = toy.head + "/";
        if (const auto* af = std::get_if<regimes::AttentionForcing>(&regime); af != nullptr && af->tied) {
          prefix += "tied-";
        }
        for (const auto& c : checks) add(prefix + c.name, c.result);
      }
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void print_report(std::ostream& out, const GradCheckReport& report) {
  char line[160];
  for (const auto& e : report.entries) {
    std::snprintf(line, sizeof line, "%-4s %-36s max_rel_err=%.3e components=%zu\n", e.passed ? "ok" : "FAIL",
                  e.name.c_str(), e.max_relative_error, e.components);
    out << line;
  }
  const auto failed = report.failures();
  std::snprintf(line, sizeof line, "%zu checks, %zu failed, tolerance %.0e, %.1f s\n", report.entries.size(),
                failed.size(), report.tolerance, report.seconds);
  out << line;
  if (failed.empty()) {
    out << "PASS\n";
  } else {
    out << "FAIL:";
    for (const auto& e : failed) out << ' ' << e.name;
    out << '\n';
  }
}

}  // namespace seqforce::experiment
