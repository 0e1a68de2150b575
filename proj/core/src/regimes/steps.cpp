// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/regimes/steps.hpp"

#include <string>

#include "seqforce/autodiff/ops.hpp"
#include "seqforce/errors.hpp"
#include "seqforce/model/seq2seq.hpp"

namespace seqforce::regimes {

using ad::Var;
using model::BoundParams;
using model::ExamplePlan;
using model::HistoryTrace;
using model::Unrolled;

namespace {

/// Records history traces in unroll order, or hands back previously recorded ones.
struct TraceLog {
  std::vector<HistoryTrace> traces;
  const std::vector<HistoryTrace>* replay = nullptr;
  std::size_t cursor = 0;

  Unrolled run(const BoundParams& p, const tasks::AlignedPair& pair, ExamplePlan plan, Selection sel, Rng* rng) {
    if (replay != nullptr) {
      if (cursor >= replay->size()) throw ContractError("replay trace exhausted");
      plan.replay = &(*replay)[cursor++];
    }
    auto u = model::unroll(p, pair, plan, sel, rng);
    traces.push_back(u.trace);
    return u;
  }
};

struct Graph {
  Var objective;
  Var loss_y;
  std::optional<Var> loss_alpha;
  std::optional<Var> loss_stop;
  std::optional<Var> loss_adversarial;
  std::optional<Var> disc_loss;
  std::optional<double> epsilon;
};

/// Bound parameter sets taking part in one graph.
struct Binding {
  const BoundParams* student = nullptr;
  const BoundParams* teacher = nullptr;
  /// Frozen discriminator used by the generator's adversarial terms.
  const BoundDiscriminator* disc_fixed = nullptr;
  /// Trainable discriminator fed with detached behavior.
  const BoundDiscriminator* disc_train = nullptr;
};

Var batch_mean(const std::vector<Var>& per_example) { return ad::mean(ad::concat(per_example)); }

Var output_loss(const model::ModelConfig& cfg, const tasks::AlignedPair& pair, const Unrolled& u) {
  auto& tape = *u.enc.h.tape();
  if (cfg.categorical()) {
    const auto& tokens = pair.tokens();
    std::vector<Var> picks;
    picks.reserve(u.steps.size());
    for (std::size_t t = 0; t < u.steps.size(); ++t) {
      const std::size_t target = t < tokens.size() ? tokens[t] : cfg.eos();
      if (target > cfg.eos()) throw DataError("target token " + std::to_string(target) + " outside vocabulary");
      picks.push_back(ad::slice(u.steps[t].output, target, target + 1));
    }
    return ad::scale(ad::mean(ad::concat(picks)), -1.0);
  }
  const auto& frames = pair.frames();
  if (frames.cols() != cfg.frame_dim) throw ShapeError("output_loss", "target frames of width " +
                                                                          std::to_string(frames.cols()));
  const std::size_t T = frames.rows();
  const std::size_t r = cfg.reduction_factor;
  std::vector<Var> blocks;
  blocks.reserve(u.steps.size());
  for (std::size_t t = 0; t < u.steps.size(); ++t) {
    const std::size_t valid = std::min(r, T - std::min(T, t * r));
    if (valid == 0) break;
    blocks.push_back(valid == r ? u.steps[t].output : ad::slice(u.steps[t].output, 0, valid));
  }
  const Var predicted = blocks.size() == 1 ? blocks.front() : ad::concat(blocks, 0);
  const Var reference = tape.constant(frames.shape(), frames.storage());
  return ad::scale(ad::sum(ad::abs(ad::sub(predicted, reference))), 1.0 / static_cast<double>(T));
}

Var stop_loss(const Unrolled& u) {
  std::vector<Var> terms;
  terms.reserve(u.steps.size());
  for (std::size_t t = 0; t < u.steps.size(); ++t) {
    const Var z = *u.steps[t].stop;
    terms.push_back(t + 1 == u.steps.size() ? ad::log_sigmoid(z) : ad::log_sigmoid(ad::scale(z, -1.0)));
  }
  return ad::scale(ad::mean(ad::concat(terms)), -1.0);
}

std::vector<Var> alignment_rows(const Unrolled& u) {
  std::vector<Var> rows;
  rows.reserve(u.steps.size());
  for (const auto& s : u.steps) rows.push_back(s.alpha);
  return rows;
}

/// Per-example output and stop losses of a list of unrolls.
void add_output_losses(const model::ModelConfig& cfg, Batch batch, const std::vector<Unrolled>& runs, Graph& g) {
  std::vector<Var> ys;
  std::vector<Var> stops;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ys.push_back(output_loss(cfg, batch[i], runs[i]));
    if (!cfg.categorical()) stops.push_back(stop_loss(runs[i]));
  }
  g.loss_y = batch_mean(ys);
  g.objective = g.loss_y;
  if (!stops.empty()) g.loss_stop = batch_mean(stops);
}

ExamplePlan token_coin_plan(std::size_t steps, double eps, Rng& coins) {
  ExamplePlan plan = model::uniform_plan(steps, HistorySource::Reference);
  for (std::size_t t = 1; t < steps; ++t) {
    plan.history[t] = uniform01(coins) < eps ? HistorySource::Reference : HistorySource::Generated;
  }
  return plan;
}

Graph attention_forcing_graph(Batch batch, const Binding& b, double gamma, HistorySource history,
                              Selection selection, Rng& samples, TraceLog& log) {
  if (b.teacher == nullptr) throw ContractError("attention forcing needs a teacher (or tied mode)");
  const auto& cfg = *b.student->config;
  std::vector<Unrolled> runs;
  std::vector<Var> kls;
  for (const auto& pair : batch) {
    const std::size_t steps = model::decode_steps(cfg, pair);
    if (model::decode_steps(*b.teacher->config, pair) != steps) {
      throw ContractError("teacher and student disagree on the number of decode steps");
    }
    const Unrolled ref = log.run(*b.teacher, pair, model::uniform_plan(steps, HistorySource::Reference),
                                 Selection::Argmax, nullptr);
    ExamplePlan plan = model::uniform_plan(steps, history);
    plan.context_alignment = alignment_rows(ref);
    auto u = log.run(*b.student, pair, std::move(plan), selection, &samples);
    kls.push_back(alignment_kl(ref.alignment(), u.alignment()));
    runs.push_back(std::move(u));
  }
  Graph g;
  add_output_losses(cfg, batch, runs, g);
  g.loss_alpha = batch_mean(kls);
  if (gamma > 0.0) g.objective = ad::add(g.loss_y, ad::scale(*g.loss_alpha, gamma));
  return g;
}

std::vector<Var> detached(const std::vector<Var>& seq) {
  std::vector<Var> out;
  out.reserve(seq.size());
  for (const auto& v : seq) out.push_back(ad::detach(v));
  return out;
}

Graph professor_forcing_graph(Batch batch, const Binding& b, const ProfessorForcing& c, Rng& samples,
                              TraceLog& log) {
  const auto& cfg = *b.student->config;
  std::vector<Unrolled> tf_runs;
  std::vector<Var> adv_free;
  std::vector<Var> adv_teacher;
  std::vector<Var> disc_terms;
  const bool free_term = c.lambda_free > 0.0;
  const bool teacher_term = c.use_teacher_term && c.lambda_teacher > 0.0;
  for (const auto& pair : batch) {
    const std::size_t steps = model::decode_steps(cfg, pair);
    auto tf = log.run(*b.student, pair, model::uniform_plan(steps, HistorySource::Reference), Selection::Argmax,
                      nullptr);
    const auto fr = log.run(*b.student, pair, model::uniform_plan(steps, HistorySource::Generated), c.selection,
                            &samples);
    const auto beta_tf = behavior_sequence(cfg, tf);
    const auto beta_fr = behavior_sequence(cfg, fr);
    if (b.disc_fixed != nullptr) {
      if (free_term) adv_free.push_back(ad::scale(ad::log_sigmoid(discriminator_logit(*b.disc_fixed, beta_fr)), -1.0));
      if (teacher_term) {
        adv_teacher.push_back(
            ad::scale(ad::log_sigmoid(ad::scale(discriminator_logit(*b.disc_fixed, beta_tf), -1.0)), -1.0));
      }
    }
    if (b.disc_train != nullptr) {
      const Var real = ad::log_sigmoid(discriminator_logit(*b.disc_train, detached(beta_tf)));
      const Var fake = ad::log_sigmoid(ad::scale(discriminator_logit(*b.disc_train, detached(beta_fr)), -1.0));
      disc_terms.push_back(ad::scale(ad::add(real, fake), -1.0));
    }
    tf_runs.push_back(std::move(tf));
  }
  Graph g;
  add_output_losses(cfg, batch, tf_runs, g);
  std::optional<Var> adversarial;
  if (!adv_free.empty()) adversarial = ad::scale(batch_mean(adv_free), c.lambda_free);
  if (!adv_teacher.empty()) {
    const Var t = ad::scale(batch_mean(adv_teacher), c.lambda_teacher);
    adversarial = adversarial ? ad::add(*adversarial, t) : t;
  }
  if (adversarial) {
    g.loss_adversarial = adversarial;
    g.objective = ad::add(g.loss_y, *adversarial);
  }
  if (!disc_terms.empty()) g.disc_loss = batch_mean(disc_terms);
  return g;
}

Graph build_graph(const RegimeConfig& config, Batch batch, const Binding& b, std::size_t step_index,
                  std::uint64_t seed, TraceLog& log) {
  if (batch.empty()) throw ContractError("regime step on an empty batch");
  const auto& cfg = *b.student->config;
  Rng coins = coin_rng(seed, step_index);
  Rng samples = sample_rng(seed, step_index);

  auto simple = [&](auto&& make_plan, Selection selection) {
    std::vector<Unrolled> runs;
    runs.reserve(batch.size());
    for (const auto& pair : batch) {
      runs.push_back(log.run(*b.student, pair, make_plan(model::decode_steps(cfg, pair)), selection, &samples));
    }
    Graph g;
    add_output_losses(cfg, batch, runs, g);
    return g;
  };

  if (std::holds_alternative<TeacherForcing>(config)) {
    return simple([](std::size_t n) { return model::uniform_plan(n, HistorySource::Reference); }, Selection::Argmax);
  }
  if (const auto* fr = std::get_if<FreeRunning>(&config)) {
    return simple([](std::size_t n) { return model::uniform_plan(n, HistorySource::Generated); }, fr->selection);
  }
  if (const auto* ss = std::get_if<ScheduledSamplingToken>(&config)) {
    const double eps = ss->schedule.epsilon(step_index);
    auto g = simple([&](std::size_t n) { return token_coin_plan(n, eps, coins); }, ss->selection);
    g.epsilon = eps;
    return g;
  }
  if (const auto* ss = std::get_if<ScheduledSamplingSeq>(&config)) {
    const double eps = ss->schedule.epsilon(step_index);
    auto g = simple(
        [&](std::size_t n) {
          return model::uniform_plan(n, uniform01(coins) < eps ? HistorySource::Reference : HistorySource::Generated);
        },
        ss->selection);
    g.epsilon = eps;
    return g;
  }
  if (const auto* af = std::get_if<AttentionForcing>(&config)) {
    return attention_forcing_graph(batch, b, af->gamma, af->history_override.value_or(HistorySource::Generated),
                                   af->selection, samples, log);
  }
  if (const auto* maf = std::get_if<ModifiedAttentionForcing>(&config)) {
    return attention_forcing_graph(batch, b, maf->gamma, HistorySource::Reference, Selection::Argmax, samples, log);
  }
  return professor_forcing_graph(batch, b, std::get<ProfessorForcing>(config), samples, log);
}

bool tied(const RegimeConfig& config) {
  if (const auto* af = std::get_if<AttentionForcing>(&config)) return af->tied;
  if (const auto* maf = std::get_if<ModifiedAttentionForcing>(&config)) return maf->tied;
  return false;
}

bool uses_teacher(const RegimeConfig& config) {
  return std::holds_alternative<AttentionForcing>(config) || std::holds_alternative<ModifiedAttentionForcing>(config);
}

}  // namespace

Rng coin_rng(std::uint64_t seed, std::size_t step_index) { return make_rng(seed, {step_index, 1}); }
Rng sample_rng(std::uint64_t seed, std::size_t step_index) { return make_rng(seed, {step_index, 2}); }

std::vector<bool> sequence_coins(std::uint64_t seed, std::size_t step_index, std::size_t batch_size,
                                 double epsilon) {
  Rng coins = coin_rng(seed, step_index);
  std::vector<bool> out(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) out[i] = uniform01(coins) < epsilon;
  return out;
}

double alignment_kl_loss(const ad::Tensor& alpha_ref, const ad::Tensor& alpha_gen) {
  if (alpha_ref.shape() != alpha_gen.shape()) {
    throw ContractError("alignment_kl_loss: shapes " + ad::to_string(alpha_ref.shape()) + " and " +
                        ad::to_string(alpha_gen.shape()) + " differ");
  }
  ad::Tape tape;
  return ad::kl_divergence(tape.leaf(alpha_ref, false), tape.leaf(alpha_gen, false)).item();
}

double alignment_kl_loss(std::span<const ad::Tensor> alpha_ref, std::span<const ad::Tensor> alpha_gen) {
  if (alpha_ref.size() != alpha_gen.size() || alpha_ref.empty()) {
    throw ContractError("alignment_kl_loss: batches must be non-empty and of equal size");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < alpha_ref.size(); ++i) total += alignment_kl_loss(alpha_ref[i], alpha_gen[i]);
  return total / static_cast<double>(alpha_ref.size());
}

Var alignment_kl(Var alpha_ref, Var alpha_gen) {
  if (alpha_ref.shape() != alpha_gen.shape()) {
    throw ContractError("alignment_kl: shapes " + ad::to_string(alpha_ref.shape()) + " and " +
                        ad::to_string(alpha_gen.shape()) + " differ");
  }
  const std::size_t rows = alpha_ref.shape().size() == 2 ? alpha_ref.shape()[0] : 1;
  return ad::scale(ad::kl_divergence(alpha_ref, alpha_gen), 1.0 / static_cast<double>(rows));
}

StepResult regime_step(const RegimeConfig& config, Batch batch, model::ModelParams& params,
                       const RegimeInputs& inputs) {
  validate(config);
  ad::Tape tape;
  const auto student = model::bind(tape, params, true);
  std::optional<BoundParams> teacher_bound;
  std::optional<BoundDiscriminator> disc_fixed;
  std::optional<BoundDiscriminator> disc_train;
  Binding b;
  b.student = &student;
  if (uses_teacher(config)) {
    if (tied(config)) {
      b.teacher = &student;
    } else {
      if (inputs.teacher == nullptr) throw ContractError(std::string(regime_name(config)) + " needs a teacher model");
      teacher_bound = model::bind(tape, *inputs.teacher, false);
      b.teacher = &*teacher_bound;
    }
  }
  if (needs_discriminator(config)) {
    if (inputs.discriminator == nullptr) throw ContractError("professor forcing needs a discriminator");
    disc_fixed = bind(tape, *inputs.discriminator, false);
    disc_train = bind(tape, *inputs.discriminator, true);
    b.disc_fixed = &*disc_fixed;
    b.disc_train = &*disc_train;
  }
  TraceLog log;
  const Graph g = build_graph(config, batch, b, inputs.step_index, inputs.seed, log);

  Var target = g.objective;
  if (g.loss_stop) target = ad::add(target, *g.loss_stop);
  if (g.disc_loss) target = ad::add(target, *g.disc_loss);
  tape.backward(target);
  model::accumulate_grads(tape, student, params);
  if (disc_train) accumulate_grads(tape, *disc_train, *inputs.discriminator);

  StepResult r;
  r.loss = g.objective.item();
  r.loss_y = g.loss_y.item();
  if (g.loss_alpha) r.loss_alpha = g.loss_alpha->item();
  if (g.loss_stop) r.loss_stop = g.loss_stop->item();
  if (g.loss_adversarial) r.loss_adversarial = g.loss_adversarial->item();
  if (g.disc_loss) r.disc_loss = g.disc_loss->item();
  r.epsilon = g.epsilon;
  return r;
}

StepResult teacher_forcing_step(Batch batch, model::ModelParams& params) {
  return regime_step(TeacherForcing{}, batch, params, {});
}

StepResult free_running_step(Batch batch, model::ModelParams& params, Selection mode, std::uint64_t seed,
                             std::size_t step_index) {
  return regime_step(FreeRunning{mode}, batch, params, {nullptr, nullptr, step_index, seed});
}

StepResult scheduled_sampling_token_step(Batch batch, model::ModelParams& params, std::size_t step_index,
                                         const ScheduleSpec& schedule, std::uint64_t seed, Selection mode) {
  return regime_step(ScheduledSamplingToken{schedule, mode}, batch, params, {nullptr, nullptr, step_index, seed});
}

StepResult scheduled_sampling_seq_step(Batch batch, model::ModelParams& params, std::size_t step_index,
                                       const ScheduleSpec& schedule, std::uint64_t seed, Selection mode) {
  return regime_step(ScheduledSamplingSeq{schedule, mode}, batch, params, {nullptr, nullptr, step_index, seed});
}

StepResult attention_forcing_step(Batch batch, model::ModelParams& student, const model::ModelParams* teacher,
                                  const AttentionForcing& config, std::uint64_t seed, std::size_t step_index) {
  return regime_step(config, batch, student, {teacher, nullptr, step_index, seed});
}

StepResult modified_attention_forcing_step(Batch batch, model::ModelParams& student,
                                           const model::ModelParams* teacher,
                                           const ModifiedAttentionForcing& config) {
  return regime_step(config, batch, student, {teacher, nullptr, 0, 0});
}

StepResult professor_forcing_step(Batch batch, model::ModelParams& generator, DiscriminatorParams& discriminator,
                                  const ProfessorForcing& config, std::uint64_t seed, std::size_t step_index) {
  return regime_step(config, batch, generator, {nullptr, &discriminator, step_index, seed});
}

std::vector<RegimeGradCheck> grad_check_regime(const RegimeConfig& config, Batch batch, model::ModelParams& params,
                                               const RegimeInputs& inputs, double h) {
  validate(config);
  const std::string name(regime_name(config));
  const bool is_tied = tied(config);
  if (uses_teacher(config) && !is_tied && inputs.teacher == nullptr) {
    throw ContractError(name + " needs a teacher model");
  }
  if (needs_discriminator(config) && inputs.discriminator == nullptr) {
    throw ContractError("professor forcing needs a discriminator");
  }

  // Teacher, frozen discriminator and trainable discriminator as needed by one program.
  auto bind_others = [&](ad::Tape& tape, const BoundParams& student, Binding& b,
                         std::optional<BoundParams>& teacher_bound, std::optional<BoundDiscriminator>& disc_fixed) {
    b.student = &student;
    if (uses_teacher(config)) {
      if (is_tied) {
        b.teacher = &student;
      } else {
        teacher_bound = model::bind(tape, *inputs.teacher, false);
        b.teacher = &*teacher_bound;
      }
    }
    if (needs_discriminator(config)) {
      disc_fixed = bind(tape, *inputs.discriminator, false);
      b.disc_fixed = &*disc_fixed;
    }
  };

  // One forward pass fixes every data-dependent history choice.
  std::vector<HistoryTrace> traces;
  {
    ad::Tape tape;
    const auto student = model::bind(tape, params, false);
    Binding b;
    std::optional<BoundParams> teacher_bound;
    std::optional<BoundDiscriminator> disc_fixed;
    bind_others(tape, student, b, teacher_bound, disc_fixed);
    TraceLog log;
    build_graph(config, batch, b, inputs.step_index, inputs.seed, log);
    traces = std::move(log.traces);
  }

  std::vector<RegimeGradCheck> out;
  const auto& cfg = params.config;
  {
    const ad::Program program = [&](ad::Tape& tape, std::span<const Var> leaves) {
      const auto student = model::bind_leaves(cfg, leaves);
      Binding b;
      std::optional<BoundParams> teacher_bound;
      std::optional<BoundDiscriminator> disc_fixed;
      bind_others(tape, student, b, teacher_bound, disc_fixed);
      TraceLog log;
      log.replay = &traces;
      return build_graph(config, batch, b, inputs.step_index, inputs.seed, log).objective;
    };
    out.push_back({name + "/model", ad::grad_check(program, params.tensors(), h)});
  }
  if (!cfg.categorical()) {
    std::vector<ad::Tensor*> stop = {&params.w.stop_w, &params.w.stop_b};
    const ad::Program program = [&](ad::Tape& tape, std::span<const Var> leaves) {
      auto student = model::bind(tape, params, false);
      student.w.stop_w = leaves[0];
      student.w.stop_b = leaves[1];
      Binding b;
      std::optional<BoundParams> teacher_bound;
      std::optional<BoundDiscriminator> disc_fixed;
      bind_others(tape, student, b, teacher_bound, disc_fixed);
      TraceLog log;
      log.replay = &traces;
      return *build_graph(config, batch, b, inputs.step_index, inputs.seed, log).loss_stop;
    };
    out.push_back({name + "/stop", ad::grad_check(program, stop, h)});
  }
  if (needs_discriminator(config)) {
    const ad::Program program = [&](ad::Tape& tape, std::span<const Var> leaves) {
      const auto student = model::bind(tape, params, false);
      const auto disc = bind_leaves(leaves);
      Binding b;
      b.student = &student;
      b.disc_train = &disc;
      TraceLog log;
      log.replay = &traces;
      return *build_graph(config, batch, b, inputs.step_index, inputs.seed, log).disc_loss;
    };
    out.push_back({"pf/discriminator", ad::grad_check(program, inputs.discriminator->tensors(), h)});
  }
  return out;
}

}  // namespace seqforce::regimes
