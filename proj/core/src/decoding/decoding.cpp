// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/decoding/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqforce/errors.hpp"
#include "seqforce/model/seq2seq.hpp"

namespace seqforce::decoding {

using model::HistoryInput;
using model::Selection;

std::size_t Generation::length() const { return discrete() ? tokens().size() : (frames().empty() ? 0 : frames().rows()); }

namespace {

ad::Tensor rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  std::vector<double> flat;
  flat.reserve(rows.size() * rows.front().size());
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return ad::Tensor({rows.size(), rows.front().size()}, std::move(flat));
}

std::vector<double> values_of(ad::Var v) {
  const auto s = v.value();
  return {s.begin(), s.end()};
}

/// Output frames of the first `frames` rows of a list of (r, D) blocks.
ad::Tensor frames_of(const std::vector<std::vector<double>>& blocks, std::size_t frame_dim, std::size_t frames) {
  if (frames == 0) return {};
  std::vector<double> flat;
  for (const auto& b : blocks) flat.insert(flat.end(), b.begin(), b.end());
  flat.resize(frames * frame_dim);
  return ad::Tensor({frames, frame_dim}, std::move(flat));
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

Generation free_run(const model::ModelParams& params, const TokenSeq& src, std::size_t max_steps, bool stop_rule,
                    Selection selection, Rng* rng, std::optional<std::size_t> frames) {
  const auto& cfg = params.config;
  Generation g;
  if (cfg.categorical()) {
    g.output = TokenSeq{};
  } else {
    g.output = ad::Tensor{};
  }
  if (max_steps == 0) {
    g.truncated = stop_rule;
    return g;
  }
  ad::Tape tape;
  const auto p = model::bind(tape, params, false);
  const auto enc = model::encode(p, src);
  auto state = model::initial_state(tape, p);
  auto alpha = model::initial_alignment(tape, enc.length);
  HistoryInput history = HistoryInput::start();
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<double>> blocks;
  TokenSeq tokens;
  bool finished = false;
  for (std::size_t t = 0; t < max_steps && !finished; ++t) {
    auto out = model::decode_step(p, enc, state, history, alpha);
    rows.push_back(values_of(out.alpha));
    history = model::select_history(cfg, out, selection, rng);
    if (cfg.categorical()) {
      if (stop_rule && history.token == cfg.eos()) {
        finished = true;
      } else {
        tokens.push_back(history.token);
      }
    } else {
      blocks.push_back(values_of(out.output));
      const double prob = sigmoid(out.stop->item());
      g.stop_probs.push_back(prob);
      if (stop_rule && prob >= 0.5) finished = true;
    }
    state = out.state;
    alpha = out.alpha;
  }
  g.steps = rows.size();
  g.alignment = rows_to_matrix(rows);
  g.truncated = stop_rule && !finished;
  if (cfg.categorical()) {
    g.output = std::move(tokens);
  } else {
    const std::size_t produced = blocks.size() * cfg.reduction_factor;
    g.output = frames_of(blocks, cfg.frame_dim, frames ? std::min(*frames, produced) : produced);
  }
  return g;
}

std::size_t steps_for_length(const model::ModelConfig& cfg, std::size_t target_length) {
  if (cfg.categorical()) return target_length + 1;
  return (target_length + cfg.reduction_factor - 1) / cfg.reduction_factor;
}

/// Outputs of a guided unroll: argmax tokens of the first T steps, or the first T frames.
Generation guided_output(const model::ModelConfig& cfg, const model::Unrolled& u, std::size_t target_length) {
  Generation g;
  g.steps = u.steps.size();
  g.alignment = u.alignment_values();
  if (cfg.categorical()) {
    TokenSeq tokens;
    for (std::size_t t = 0; t < target_length; ++t) tokens.push_back(model::argmax(u.steps[t].output.value()));
    g.output = std::move(tokens);
  } else {
    std::vector<std::vector<double>> blocks;
    for (const auto& s : u.steps) {
      blocks.push_back(values_of(s.output));
      g.stop_probs.push_back(sigmoid(s.stop->item()));
    }
    g.output = frames_of(blocks, cfg.frame_dim, target_length);
  }
  return g;
}

}  // namespace

Generation greedy_decode(const model::ModelParams& params, const TokenSeq& src, std::size_t max_steps) {
  return free_run(params, src, max_steps, true, Selection::Argmax, nullptr, std::nullopt);
}

Generation greedy_decode_fixed(const model::ModelParams& params, const TokenSeq& src, std::size_t steps,
                               std::optional<std::size_t> frames) {
  return free_run(params, src, steps, false, Selection::Argmax, nullptr, frames);
}

Generation sample_decode(const model::ModelParams& params, const TokenSeq& src, std::size_t max_steps, Rng& rng) {
  return free_run(params, src, max_steps, true, Selection::Sample, &rng, std::nullopt);
}

std::vector<Hypothesis> beam_search_decode(const model::ModelParams& params, const TokenSeq& src,
                                           const BeamConfig& config) {
  const auto& cfg = params.config;
  if (config.width < 1) throw ContractError("beam width must be >= 1");
  if (!cfg.categorical()) throw ContractError("beam search needs a categorical model");

  struct Live {
    TokenSeq tokens;
    double log_prob = 0.0;
    double score = 0.0;
    bool finished = false;
    std::size_t steps = 0;
    model::DecoderState state;
    ad::Var alpha;
    std::vector<std::vector<double>> rows;
  };
  struct Candidate {
    double score;
    std::size_t parent;
    double step_log_prob;
    std::size_t token;  // eos() + 1 marks a carried finished hypothesis
  };

  ad::Tape tape;
  const auto p = model::bind(tape, params, false);
  const auto enc = model::encode(p, src);
  std::vector<Live> beams(1);
  beams[0].state = model::initial_state(tape, p);
  beams[0].alpha = model::initial_alignment(tape, enc.length);
  const std::size_t carry = cfg.eos() + 1;

  for (std::size_t step = 0; step < config.max_steps; ++step) {
    if (std::all_of(beams.begin(), beams.end(), [](const Live& b) { return b.finished; })) break;
    std::vector<Candidate> candidates;
    std::vector<std::optional<model::StepOutput>> outs(beams.size());
    for (std::size_t i = 0; i < beams.size(); ++i) {
      const auto& b = beams[i];
      if (b.finished) {
        candidates.push_back({b.score, i, 0.0, carry});
        continue;
      }
      const HistoryInput history = b.steps == 0 ? HistoryInput::start() : HistoryInput::of_token(b.tokens.back());
      outs[i] = model::decode_step(p, enc, b.state, history, b.alpha);
      const auto lp = outs[i]->output.value();
      for (std::size_t k = 0; k < lp.size(); ++k) {
        const double total = b.log_prob + lp[k];
        const double score =
            config.length_normalization ? total / static_cast<double>(b.steps + 1) : total;
        candidates.push_back({score, i, lp[k], k});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) return a.parent < b.parent;
      if (a.step_log_prob != b.step_log_prob) return a.step_log_prob > b.step_log_prob;
      return a.token < b.token;
    });
    std::vector<Live> next;
    for (std::size_t c = 0; c < candidates.size() && next.size() < config.width; ++c) {
      const auto& cand = candidates[c];
      const auto& parent = beams[cand.parent];
      if (cand.token == carry) {
        next.push_back(parent);
        continue;
      }
      Live child;
      child.tokens = parent.tokens;
      child.log_prob = parent.log_prob + cand.step_log_prob;
      child.score = cand.score;
      child.steps = parent.steps + 1;
      child.state = outs[cand.parent]->state;
      child.alpha = outs[cand.parent]->alpha;
      child.rows = parent.rows;
      child.rows.push_back(values_of(child.alpha));
      if (cand.token == cfg.eos()) {
        child.finished = true;
      } else {
        child.tokens.push_back(cand.token);
      }
      next.push_back(std::move(child));
    }
    beams = std::move(next);
  }

  std::vector<Hypothesis> out;
  out.reserve(beams.size());
  for (auto& b : beams) {
    Hypothesis h;
    h.tokens = std::move(b.tokens);
    h.log_prob = b.log_prob;
    h.score = b.score;
    h.finished = b.finished;
    h.alignment = rows_to_matrix(b.rows);
    out.push_back(std::move(h));
  }
  return out;
}

Generation teacher_forced_generate(const model::ModelParams& params, const tasks::AlignedPair& pair) {
  const auto& cfg = params.config;
  ad::Tape tape;
  const auto p = model::bind(tape, params, false);
  const auto plan = model::uniform_plan(model::decode_steps(cfg, pair), model::HistorySource::Reference);
  return guided_output(cfg, model::unroll(p, pair, plan), pair.target_length());
}

Generation attention_forced_generate(const model::ModelParams& params, const TokenSeq& src,
                                     const ad::Tensor& alpha_ref, std::size_t target_length) {
  const auto& cfg = params.config;
  const std::size_t steps = steps_for_length(cfg, target_length);
  if (steps == 0) throw ContractError("attention_forced_generate: target length must be >= 1");
  if (alpha_ref.rank() != 2 || alpha_ref.rows() != steps || alpha_ref.cols() != src.size()) {
    throw ContractError("attention_forced_generate: reference alignment " + ad::to_string(alpha_ref.shape()) +
                        " must be " + std::to_string(steps) + " x " + std::to_string(src.size()));
  }
  if (!tasks::is_row_stochastic(alpha_ref)) {
    throw ContractError("attention_forced_generate: reference alignment rows must be probability vectors");
  }
  // The unroll only reads the reference for its length; a placeholder target keeps it generic.
  tasks::AlignedPair pair;
  pair.src = src;
  if (cfg.categorical()) {
    pair.tgt = TokenSeq(target_length, 0);
  } else {
    pair.tgt = ad::Tensor({target_length, cfg.frame_dim});
  }
  ad::Tape tape;
  const auto p = model::bind(tape, params, false);
  auto plan = model::uniform_plan(steps, model::HistorySource::Generated);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto row = alpha_ref.row(t);
    plan.context_alignment.push_back(tape.constant({row.size()}, std::vector<double>(row.begin(), row.end())));
  }
  return guided_output(cfg, model::unroll(p, pair, plan), target_length);
}

}  // namespace seqforce::decoding
