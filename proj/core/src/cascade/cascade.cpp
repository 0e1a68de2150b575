// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/cascade/cascade.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "../tasks/record_json.hpp"
#include "seqforce/autodiff/ops.hpp"
#include "seqforce/errors.hpp"
#include "seqforce/model/seq2seq.hpp"
#include "seqforce/random.hpp"
#include "seqforce/regimes/train_loop.hpp"

namespace seqforce::cascade {

std::string_view mode_name(UpstreamMode mode) {
  switch (mode) {
    case UpstreamMode::TeacherForced:
      return "teacher_forced";
    case UpstreamMode::AttentionForced:
      return "attention_forced";
    case UpstreamMode::FreeRunning:
      return "free";
  }
  return "teacher_forced";
}

std::optional<UpstreamMode> mode_from_name(std::string_view name) {
  if (name == "teacher_forced") return UpstreamMode::TeacherForced;
  if (name == "attention_forced") return UpstreamMode::AttentionForced;
  if (name == "free") return UpstreamMode::FreeRunning;
  return std::nullopt;
}

ad::Tensor WaveformSpec::matrix() const {
  if (samples_per_frame == 0 || frame_dim == 0) throw ContractError("waveform dimensions must be positive");
  Rng rng = make_rng(seed, {0x3a7e});
  ad::Tensor m({samples_per_frame, frame_dim});
  const double s = 1.0 / std::sqrt(static_cast<double>(frame_dim));
  for (auto& v : m.values()) v = s * normal(rng);
  return m;
}

std::vector<double> synthesize(const WaveformSpec& spec, const ad::Tensor& frames) {
  if (frames.rank() != 2 || frames.cols() != spec.frame_dim) {
    throw ShapeError("synthesize", ad::to_string(frames.shape()) + " vs D=" + std::to_string(spec.frame_dim));
  }
  const auto m = spec.matrix();
  const std::size_t k = spec.samples_per_frame;
  std::vector<double> w(frames.rows() * k);
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    const auto y = frames.row(t);
    for (std::size_t j = 0; j < k; ++j) {
      double v = static_cast<double>(j) / static_cast<double>(k);
      for (std::size_t d = 0; d < spec.frame_dim; ++d) v += m(j, d) * y[d];
      w[t * k + j] = v;
    }
  }
  return w;
}

void check_corpus(const Corpus& corpus, std::size_t samples_per_frame) {
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& item = corpus[i];
    const std::size_t frames = item.features.empty() ? 0 : item.features.rows();
    if (frames == 0 || frames * samples_per_frame != item.wave.size()) {
      throw ContractError("corpus item " + std::to_string(i) + ": " + std::to_string(frames) + " frames x " +
                          std::to_string(samples_per_frame) + " samples != waveform length " +
                          std::to_string(item.wave.size()));
    }
  }
}

Corpus generate_feature_corpus(const tasks::Dataset& dataset, const model::ModelParams& upstream, UpstreamMode mode,
                               const WaveformSpec& wave, const model::ModelParams* alignment_model) {
  if (mode == UpstreamMode::FreeRunning) {
    throw ContractError(
        "free-running upstream cannot build a cascade corpus: its output is not time-aligned with the reference "
        "waveform; use teacher_forced or attention_forced");
  }
  if (upstream.config.categorical()) throw ContractError("cascade corpus needs a continuous upstream model");
  const auto& aligner = alignment_model != nullptr ? *alignment_model : upstream;
  Corpus corpus;
  corpus.reserve(dataset.size());
  for (const auto& pair : dataset) {
    if (pair.discrete()) throw ContractError("cascade corpus needs frame targets");
    const std::size_t T = pair.target_length();
    decoding::Generation g;
    if (mode == UpstreamMode::TeacherForced) {
      g = decoding::teacher_forced_generate(upstream, pair);
    } else {
      const auto reference = decoding::teacher_forced_generate(aligner, pair);
      g = decoding::attention_forced_generate(upstream, pair.src, reference.alignment, T);
    }
    if (g.length() != T) {
      throw std::logic_error("guided generation produced " + std::to_string(g.length()) + " frames for " +
                             std::to_string(T));
    }
    corpus.push_back(CorpusItem{pair.src, g.frames(), synthesize(wave, pair.frames()), pair.align});
  }
  check_corpus(corpus, wave.samples_per_frame);
  return corpus;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus " + path.string());
  for (const auto& item : corpus) {
    tasks::AlignedPair pair{item.src, item.features, item.align};
    auto j = tasks::detail::pair_to_json(pair);
    j["wave"] = item.wave;
    out << j.dump() << '\n';
  }
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  Corpus corpus;
  std::vector<std::size_t> bad;
  std::string problems;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto pair = tasks::detail::pair_from_json(j, {tasks::TargetFormat::Frames, false});
      if (!j.contains("wave") || !j["wave"].is_array()) throw DataError("missing field 'wave'");
      CorpusItem item{pair.src, pair.frames(), j["wave"].get<std::vector<double>>(), pair.align};
      if (item.wave.empty() || item.wave.size() % item.features.rows() != 0) {
        throw DataError("'wave' length is not a multiple of the frame count");
      }
      corpus.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      bad.push_back(line_no);
      problems += "\n  line " + std::to_string(line_no) + ": " + e.what();
    } catch (const DataError& e) {
      bad.push_back(line_no);
      problems += "\n  line " + std::to_string(line_no) + ": " + e.what();
    }
  }
  if (!bad.empty()) throw DataError(path.string() + ": malformed corpus record(s):" + problems, bad);
  return corpus;
}

namespace {

template <class P, class F>
void visit(P& p, F&& f) {
  f("downstream.gru.w_input", p.gru.w_input);
  f("downstream.gru.w_hidden", p.gru.w_hidden);
  f("downstream.gru.b_input", p.gru.b_input);
  f("downstream.gru.b_hidden", p.gru.b_hidden);
  f("downstream.out_w", p.out_w);
  f("downstream.out_b", p.out_b);
}

struct BoundDownstream {
  model::GruWeights<ad::Var> gru;
  ad::Var out_w;
  ad::Var out_b;
  std::vector<ad::Var> leaves;
};

BoundDownstream bind(ad::Tape& tape, const DownstreamParams& phi, bool track) {
  BoundDownstream b;
  const auto named = phi.named();
  std::size_t i = 0;
  visit(b, [&](const char*, ad::Var& v) {
    v = tape.leaf(*named[i++].second, track);
    b.leaves.push_back(v);
  });
  return b;
}

/// Predicted (T, k) windows.
ad::Var forward(const BoundDownstream& b, ad::Tape& tape, const ad::Tensor& features) {
  const std::size_t H = b.out_w.shape()[0] - features.cols();
  const ad::Var y = tape.constant(features.shape(), features.storage());
  ad::Var h = tape.constant({H}, std::vector<double>(H, 0.0));
  std::vector<ad::Var> rows;
  rows.reserve(features.rows());
  for (std::size_t t = 0; t < features.rows(); ++t) {
    const ad::Var y_t = ad::row(y, t);
    h = model::gru_step(b.gru, y_t, h);
    rows.push_back(ad::add(ad::matmul(ad::concat({h, y_t}), b.out_w), b.out_b));
  }
  return ad::stack(rows);
}

}  // namespace

DownstreamParams DownstreamParams::init(const DownstreamConfig& config, std::uint64_t seed) {
  if (config.frame_dim == 0 || config.samples_per_frame == 0 || config.hidden == 0) {
    throw ContractError("downstream dimensions must be positive");
  }
  Rng rng = make_rng(seed, {0xd0e5});
  DownstreamParams p;
  p.config = config;
  const std::size_t D = config.frame_dim;
  const std::size_t H = config.hidden;
  const std::size_t k = config.samples_per_frame;
  p.gru.w_input = ad::Tensor({D, 3 * H});
  glorot_uniform(p.gru.w_input, D, H, rng);
  p.gru.w_hidden = ad::Tensor({H, 3 * H});
  glorot_uniform(p.gru.w_hidden, H, H, rng);
  p.gru.b_input = ad::Tensor({3 * H});
  p.gru.b_hidden = ad::Tensor({3 * H});
  p.out_w = ad::Tensor({H + D, k});
  glorot_uniform(p.out_w, H + D, k, rng);
  p.out_b = ad::Tensor({k});
  return p;
}

std::vector<std::pair<std::string, ad::Tensor*>> DownstreamParams::named() {
  std::vector<std::pair<std::string, ad::Tensor*>> out;
  visit(*this, [&](const char* name, ad::Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

std::vector<std::pair<std::string, const ad::Tensor*>> DownstreamParams::named() const {
  std::vector<std::pair<std::string, const ad::Tensor*>> out;
  visit(*this, [&](const char* name, const ad::Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

std::vector<ad::Tensor*> DownstreamParams::tensors() {
  std::vector<ad::Tensor*> out;
  visit(*this, [&](const char*, ad::Tensor& t) { out.push_back(&t); });
  return out;
}

bool operator==(const DownstreamParams& a, const DownstreamParams& b) {
  return a.config.frame_dim == b.config.frame_dim && a.config.samples_per_frame == b.config.samples_per_frame &&
         a.config.hidden == b.config.hidden && a.gru.w_input == b.gru.w_input && a.gru.w_hidden == b.gru.w_hidden &&
         a.gru.b_input == b.gru.b_input && a.gru.b_hidden == b.gru.b_hidden && a.out_w == b.out_w &&
         a.out_b == b.out_b;
}

std::vector<double> downstream_forward(const DownstreamParams& phi, const ad::Tensor& features) {
  if (features.rank() != 2 || features.cols() != phi.config.frame_dim) {
    throw ShapeError("downstream_forward", ad::to_string(features.shape()) + " vs D=" +
                                               std::to_string(phi.config.frame_dim));
  }
  ad::Tape tape;
  const auto b = bind(tape, phi, false);
  const auto out = forward(b, tape, features).value();
  return {out.begin(), out.end()};
}

double wave_l1(std::span<const double> a, std::span<const double> b, std::size_t samples_per_frame) {
  if (a.size() != b.size() || samples_per_frame == 0 || a.size() % samples_per_frame != 0 || a.empty()) {
    throw ContractError("wave_l1: waveforms of " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                        " samples are not comparable");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::fabs(a[i] - b[i]);
  return total / static_cast<double>(a.size() / samples_per_frame);
}

double train_downstream(const Corpus& corpus, DownstreamParams& phi, const DownstreamTrainConfig& config,
                        const metrics::MetricSink& sink) {
  check_corpus(corpus, phi.config.samples_per_frame);
  config.optimizer.validate();
  if (config.batch_size == 0) throw ContractError("batch_size must be >= 1");
  if (corpus.empty() || config.epochs == 0) return 0.0;
  auto params = phi.tensors();
  auto adam = regimes::AdamState::for_params(params);
  const std::size_t per_epoch = regimes::steps_per_epoch(corpus.size(), config.batch_size);
  const std::size_t k = phi.config.samples_per_frame;
  double epoch_loss = 0.0;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = regimes::epoch_permutation(config.seed, epoch, corpus.size());
    epoch_loss = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b, ++step) {
      ad::Tape tape;
      const auto bound = bind(tape, phi, true);
      std::vector<ad::Var> losses;
      for (std::size_t i = b * config.batch_size; i < std::min(corpus.size(), (b + 1) * config.batch_size); ++i) {
        const auto& item = corpus[order[i]];
        const std::size_t T = item.features.rows();
        const ad::Var pred = forward(bound, tape, item.features);
        const ad::Var target = tape.constant({T, k}, item.wave);
        losses.push_back(
            ad::scale(ad::sum(ad::abs(ad::sub(pred, target))), 1.0 / static_cast<double>(T)));
      }
      const ad::Var loss = ad::mean(ad::concat(losses));
      tape.backward(loss);
      for (std::size_t i = 0; i < params.size(); ++i) {
        params[i]->zero_grad();
        params[i]->accumulate_grad(tape.grad(bound.leaves[i]));
      }
      regimes::clip_gradients(params, config.optimizer.clip_norm);
      regimes::adam_update(params, adam, config.optimizer);
      for (auto* p : params) p->clear_grad();
      epoch_loss += loss.item();
      if (sink) sink({"downstream_loss", loss.item(), step, "train", {{"epoch", static_cast<double>(epoch)}}});
    }
    epoch_loss /= static_cast<double>(per_epoch);
  }
  return epoch_loss;
}

PipelineOutput run_pipeline(const tasks::TokenSeq& src, const model::ModelParams& upstream,
                            const DownstreamParams& phi, std::size_t max_steps,
                            const std::vector<double>* reference_wave) {
  const std::size_t k = phi.config.samples_per_frame;
  PipelineOutput out;
  if (reference_wave != nullptr) {
    if (reference_wave->empty() || reference_wave->size() % k != 0) {
      throw ContractError("run_pipeline: reference waveform length is not a multiple of k");
    }
    const std::size_t frames = reference_wave->size() / k;
    const std::size_t r = upstream.config.reduction_factor;
    out.upstream = decoding::greedy_decode_fixed(upstream, src, (frames + r - 1) / r, frames);
  } else {
    out.upstream = decoding::greedy_decode(upstream, src, max_steps);
  }
  out.truncated = out.upstream.truncated;
  if (out.upstream.length() > 0) out.wave = downstream_forward(phi, out.upstream.frames());
  if (reference_wave != nullptr) out.l1 = wave_l1(out.wave, *reference_wave, k);
  return out;
}

}  // namespace seqforce::cascade
