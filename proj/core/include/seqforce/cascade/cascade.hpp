// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seqforce/autodiff/tensor.hpp"
#include "seqforce/decoding/decoding.hpp"
#include "seqforce/metrics/metric_record.hpp"
#include "seqforce/model/params.hpp"
#include "seqforce/regimes/optimizer.hpp"
#include "seqforce/tasks/aligned_pair.hpp"

namespace seqforce::cascade {

/// How the upstream model produces features for downstream training.
enum class UpstreamMode { TeacherForced, AttentionForced, FreeRunning };

std::string_view mode_name(UpstreamMode mode);
std::optional<UpstreamMode> mode_from_name(std::string_view name);

/// Toy waveform: the k samples of frame t are w_{t,j} = (M y_t)_j + j / k with a fixed
/// random k x D matrix M.
struct WaveformSpec {
  std::size_t samples_per_frame = 4;
  std::size_t frame_dim = 8;
  std::uint64_t seed = 0;

  ad::Tensor matrix() const;
};

/// Flat waveform of length k * T for a (T, D) frame matrix.
std::vector<double> synthesize(const WaveformSpec& spec, const ad::Tensor& frames);

struct CorpusItem {
  tasks::TokenSeq src;
  ad::Tensor features;  // (T, D), generated by the upstream
  std::vector<double> wave;  // k * T samples from the reference frames
  std::optional<ad::Tensor> align;

  friend bool operator==(const CorpusItem&, const CorpusItem&) = default;
};

using Corpus = std::vector<CorpusItem>;

/// Runs the upstream in a guided mode over a continuous dataset. Attention-forced mode takes
/// its reference alignment from teacher_forced_generate of `alignment_model` (the upstream
/// itself when null). Free-running mode is rejected with a ContractError.
Corpus generate_feature_corpus(const tasks::Dataset& dataset, const model::ModelParams& upstream, UpstreamMode mode,
                               const WaveformSpec& wave, const model::ModelParams* alignment_model = nullptr);

/// Throws ContractError unless every item has features.rows() * k == wave.size().
void check_corpus(const Corpus& corpus, std::size_t samples_per_frame);

/// Record format of the dataset files plus a flat "wave" array.
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& path);

struct DownstreamConfig {
  std::size_t frame_dim = 8;
  std::size_t samples_per_frame = 4;
  std::size_t hidden = 16;
};

/// Non-attentive upsampler: g_t = GRU(g_{t-1}, y_t), w_t = A [g_t; y_t] + b.
struct DownstreamParams {
  DownstreamConfig config;
  model::GruWeights<ad::Tensor> gru;
  ad::Tensor out_w;  // (hidden + D, k)
  ad::Tensor out_b;  // (k)

  static DownstreamParams init(const DownstreamConfig& config, std::uint64_t seed);
  std::vector<std::pair<std::string, ad::Tensor*>> named();
  std::vector<std::pair<std::string, const ad::Tensor*>> named() const;
  std::vector<ad::Tensor*> tensors();

  friend bool operator==(const DownstreamParams& a, const DownstreamParams& b);
};

/// Predicted waveform (k * T samples) for a (T, D) feature matrix.
std::vector<double> downstream_forward(const DownstreamParams& phi, const ad::Tensor& features);

/// Mean over frames of the L1 distance between k-sample windows.
double wave_l1(std::span<const double> a, std::span<const double> b, std::size_t samples_per_frame);

struct DownstreamTrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  regimes::OptimizerConfig optimizer;
  std::uint64_t seed = 0;
};

/// Teacher-forced L1 training of phi on a feature corpus. Returns the mean loss of the last epoch.
double train_downstream(const Corpus& corpus, DownstreamParams& phi, const DownstreamTrainConfig& config,
                        const metrics::MetricSink& sink = {});

struct PipelineOutput {
  std::vector<double> wave;
  decoding::Generation upstream;
  std::optional<double> l1;
  bool truncated = false;
};

/// Free-running upstream inference followed by the downstream mapping. With a reference,
/// generation is forced to the reference frame count and the pipeline L1 is reported.
PipelineOutput run_pipeline(const tasks::TokenSeq& src, const model::ModelParams& upstream,
                            const DownstreamParams& phi, std::size_t max_steps,
                            const std::vector<double>* reference_wave = nullptr);

}  // namespace seqforce::cascade
