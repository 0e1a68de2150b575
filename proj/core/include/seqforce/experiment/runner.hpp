// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqforce/decoding/decoding.hpp"
#include "seqforce/experiment/checkpoint.hpp"
#include "seqforce/experiment/run_config.hpp"
#include "seqforce/metrics/metric_record.hpp"
#include "seqforce/model/params.hpp"
#include "seqforce/regimes/train_loop.hpp"
#include "seqforce/tasks/aligned_pair.hpp"

namespace seqforce::experiment {

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "SEQFORCE_OUTPUT_ROOT";

/// `$SEQFORCE_OUTPUT_ROOT/<name>`, or `runs/<name>` when the variable is unset.
std::filesystem::path default_out_dir(const std::string& name);

struct Datasets {
  tasks::Dataset train;
  tasks::Dataset eval;
};

/// Training and held-out sets drawn from disjoint streams of the task seed.
Datasets make_datasets(const RunConfig& config);

/// Free-running evaluation. Every model is decoded twice: unforced (length statistics,
/// BLEU) and for exactly the reference number of steps (frame L1 and alignment
/// diagnostics, which need equal lengths).
///
/// Keys: bleu (categorical); l1 (continuous); length_ratio, truncated_rate,
/// monotonicity, entropy, coverage; alignment_kl (when gold alignments exist).
std::map<std::string, double> evaluate_model(const model::ModelParams& params, const tasks::Dataset& data,
                                             const EvalConfig& config);

/// Metric records of an evaluation, one per key.
std::vector<metrics::MetricRecord> eval_records(const std::map<std::string, double>& values, std::size_t step,
                                                const std::string& split = "eval");

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> teacher_checkpoint;
  /// Train the teacher first when the regime needs one and none is given.
  bool train_teacher = false;
  /// Continue from `out_dir/checkpoint.bin`.
  bool resume = false;
  /// Stop once the global step reaches this value (simulated interruption).
  std::optional<std::size_t> stop_at_step;
  /// Reuse an already trained teacher.
  const model::ModelParams* teacher = nullptr;
};

struct TrainOutcome {
  regimes::TrainState state;
  std::optional<model::ModelParams> teacher;
  /// Empty when the run stopped before its last epoch.
  std::map<std::string, double> eval;
  bool completed = false;
};

/// Trains one run and writes config.ini, metrics.jsonl and checkpoint.bin to out_dir.
/// Attention-forcing runs with an untied teacher first load (teacher_checkpoint) or train
/// (train_teacher) the teacher by teacher forcing; teacher.bin is kept for resumes.
TrainOutcome run_training(const RunConfig& config, const TrainOptions& options);

enum class GenerateMode { Free, TeacherForced, AttentionForced, Beam };

std::string_view generate_mode_name(GenerateMode mode);
std::optional<GenerateMode> generate_mode_from_name(std::string_view name);

struct GenerateOptions {
  GenerateMode mode = GenerateMode::Free;
  std::size_t beam_width = 10;
  std::size_t max_steps = 200;
  /// Source of reference alignments for attention_forced; the input's `align` field otherwise.
  const model::ModelParams* alignment_model = nullptr;
};

/// Alignment of every emitted token or frame (EOS step dropped, blocks repeated r times).
ad::Tensor output_alignment(const decoding::Generation& g, std::size_t reduction_factor);

/// Decodes every input and returns records in the dataset format with the emitted
/// output as `tgt`, its alignment as `align`, plus `steps` and `truncated` fields.
std::vector<std::string> generate_records(const model::ModelParams& params, const tasks::Dataset& inputs,
                                          const GenerateOptions& options);

/// Per-step alignment rows of a decode from a gold (T x L) alignment.
ad::Tensor step_alignment(const model::ModelConfig& config, const ad::Tensor& gold);

struct CompareOptions {
  std::vector<std::string> regimes;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir;
  /// Overrides the alignment-loss weight of regimes that have one.
  std::optional<double> gamma;
};

struct CompareRow {
  std::string regime;
  /// "cell", "mean" or "median".
  std::string kind = "cell";
  std::optional<std::uint64_t> seed;
  std::map<std::string, double> values;
};

/// Trains and evaluates every (regime, seed) cell. Summary rows (mean and median per
/// regime) are added only when there are at least two seeds.
std::vector<CompareRow> compare_regimes(const RunConfig& base, const CompareOptions& options);

std::string compare_csv(const std::vector<CompareRow>& rows);

}  // namespace seqforce::experiment
