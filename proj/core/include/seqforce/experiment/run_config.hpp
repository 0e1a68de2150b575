// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqforce/model/params.hpp"
#include "seqforce/regimes/regime_config.hpp"
#include "seqforce/regimes/train_loop.hpp"
#include "seqforce/tasks/generators.hpp"

namespace seqforce::experiment {

/// Settings of the free-running evaluation pass.
struct EvalConfig {
  /// Decode-step cap of unforced generation.
  std::size_t max_steps = 200;
  std::size_t beam_width = 10;

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

/// One experiment. The model's vocabulary, frame size, output kind and source cap follow
/// the task, so they are not separate settings.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t train_size = 2000;
  std::size_t eval_size = 200;
  tasks::TaskSpec task;
  model::ModelConfig model;
  regimes::RegimeConfig regime = regimes::TeacherForcing{};
  regimes::TrainConfig train;
  /// Epochs of the teacher-forcing phase that precedes attention forcing.
  std::size_t teacher_epochs = 10;
  EvalConfig eval;

  /// Model config with the task-derived fields filled in.
  model::ModelConfig model_config() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Field-level problems of a configuration, one "section.key: message" per entry.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Frame-level synthesis preset: expansion task, continuous head, learning rate 0.001.
RunConfig tts_preset();
/// Token-level translation preset: ambiguous reorder task, learning rate 0.002.
RunConfig nmt_preset();

/// Reads INI text over `base`. Unknown sections or keys and malformed values are errors.
RunConfig parse_run_config(std::istream& in, const RunConfig& base = {});
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base = {});
/// Writes every setting; parse_run_config(write_run_config(c)) == c.
void write_run_config(std::ostream& out, const RunConfig& config);
std::string dump_run_config(const RunConfig& config);

/// Throws ConfigError listing every invalid field.
void validate(const RunConfig& config);

/// FNV-1a hash of the canonical dump.
std::uint64_t config_digest(const RunConfig& config);

}  // namespace seqforce::experiment
