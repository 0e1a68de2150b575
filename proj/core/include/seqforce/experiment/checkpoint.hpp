// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "seqforce/autodiff/tensor.hpp"
#include "seqforce/experiment/run_config.hpp"
#include "seqforce/regimes/train_loop.hpp"

namespace seqforce::experiment {

inline constexpr char kCheckpointMagic[8] = {'S', 'Q', 'F', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;

  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

/// On-disk training snapshot.
///
/// Layout (all integers little-endian):
///   magic[8] | u32 version | u64 config_digest | u64 step | str model_id | str config
///   u64 adam_steps | u8 has_discriminator | u64 discriminator_adam_steps
///   u32 array_count | { str name | u32 rank | u64 dims[rank] | f64 values[prod(dims)] }*
/// where str is a u32 byte length followed by the bytes.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_digest = 0;
  std::uint64_t step = 0;
  std::string model_id;
  /// Canonical INI text of the run config.
  std::string config;
  std::uint64_t adam_steps = 0;
  bool has_discriminator = false;
  std::uint64_t discriminator_adam_steps = 0;
  /// "param/", "adam.m/", "adam.v/", "disc/", "disc_adam.m/" and "disc_adam.v/" prefixed arrays.
  std::vector<NamedArray> arrays;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
/// Throws DataError on bad magic, unsupported version or truncated input.
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Snapshot of a training state under `config`.
Checkpoint make_checkpoint(const regimes::TrainState& state, const RunConfig& config, std::string model_id);

struct Restored {
  RunConfig config;
  regimes::TrainState state;
};

/// Rebuilds the config and the training state. Throws DataError when an array is
/// missing, unknown or has the wrong shape.
Restored restore(const Checkpoint& ckpt);

/// Refuses to resume when the checkpoint was written under a different config.
void require_same_config(const Checkpoint& ckpt, const RunConfig& config);

}  // namespace seqforce::experiment
