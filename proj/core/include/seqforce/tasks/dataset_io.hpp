// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>

#include "seqforce/tasks/aligned_pair.hpp"

namespace seqforce::tasks {

/// Expected target type of each record.
enum class TargetFormat { Auto, Tokens, Frames };

struct DatasetFormat {
  TargetFormat target = TargetFormat::Auto;
  bool require_alignment = false;
  /// Source-only records load with an empty token target.
  bool allow_missing_target = false;
};

/// Reads newline-delimited JSON records {"src": [...], "tgt": [...], "align": [[...]]}.
/// Blank lines are skipped. All malformed records are collected into one DataError.
Dataset load_dataset(const std::filesystem::path& path, const DatasetFormat& format = {});
Dataset read_dataset(std::istream& in, const DatasetFormat& format = {});

void save_dataset(const std::filesystem::path& path, const Dataset& data);
void write_dataset(std::ostream& out, const Dataset& data);

}  // namespace seqforce::tasks
