// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include "seqforce/autodiff/tensor.hpp"
#include "seqforce/tasks/aligned_pair.hpp"
#include "seqforce/tasks/dataset_io.hpp"

namespace seqforce::tasks::detail {

nlohmann::json matrix_to_json(const ad::Tensor& m);
/// Parses a non-empty array of equal-length numeric rows. Throws DataError naming `field`.
ad::Tensor matrix_from_json(const nlohmann::json& j, const char* field);

nlohmann::json pair_to_json(const AlignedPair& pair);
/// Parses and validates one record. Throws DataError without line information.
AlignedPair pair_from_json(const nlohmann::json& j, const DatasetFormat& format);

}  // namespace seqforce::tasks::detail
