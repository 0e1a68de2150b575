// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "seqforce/autodiff/tape.hpp"

namespace seqforce::ad::detail {

/// Adds the vector-Jacobian product of node `id` (given its output gradient) into the
/// gradient buffers of its inputs. Buffers for inputs that require grad are allocated.
void propagate(const std::vector<Node>& nodes, std::uint32_t id, std::span<const double> gout,
               std::vector<std::vector<double>>& grads);

}  // namespace seqforce::ad::detail
