// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/tasks/aligned_pair.hpp"

#include <cmath>

namespace seqforce::tasks {

std::size_t AlignedPair::target_length() const {
  return discrete() ? tokens().size() : frames().rows();
}

bool operator==(const AlignedPair& a, const AlignedPair& b) {
  return a.src == b.src && a.tgt == b.tgt && a.align == b.align;
}

bool is_row_stochastic(const ad::Tensor& alpha, double tol) {
  if (alpha.rank() != 2) return false;
  for (std::size_t r = 0; r < alpha.rows(); ++r) {
    double total = 0.0;
    for (double v : alpha.row(r)) {
      if (!std::isfinite(v) || v < -tol) return false;
      total += v;
    }
    if (std::abs(total - 1.0) > tol) return false;
  }
  return true;
}

}  // namespace seqforce::tasks
