// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace seqforce::experiment {

struct GradCheckEntry {
  /// Primitive name ("tanh", "matmul/matrix-vector") or "<head>/<regime>/<objective>".
  std::string name;
  double max_relative_error = 0.0;
  std::size_t components = 0;
  bool passed = false;
};

struct GradCheckReport {
  double tolerance = 1e-4;
  std::vector<GradCheckEntry> entries;
  double seconds = 0.0;

  bool passed() const;
  std::vector<GradCheckEntry> failures() const;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  /// Finite-difference step of the primitive checks.
  double primitive_step = 1e-5;
  /// Step of the regime checks, whose gradients span many orders of magnitude.
  double regime_step = 1e-3;
  bool primitives = true;
  bool regimes = true;
};

/// Finite-difference checks of every differentiable primitive and of every regime
/// objective on 2-example toy batches, for both output heads.
GradCheckReport run_gradcheck_suite(const GradCheckOptions& options = {});

/// One line per entry, then a PASS/FAIL summary naming the failing checks.
void print_report(std::ostream& out, const GradCheckReport& report);

}  // namespace seqforce::experiment
