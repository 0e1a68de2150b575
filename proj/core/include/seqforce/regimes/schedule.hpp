// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace seqforce::regimes {

enum class ScheduleKind { Linear, Exponential, InverseSigmoid };

/// Decay of the reference-history probability epsilon over training steps.
///
///   linear:          max(floor, 1 - i / N)
///   exponential:     max(floor, c^i) with c = 0.01^(1/N), so epsilon(N) = 0.01
///   inverse_sigmoid: max(floor, (k + 1) / (k + exp(i / k)))
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::Linear;
  std::size_t total_steps = 1000;
  double floor = 0.0;
  double k = 100.0;

  void validate() const;
  double epsilon(std::size_t step) const;

  friend bool operator==(const ScheduleSpec&, const ScheduleSpec&) = default;
};

std::string_view schedule_name(ScheduleKind kind);
std::optional<ScheduleKind> schedule_from_name(std::string_view name);

}  // namespace seqforce::regimes
