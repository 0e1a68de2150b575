// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/regimes/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "seqforce/errors.hpp"

namespace seqforce::regimes {

void ScheduleSpec::validate() const {
  if (total_steps == 0) throw ContractError("schedule total_steps must be >= 1");
  if (!(floor >= 0.0 && floor <= 1.0)) throw ContractError("schedule floor must lie in [0, 1]");
  if (kind == ScheduleKind::InverseSigmoid && !(k >= 1.0)) throw ContractError("inverse sigmoid k must be >= 1");
}

double ScheduleSpec::epsilon(std::size_t step) const {
  const double i = static_cast<double>(step);
  const double n = static_cast<double>(total_steps);
  double e = 1.0;
  switch (kind) {
    case ScheduleKind::Linear:
      e = 1.0 - i / n;
      break;
    case ScheduleKind::Exponential:
      e = std::pow(0.01, i / n);
      break;
    case ScheduleKind::InverseSigmoid:
      e = (k + 1.0) / (k + std::exp(std::min(i / k, 700.0)));
      break;
  }
  return std::clamp(e, floor, 1.0);
}

std::string_view schedule_name(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Linear:
      return "linear";
    case ScheduleKind::Exponential:
      return "exponential";
    case ScheduleKind::InverseSigmoid:
      return "inverse_sigmoid";
  }
  return "linear";
}

std::optional<ScheduleKind> schedule_from_name(std::string_view name) {
  if (name == "linear") return ScheduleKind::Linear;
  if (name == "exponential") return ScheduleKind::Exponential;
  if (name == "inverse_sigmoid") return ScheduleKind::InverseSigmoid;
  return std::nullopt;
}

}  // namespace seqforce::regimes
