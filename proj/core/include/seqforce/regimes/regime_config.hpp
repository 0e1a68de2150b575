// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "seqforce/model/unroll.hpp"
#include "seqforce/regimes/schedule.hpp"

namespace seqforce::regimes {

using model::HistorySource;
using model::Selection;

struct TeacherForcing {
  friend bool operator==(const TeacherForcing&, const TeacherForcing&) = default;
};

struct FreeRunning {
  Selection selection = Selection::Argmax;
  friend bool operator==(const FreeRunning&, const FreeRunning&) = default;
};

struct ScheduledSamplingToken {
  ScheduleSpec schedule;
  Selection selection = Selection::Argmax;
  friend bool operator==(const ScheduledSamplingToken&, const ScheduledSamplingToken&) = default;
};

struct ScheduledSamplingSeq {
  ScheduleSpec schedule;
  Selection selection = Selection::Argmax;
  friend bool operator==(const ScheduledSamplingSeq&, const ScheduledSamplingSeq&) = default;
};

/// Generated history with the teacher's alignment as context. The teacher is passed to the
/// step separately; `tied` makes the student its own teacher.
struct AttentionForcing {
  double gamma = 1.0;
  bool tied = false;
  Selection selection = Selection::Argmax;
  /// Replaces the generated history, e.g. Reference for a computation-path comparison.
  std::optional<HistorySource> history_override;
  friend bool operator==(const AttentionForcing&, const AttentionForcing&) = default;
};

/// Reference history with the teacher's alignment as context.
struct ModifiedAttentionForcing {
  double gamma = 1.0;
  bool tied = false;
  friend bool operator==(const ModifiedAttentionForcing&, const ModifiedAttentionForcing&) = default;
};

struct ProfessorForcing {
  double lambda_free = 1.0;
  double lambda_teacher = 1.0;
  bool use_teacher_term = false;
  Selection selection = Selection::Argmax;
  std::size_t discriminator_hidden = 16;
  friend bool operator==(const ProfessorForcing&, const ProfessorForcing&) = default;
};

using RegimeConfig = std::variant<TeacherForcing, FreeRunning, ScheduledSamplingToken, ScheduledSamplingSeq,
                                  AttentionForcing, ModifiedAttentionForcing, ProfessorForcing>;

/// Short names: tf, fr, ss-token, ss-seq, af, maf, pf.
std::string_view regime_name(const RegimeConfig& config);
/// Default-configured regime for a short name.
std::optional<RegimeConfig> regime_from_name(std::string_view name);
void validate(const RegimeConfig& config);

bool needs_teacher(const RegimeConfig& config);
bool needs_discriminator(const RegimeConfig& config);
/// The attention-forcing weight gamma, when the regime has one.
std::optional<double> regime_gamma(const RegimeConfig& config);
void set_regime_gamma(RegimeConfig& config, double gamma);

std::string_view selection_name(Selection s);
std::optional<Selection> selection_from_name(std::string_view name);

}  // namespace seqforce::regimes
