// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/regimes/regime_config.hpp"

#include <cmath>
#include <string>

#include "seqforce/errors.hpp"

namespace seqforce::regimes {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_weight(double w, const char* name) {
  if (!(std::isfinite(w) && w >= 0.0)) throw ContractError(std::string(name) + " must be finite and >= 0");
}

}  // namespace

std::string_view regime_name(const RegimeConfig& config) {
  return std::visit(Overloaded{
                        [](const TeacherForcing&) { return std::string_view("tf"); },
                        [](const FreeRunning&) { return std::string_view("fr"); },
                        [](const ScheduledSamplingToken&) { return std::string_view("ss-token"); },
                        [](const ScheduledSamplingSeq&) { return std::string_view("ss-seq"); },
                        [](const AttentionForcing&) { return std::string_view("af"); },
                        [](const ModifiedAttentionForcing&) { return std::string_view("maf"); },
                        [](const ProfessorForcing&) { return std::string_view("pf"); },
                    },
                    config);
}

std::optional<RegimeConfig> regime_from_name(std::string_view name) {
  if (name == "tf") return TeacherForcing{};
  if (name == "fr") return FreeRunning{};
  if (name == "ss-token") return ScheduledSamplingToken{};
  if (name == "ss-seq") return ScheduledSamplingSeq{};
  if (name == "af") return AttentionForcing{};
  if (name == "maf") return ModifiedAttentionForcing{};
  if (name == "pf") return ProfessorForcing{};
  return std::nullopt;
}

void validate(const RegimeConfig& config) {
  std::visit(Overloaded{
                 [](const TeacherForcing&) {},
                 [](const FreeRunning&) {},
                 [](const ScheduledSamplingToken& c) { c.schedule.validate(); },
                 [](const ScheduledSamplingSeq& c) { c.schedule.validate(); },
                 [](const AttentionForcing& c) { require_weight(c.gamma, "gamma"); },
                 [](const ModifiedAttentionForcing& c) { require_weight(c.gamma, "gamma"); },
                 [](const ProfessorForcing& c) {
                   require_weight(c.lambda_free, "lambda_free");
                   require_weight(c.lambda_teacher, "lambda_teacher");
                   if (c.discriminator_hidden == 0) throw ContractError("discriminator_hidden must be >= 1");
                 },
             },
             config);
}

bool needs_teacher(const RegimeConfig& config) {
  if (const auto* af = std::get_if<AttentionForcing>(&config)) return !af->tied;
  if (const auto* maf = std::get_if<ModifiedAttentionForcing>(&config)) return !maf->tied;
  return false;
}

bool needs_discriminator(const RegimeConfig& config) { return std::holds_alternative<ProfessorForcing>(config); }

std::optional<double> regime_gamma(const RegimeConfig& config) {
  if (const auto* af = std::get_if<AttentionForcing>(&config)) return af->gamma;
  if (const auto* maf = std::get_if<ModifiedAttentionForcing>(&config)) return maf->gamma;
  return std::nullopt;
}

void set_regime_gamma(RegimeConfig& config, double gamma) {
  if (auto* af = std::get_if<AttentionForcing>(&config)) {
    af->gamma = gamma;
  } else if (auto* maf = std::get_if<ModifiedAttentionForcing>(&config)) {
    maf->gamma = gamma;
  } else {
    throw ContractError("gamma applies only to attention forcing regimes");
  }
}

std::string_view selection_name(Selection s) { return s == Selection::Argmax ? "argmax" : "sample"; }

std::optional<Selection> selection_from_name(std::string_view name) {
  if (name == "argmax") return Selection::Argmax;
  if (name == "sample") return Selection::Sample;
  return std::nullopt;
}

}  // namespace seqforce::regimes
