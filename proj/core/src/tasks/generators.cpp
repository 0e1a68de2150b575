// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/tasks/generators.hpp"

#include <string>

#include "seqforce/errors.hpp"

namespace seqforce::tasks {

namespace {

constexpr std::uint64_t kCopyStream = 0xc0b1;
constexpr std::uint64_t kExpansionStream = 0xe8a4;
constexpr std::uint64_t kReorderStream = 0x4e04;
constexpr std::uint64_t kDurationStream = 0xd0a7;
constexpr std::uint64_t kPrototypeStream = 0x9407;

TokenSeq random_source(const TaskSpec& spec, Rng& rng) {
  const auto len = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(spec.min_length),
                                                        static_cast<std::int64_t>(spec.max_length)));
  TokenSeq src(len);
  for (auto& tok : src) tok = static_cast<Token>(uniform_int(rng, 0, static_cast<std::int64_t>(spec.vocab) - 1));
  return src;
}

ad::Tensor permutation_alignment(const std::vector<std::size_t>& perm) {
  ad::Tensor a({perm.size(), perm.size()});
  for (std::size_t t = 0; t < perm.size(); ++t) a(t, perm[t]) = 1.0;
  return a;
}

void require_kind(const TaskSpec& spec, TaskKind kind, const char* op) {
  spec.validate();
  if (spec.kind != kind) throw ContractError(std::string(op) + ": task spec has a different kind");
}

}  // namespace

void TaskSpec::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ContractError("invalid task spec: " + what);
  };
  require(vocab >= 1, "vocab must be >= 1");
  require(min_length >= 1 && min_length <= max_length, "length range must be nonempty and start at >= 1");
  if (kind == TaskKind::Expansion) {
    require(frame_dim >= 1, "frame_dim must be >= 1");
    require(noise_std >= 0.0, "noise_std must be >= 0");
    if (durations.empty()) {
      require(min_duration >= 1 && min_duration <= max_duration, "duration range must be nonempty and >= 1");
    } else {
      require(durations.size() == vocab, "durations must list one entry per symbol");
      for (auto d : durations) require(d >= 1, "durations must be >= 1");
    }
  }
}

std::vector<std::size_t> expansion_durations(const TaskSpec& spec) {
  if (!spec.durations.empty()) return spec.durations;
  Rng rng = make_rng(spec.seed, {kDurationStream});
  std::vector<std::size_t> d(spec.vocab);
  for (auto& v : d) {
    v = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(spec.min_duration),
                                             static_cast<std::int64_t>(spec.max_duration)));
  }
  return d;
}

ad::Tensor expansion_prototypes(const TaskSpec& spec) {
  Rng rng = make_rng(spec.seed, {kPrototypeStream});
  ad::Tensor p({spec.vocab, spec.frame_dim});
  for (auto& v : p.values()) v = normal(rng);
  return p;
}

std::vector<std::size_t> reorder_permutation(ReorderRule rule, std::size_t length) {
  std::vector<std::size_t> perm(length);
  for (std::size_t i = 0; i < length; ++i) perm[i] = i;
  if (rule == ReorderRule::BlockSwap) {
    for (std::size_t i = 0; i + 1 < length; i += 2) std::swap(perm[i], perm[i + 1]);
  }
  return perm;
}

AlignedPair expand(const TaskSpec& spec, const TokenSeq& src, const std::vector<std::size_t>& durations,
                   const ad::Tensor& prototypes, Rng& rng) {
  std::size_t T = 0;
  for (auto tok : src) T += durations.at(tok);
  const std::size_t D = prototypes.cols();
  ad::Tensor frames({T, D});
  ad::Tensor align({T, src.size()});
  std::size_t t = 0;
  for (std::size_t l = 0; l < src.size(); ++l) {
    for (std::size_t k = 0; k < durations[src[l]]; ++k, ++t) {
      const auto proto = prototypes.row(src[l]);
      for (std::size_t j = 0; j < D; ++j) {
        frames(t, j) = proto[j] + (spec.noise_std > 0.0 ? spec.noise_std * normal(rng) : 0.0);
      }
      align(t, l) = 1.0;
    }
  }
  return AlignedPair{src, std::move(frames), std::move(align)};
}

Dataset gen_copy(const TaskSpec& spec, std::size_t n, std::uint64_t stream) {
  require_kind(spec, TaskKind::Copy, "gen_copy");
  Rng rng = make_rng(spec.seed, {kCopyStream, stream});
  Dataset out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = random_source(spec, rng);
    auto align = permutation_alignment(reorder_permutation(ReorderRule::Identity, src.size()));
    out.push_back(AlignedPair{src, src, std::move(align)});
  }
  return out;
}

Dataset gen_expansion(const TaskSpec& spec, std::size_t n, std::uint64_t stream) {
  require_kind(spec, TaskKind::Expansion, "gen_expansion");
  const auto durations = expansion_durations(spec);
  const auto prototypes = expansion_prototypes(spec);
  Rng rng = make_rng(spec.seed, {kExpansionStream, stream});
  Dataset out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(expand(spec, random_source(spec, rng), durations, prototypes, rng));
  return out;
}

Dataset gen_reorder(const TaskSpec& spec, std::size_t n, std::uint64_t stream) {
  require_kind(spec, TaskKind::Reorder, "gen_reorder");
  Rng rng = make_rng(spec.seed, {kReorderStream, stream});
  Dataset out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = random_source(spec, rng);
    ReorderRule rule = spec.rule;
    if (spec.ambiguous && uniform01(rng) < 0.5) rule = ReorderRule::Identity;
    const auto perm = reorder_permutation(rule, src.size());
    TokenSeq tgt(src.size());
    for (std::size_t t = 0; t < perm.size(); ++t) tgt[t] = src[perm[t]];
    out.push_back(AlignedPair{std::move(src), std::move(tgt), permutation_alignment(perm)});
  }
  return out;
}

Dataset generate(const TaskSpec& spec, std::size_t n, std::uint64_t stream) {
  switch (spec.kind) {
    case TaskKind::Copy:
      return gen_copy(spec, n, stream);
    case TaskKind::Expansion:
      return gen_expansion(spec, n, stream);
    case TaskKind::Reorder:
      return gen_reorder(spec, n, stream);
  }
  throw ContractError("generate: unknown task kind");
}

}  // namespace seqforce::tasks
