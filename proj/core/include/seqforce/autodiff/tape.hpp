// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "seqforce/autodiff/tensor.hpp"

namespace seqforce::ad {

enum class OpKind : std::uint8_t {
  Leaf,
  Constant,
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  Concat,
  Stack,
  Slice,
  Row,
  Reshape,
  Tanh,
  Sigmoid,
  Relu,
  Exp,
  Log,
  Abs,
  LogSigmoid,
  Sum,
  Mean,
  Conv1d,
  Embedding,
  Softmax,
  LogSoftmax,
  KlDivergence,
  Detach,
};

std::string_view op_name(OpKind kind);
std::optional<OpKind> op_from_name(std::string_view name);

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Shape& shape() const;
  std::span<const double> value() const;
  std::size_t size() const;
  bool requires_grad() const;
  /// Value of a single-element variable.
  double item() const;
  /// Copies the current value into a standalone Tensor.
  Tensor to_tensor() const;

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

namespace detail {

struct Node {
  OpKind kind = OpKind::Constant;
  bool requires_grad = false;
  Shape shape;
  std::vector<double> owned;
  const double* external = nullptr;  // leaf storage owned by a Tensor
  std::size_t size = 0;
  std::vector<std::uint32_t> inputs;
  std::array<std::size_t, 3> iarg{};
  std::vector<std::size_t> indices;
  double farg = 0.0;

  const double* data() const noexcept { return external ? external : owned.data(); }
};

}  // namespace detail

/// Append-only record of a define-by-run computation.
///
/// A tape is confined to one thread. Leaves created with `leaf()` reference the storage
/// of the given Tensor, which must outlive the tape and stay unmodified while it is used.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var leaf(const Tensor& t, bool requires_grad);
  Var constant(Tensor t);
  Var constant(Shape shape, std::vector<double> values);
  Var scalar(double v);

  /// Reverse sweep from a single-element loss. Gradients accumulate across calls.
  void backward(Var loss);
  /// Gradient of `v` after backward(); zeros when no gradient reached it.
  std::vector<double> grad(Var v) const;
  bool has_grad(Var v) const;
  void clear_grads();

  std::size_t size() const noexcept { return nodes_.size(); }
  const detail::Node& node(Var v) const;

  /// Records a computed node. `inputs` must already be on this tape.
  Var record(OpKind kind, Shape shape, std::vector<double> value, std::span<const Var> inputs,
             std::array<std::size_t, 3> iarg = {}, std::vector<std::size_t> indices = {},
             double farg = 0.0);

 private:
  std::vector<detail::Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

namespace testing {

/// Scales the backward contribution of every node of `kind` by `factor` while alive.
/// Used as a negative control for the gradient checker.
class ScopedBackwardFault {
 public:
  ScopedBackwardFault(OpKind kind, double factor);
  ~ScopedBackwardFault();
  ScopedBackwardFault(const ScopedBackwardFault&) = delete;
  ScopedBackwardFault& operator=(const ScopedBackwardFault&) = delete;
};

}  // namespace testing

}  // namespace seqforce::ad
