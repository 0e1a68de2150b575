// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/autodiff/tape.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "backward.hpp"
#include "seqforce/errors.hpp"

namespace seqforce::ad {

namespace {

constexpr std::array<std::string_view, 27> kOpNames = {
    "leaf",     "constant", "matmul",  "add",         "sub",     "mul",         "scale",
    "concat",   "stack",    "slice",   "row",         "reshape", "tanh",        "sigmoid",
    "relu",     "exp",      "log",     "abs",         "log_sigmoid", "sum",     "mean",
    "conv1d",   "embedding_lookup",    "softmax",     "log_softmax", "kl_divergence", "detach",
};

struct Fault {
  bool active = false;
  OpKind kind = OpKind::Leaf;
  double factor = 1.0;
};

// Test-only hook; tapes are thread-confined and the fault is installed before use.
Fault g_fault;

}  // namespace

std::string_view op_name(OpKind kind) { return kOpNames.at(static_cast<std::size_t>(kind)); }

std::optional<OpKind> op_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<OpKind>(i);
  }
  return std::nullopt;
}

const Shape& Var::shape() const { return tape_->node(*this).shape; }

std::span<const double> Var::value() const {
  const auto& n = tape_->node(*this);
  return {n.data(), n.size};
}

std::size_t Var::size() const { return tape_->node(*this).size; }

bool Var::requires_grad() const { return tape_->node(*this).requires_grad; }

double Var::item() const {
  const auto v = value();
  if (v.size() != 1) throw ContractError("item() on a variable of shape " + to_string(shape()));
  return v[0];
}

Tensor Var::to_tensor() const {
  const auto v = value();
  return Tensor(shape(), std::vector<double>(v.begin(), v.end()));
}

const detail::Node& Tape::node(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) throw ContractError("variable does not belong to this tape");
  return nodes_[v.id()];
}

Var Tape::leaf(const Tensor& t, bool requires_grad) {
  if (t.empty()) throw ContractError("cannot record an empty tensor");
  detail::Node n;
  n.kind = OpKind::Leaf;
  n.requires_grad = requires_grad;
  n.shape = t.shape();
  n.external = t.values().data();
  n.size = t.size();
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Tensor t) {
  auto shape = t.shape();
  auto values = std::vector<double>(t.values().begin(), t.values().end());
  return constant(std::move(shape), std::move(values));
}

Var Tape::constant(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size() || values.empty()) {
    throw ContractError("constant of shape " + to_string(shape) + " given " + std::to_string(values.size()) +
                        " values");
  }
  detail::Node n;
  n.kind = OpKind::Constant;
  n.shape = std::move(shape);
  n.size = values.size();
  n.owned = std::move(values);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::scalar(double v) { return constant({1}, {v}); }

Var Tape::record(OpKind kind, Shape shape, std::vector<double> value, std::span<const Var> inputs,
                 std::array<std::size_t, 3> iarg, std::vector<std::size_t> indices, double farg) {
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!std::isfinite(value[i])) {
      throw NumericError(std::string(op_name(kind)),
                         "entry " + std::to_string(i) + " of output " + to_string(shape) + " is " +
                             std::to_string(value[i]));
    }
  }
  detail::Node n;
  n.kind = kind;
  n.shape = std::move(shape);
  n.size = value.size();
  n.owned = std::move(value);
  n.iarg = iarg;
  n.indices = std::move(indices);
  n.farg = farg;
  n.inputs.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (in.tape() != this) throw ContractError(std::string(op_name(kind)) + ": inputs live on different tapes");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (kind == OpKind::Detach) n.requires_grad = false;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::backward(Var loss) {
  const auto& root = node(loss);
  if (root.size != 1) {
    throw ContractError("backward() needs a single-element loss, got shape " + to_string(root.shape));
  }
  grads_.resize(nodes_.size());
  if (!root.requires_grad) return;
  // Gradients of interior nodes are recomputed per sweep; leaf gradients accumulate.
  std::vector<std::vector<double>> sweep(nodes_.size());
  sweep[loss.id()].assign(1, 1.0);
  for (std::int64_t i = loss.id(); i >= 0; --i) {
    const auto id = static_cast<std::uint32_t>(i);
    auto& g = sweep[id];
    const auto& n = nodes_[id];
    if (g.empty() || !n.requires_grad) continue;
    if (n.kind == OpKind::Leaf) {
      auto& acc = grads_[id];
      if (acc.empty()) acc.assign(n.size, 0.0);
      for (std::size_t k = 0; k < n.size; ++k) acc[k] += g[k];
      continue;
    }
    if (g_fault.active && g_fault.kind == n.kind) {
      for (auto& x : g) x *= g_fault.factor;
    }
    detail::propagate(nodes_, id, g, sweep);
    std::vector<double>().swap(g);
  }
}

std::vector<double> Tape::grad(Var v) const {
  const auto& n = node(v);
  if (v.id() < grads_.size() && !grads_[v.id()].empty()) return grads_[v.id()];
  return std::vector<double>(n.size, 0.0);
}

bool Tape::has_grad(Var v) const {
  node(v);
  return v.id() < grads_.size() && !grads_[v.id()].empty();
}

void Tape::clear_grads() { grads_.clear(); }

namespace testing {

ScopedBackwardFault::ScopedBackwardFault(OpKind kind, double factor) {
  g_fault.active = true;
  g_fault.kind = kind;
  g_fault.factor = factor;
}

ScopedBackwardFault::~ScopedBackwardFault() { g_fault = Fault{}; }

}  // namespace testing

}  // namespace seqforce::ad
