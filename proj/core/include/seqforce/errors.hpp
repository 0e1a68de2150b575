// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace seqforce {

/// Violated precondition or structural contract (wrong sizes, empty batch, bad config).
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Tensor shapes incompatible for an op. Carries the op name and the offending shapes.
class ShapeError : public ContractError {
 public:
  ShapeError(std::string op, std::string shapes)
      : ContractError("shape mismatch in " + op + ": " + shapes),
        op_(std::move(op)),
        shapes_(std::move(shapes)) {}

  const std::string& op() const noexcept { return op_; }
  const std::string& shapes() const noexcept { return shapes_; }

 private:
  std::string op_;
  std::string shapes_;
};

/// A forward computation produced NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string op, const std::string& detail)
      : std::runtime_error("non-finite value in " + op + ": " + detail), op_(std::move(op)) {}

  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

/// Malformed input data. `lines` lists 1-based offending line numbers when read from a file.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::vector<std::size_t> lines = {})
      : std::runtime_error(what), lines_(std::move(lines)) {}

  const std::vector<std::size_t>& lines() const noexcept { return lines_; }

 private:
  std::vector<std::size_t> lines_;
};

}  // namespace seqforce
