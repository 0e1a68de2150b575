// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "seqforce/autodiff/tape.hpp"

// Differentiable primitives. Every op validates shapes (ShapeError), records one node
// on the tape of its inputs and rejects non-finite results (NumericError).
//
// Rank conventions: vectors are rank 1, matrices rank 2 (row-major), scalars are [1].
namespace seqforce::ad {

/// (m,k)x(k,n) -> (m,n); (m,k)x(k) -> (m); (k)x(k,n) -> (n); (k)x(k) -> [1].
Var matmul(Var a, Var b);
/// Elementwise sum. `b` may also be a vector broadcast across the rows of matrix `a`.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

/// Concatenates vectors, or matrices along `axis` (0 = rows, 1 = columns).
Var concat(std::span<const Var> parts, std::size_t axis = 0);
Var concat(std::initializer_list<Var> parts, std::size_t axis = 0);
/// Stacks equal-length vectors into a matrix, one per row.
Var stack(std::span<const Var> rows);
/// Half-open range [begin, end) along the first axis.
Var slice(Var a, std::size_t begin, std::size_t end);
/// Row `r` of a matrix, as a vector.
Var row(Var a, std::size_t r);
Var reshape(Var a, Shape shape);

Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var abs(Var a);
/// log(sigmoid(a)) without underflow.
Var log_sigmoid(Var a);

Var sum(Var a);
Var mean(Var a);

/// Same-length 1-D convolution along the time axis.
/// `x` is (L) or (L, Cin); `kernel` is (Cout, Cin, K). Result is (L, Cout), zero padded.
Var conv1d(Var x, Var kernel);

/// Row `index` of a (V, E) table as a vector.
Var embedding_lookup(Var table, std::size_t index);
/// Rows of a (V, E) table, result (n, E).
Var embedding_lookup(Var table, std::span<const std::size_t> indices);

/// Max-subtracted softmax along `axis` (the last axis by default).
Var softmax(Var logits, std::size_t axis);
Var softmax(Var logits);
Var log_softmax(Var logits);

/// Sum over all entries of ref * (log ref - log gen), both clamped at `floor`.
/// Rows of matrices are treated as independent distributions; the result is [1].
Var kl_divergence(Var ref, Var gen, double floor = 1e-12);

/// Copy of `a` through which no gradient flows.
Var detach(Var a);

}  // namespace seqforce::ad
