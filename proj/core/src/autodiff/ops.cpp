// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "backward.hpp"
#include "seqforce/errors.hpp"

namespace seqforce::ad {

namespace {

using detail::Node;

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("operation on an unbound variable");
  return *a.tape();
}

[[noreturn]] void shape_fail(OpKind kind, std::initializer_list<Shape> shapes) {
  std::string s;
  for (const auto& sh : shapes) {
    if (!s.empty()) s += ", ";
    s += to_string(sh);
  }
  throw ShapeError(std::string(op_name(kind)), s);
}

// (m, k, n) of a matmul with rank-1 operands promoted to (1,k) / (k,1).
struct MatMulDims {
  std::size_t m, k, n;
};

MatMulDims matmul_dims(const Shape& a, const Shape& b) {
  const bool a_vec = a.size() == 1;
  const bool b_vec = b.size() == 1;
  if (a.size() > 2 || b.size() > 2) shape_fail(OpKind::MatMul, {a, b});
  const std::size_t m = a_vec ? 1 : a[0];
  const std::size_t ka = a_vec ? a[0] : a[1];
  const std::size_t kb = b[0];
  const std::size_t n = b_vec ? 1 : b[1];
  if (ka != kb) shape_fail(OpKind::MatMul, {a, b});
  return {m, ka, n};
}

template <typename F>
Var unary(Var a, OpKind kind, F f) {
  const auto x = a.value();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const Var in[] = {a};
  return tape_of(a).record(kind, a.shape(), std::move(y), in);
}

// Softmax-family axis geometry over a rank-1 or rank-2 shape.
struct AxisLayout {
  std::size_t outer, length, stride;
  std::size_t base(std::size_t o, const Shape& s, std::size_t axis) const {
    if (s.size() == 1) return 0;
    return axis == 1 ? o * s[1] : o;
  }
};

AxisLayout axis_layout(OpKind kind, const Shape& s, std::size_t axis) {
  if (s.size() == 1 && axis == 0) return {1, s[0], 1};
  if (s.size() == 2 && axis == 1) return {s[0], s[1], 1};
  if (s.size() == 2 && axis == 0) return {s[1], s[0], s[1]};
  shape_fail(kind, {s, Shape{axis}});
}

std::vector<double>& buffer(std::vector<std::vector<double>>& grads, const std::vector<Node>& nodes,
                            std::uint32_t id) {
  auto& g = grads[id];
  if (g.empty()) g.assign(nodes[id].size, 0.0);
  return g;
}

}  // namespace

Var matmul(Var a, Var b) {
  const auto d = matmul_dims(a.shape(), b.shape());
  const auto A = a.value();
  const auto B = b.value();
  std::vector<double> c(d.m * d.n, 0.0);
  for (std::size_t i = 0; i < d.m; ++i) {
    double* ci = c.data() + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double aip = A[i * d.k + p];
      if (aip == 0.0) continue;
      const double* bp = B.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += aip * bp[j];
    }
  }
  Shape out;
  if (a.shape().size() == 2) out.push_back(d.m);
  if (b.shape().size() == 2) out.push_back(d.n);
  if (out.empty()) out.push_back(1);
  const Var in[] = {a, b};
  return tape_of(a).record(OpKind::MatMul, std::move(out), std::move(c), in, {d.m, d.k, d.n});
}

Var add(Var a, Var b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  const auto x = a.value();
  const auto y = b.value();
  std::vector<double> out(x.begin(), x.end());
  std::size_t broadcast = 0;
  if (sa == sb) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  } else if (sa.size() == 2 && sb.size() == 1 && sb[0] == sa[1]) {
    broadcast = 1;
    for (std::size_t r = 0; r < sa[0]; ++r) {
      for (std::size_t c = 0; c < sa[1]; ++c) out[r * sa[1] + c] += y[c];
    }
  } else {
    shape_fail(OpKind::Add, {sa, sb});
  }
  const Var in[] = {a, b};
  return tape_of(a).record(OpKind::Add, sa, std::move(out), in, {broadcast, 0, 0});
}

Var sub(Var a, Var b) {
  if (a.shape() != b.shape()) shape_fail(OpKind::Sub, {a.shape(), b.shape()});
  const auto x = a.value();
  const auto y = b.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  const Var in[] = {a, b};
  return tape_of(a).record(OpKind::Sub, a.shape(), std::move(out), in);
}

Var mul(Var a, Var b) {
  if (a.shape() != b.shape()) shape_fail(OpKind::Mul, {a.shape(), b.shape()});
  const auto x = a.value();
  const auto y = b.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  const Var in[] = {a, b};
  return tape_of(a).record(OpKind::Mul, a.shape(), std::move(out), in);
}

Var scale(Var a, double factor) {
  const auto x = a.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  const Var in[] = {a};
  return tape_of(a).record(OpKind::Scale, a.shape(), std::move(out), in, {}, {}, factor);
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat of zero parts");
  const auto& s0 = parts[0].shape();
  const std::size_t rank = s0.size();
  if (rank > 2 || axis >= rank) shape_fail(OpKind::Concat, {s0, Shape{axis}});
  std::vector<double> out;
  Shape shape = s0;
  shape[axis] = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != rank) shape_fail(OpKind::Concat, {s0, s});
    if (rank == 2 && s[1 - axis] != s0[1 - axis]) shape_fail(OpKind::Concat, {s0, s});
    shape[axis] += s[axis];
  }
  out.reserve(numel(shape));
  if (rank == 1 || axis == 0) {
    for (const auto& p : parts) {
      const auto v = p.value();
      out.insert(out.end(), v.begin(), v.end());
    }
  } else {
    for (std::size_t r = 0; r < shape[0]; ++r) {
      for (const auto& p : parts) {
        const auto v = p.value();
        const auto c = p.shape()[1];
        out.insert(out.end(), v.begin() + static_cast<std::ptrdiff_t>(r * c),
                   v.begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
      }
    }
  }
  return tape_of(parts[0]).record(OpKind::Concat, std::move(shape), std::move(out), parts, {axis, 0, 0});
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var stack(std::span<const Var> rows) {
  if (rows.empty()) throw ContractError("stack of zero rows");
  const auto& s0 = rows[0].shape();
  if (s0.size() != 1) shape_fail(OpKind::Stack, {s0});
  std::vector<double> out;
  out.reserve(rows.size() * s0[0]);
  for (const auto& r : rows) {
    if (r.shape() != s0) shape_fail(OpKind::Stack, {s0, r.shape()});
    const auto v = r.value();
    out.insert(out.end(), v.begin(), v.end());
  }
  return tape_of(rows[0]).record(OpKind::Stack, Shape{rows.size(), s0[0]}, std::move(out), rows);
}

Var slice(Var a, std::size_t begin, std::size_t end) {
  const auto& s = a.shape();
  if (s.size() > 2 || begin >= end || end > s[0]) shape_fail(OpKind::Slice, {s, Shape{begin, end}});
  const std::size_t width = s.size() == 2 ? s[1] : 1;
  const auto v = a.value();
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(begin * width),
                          v.begin() + static_cast<std::ptrdiff_t>(end * width));
  Shape shape = s;
  shape[0] = end - begin;
  const Var in[] = {a};
  return tape_of(a).record(OpKind::Slice, std::move(shape), std::move(out), in, {begin, end, width});
}

Var row(Var a, std::size_t r) {
  const auto& s = a.shape();
  if (s.size() != 2 || r >= s[0]) shape_fail(OpKind::Row, {s, Shape{r}});
  const auto v = a.value();
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(r * s[1]),
                          v.begin() + static_cast<std::ptrdiff_t>((r + 1) * s[1]));
  const Var in[] = {a};
  return tape_of(a).record(OpKind::Row, Shape{s[1]}, std::move(out), in, {r, s[1], 0});
}

Var reshape(Var a, Shape shape) {
  if (numel(shape) != a.size()) shape_fail(OpKind::Reshape, {a.shape(), shape});
  const auto v = a.value();
  const Var in[] = {a};
  return tape_of(a).record(OpKind::Reshape, std::move(shape), std::vector<double>(v.begin(), v.end()), in);
}

Var tanh(Var a) {
  return unary(a, OpKind::Tanh, [](double x) { return std::tanh(x); });
}

Var sigmoid(Var a) {
  return unary(a, OpKind::Sigmoid, [](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

Var relu(Var a) {
  return unary(a, OpKind::Relu, [](double x) { return x > 0 ? x : 0.0; });
}

Var exp(Var a) {
  return unary(a, OpKind::Exp, [](double x) { return std::exp(x); });
}

Var log(Var a) {
  return unary(a, OpKind::Log, [](double x) { return std::log(x); });
}

Var abs(Var a) {
  return unary(a, OpKind::Abs, [](double x) { return std::fabs(x); });
}

Var log_sigmoid(Var a) {
  return unary(a, OpKind::LogSigmoid,
               [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::fabs(x))); });
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value()) s += x;
  const Var in[] = {a};
  return tape_of(a).record(OpKind::Sum, Shape{1}, {s}, in);
}

Var mean(Var a) {
  double s = 0.0;
  for (double x : a.value()) s += x;
  const Var in[] = {a};
  return tape_of(a).record(OpKind::Mean, Shape{1}, {s / static_cast<double>(a.size())}, in);
}

Var conv1d(Var x, Var kernel) {
  const auto& sx = x.shape();
  const auto& sk = kernel.shape();
  if (sx.size() > 2 || sk.size() != 3) shape_fail(OpKind::Conv1d, {sx, sk});
  const std::size_t len = sx[0];
  const std::size_t cin = sx.size() == 2 ? sx[1] : 1;
  const std::size_t cout = sk[0];
  const std::size_t width = sk[2];
  if (sk[1] != cin) shape_fail(OpKind::Conv1d, {sx, sk});
  const std::size_t pad = (width - 1) / 2;
  const auto X = x.value();
  const auto W = kernel.value();
  std::vector<double> y(len * cout, 0.0);
  for (std::size_t l = 0; l < len; ++l) {
    for (std::size_t k = 0; k < width; ++k) {
      const auto src = static_cast<std::ptrdiff_t>(l + k) - static_cast<std::ptrdiff_t>(pad);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      for (std::size_t c = 0; c < cin; ++c) {
        const double xv = X[static_cast<std::size_t>(src) * cin + c];
        for (std::size_t o = 0; o < cout; ++o) y[l * cout + o] += W[(o * cin + c) * width + k] * xv;
      }
    }
  }
  const Var in[] = {x, kernel};
  return tape_of(x).record(OpKind::Conv1d, Shape{len, cout}, std::move(y), in, {len, cin, cout});
}

Var embedding_lookup(Var table, std::size_t index) {
  const auto& s = table.shape();
  if (s.size() != 2 || index >= s[0]) shape_fail(OpKind::Embedding, {s, Shape{index}});
  const auto v = table.value();
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(index * s[1]),
                          v.begin() + static_cast<std::ptrdiff_t>((index + 1) * s[1]));
  const Var in[] = {table};
  return tape_of(table).record(OpKind::Embedding, Shape{s[1]}, std::move(out), in, {}, {index});
}

Var embedding_lookup(Var table, std::span<const std::size_t> indices) {
  const auto& s = table.shape();
  if (s.size() != 2 || indices.empty()) shape_fail(OpKind::Embedding, {s, Shape{indices.size()}});
  const auto v = table.value();
  std::vector<double> out;
  out.reserve(indices.size() * s[1]);
  for (auto idx : indices) {
    if (idx >= s[0]) shape_fail(OpKind::Embedding, {s, Shape{idx}});
    out.insert(out.end(), v.begin() + static_cast<std::ptrdiff_t>(idx * s[1]),
               v.begin() + static_cast<std::ptrdiff_t>((idx + 1) * s[1]));
  }
  const Var in[] = {table};
  return tape_of(table).record(OpKind::Embedding, Shape{indices.size(), s[1]}, std::move(out), in, {},
                               std::vector<std::size_t>(indices.begin(), indices.end()));
}

Var softmax(Var logits, std::size_t axis) {
  const auto& s = logits.shape();
  const auto lay = axis_layout(OpKind::Softmax, s, axis);
  const auto x = logits.value();
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericError("softmax", "non-finite logit");
  }
  std::vector<double> y(x.size());
  for (std::size_t o = 0; o < lay.outer; ++o) {
    const std::size_t base = lay.base(o, s, axis);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lay.length; ++i) mx = std::max(mx, x[base + i * lay.stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < lay.length; ++i) {
      const double e = std::exp(x[base + i * lay.stride] - mx);
      y[base + i * lay.stride] = e;
      z += e;
    }
    for (std::size_t i = 0; i < lay.length; ++i) y[base + i * lay.stride] /= z;
  }
  const Var in[] = {logits};
  return tape_of(logits).record(OpKind::Softmax, s, std::move(y), in, {axis, 0, 0});
}

Var softmax(Var logits) { return softmax(logits, logits.shape().size() - 1); }

Var log_softmax(Var logits) {
  const auto& s = logits.shape();
  const std::size_t axis = s.size() - 1;
  const auto lay = axis_layout(OpKind::LogSoftmax, s, axis);
  const auto x = logits.value();
  std::vector<double> y(x.size());
  for (std::size_t o = 0; o < lay.outer; ++o) {
    const std::size_t base = lay.base(o, s, axis);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lay.length; ++i) mx = std::max(mx, x[base + i]);
    double z = 0.0;
    for (std::size_t i = 0; i < lay.length; ++i) z += std::exp(x[base + i] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t i = 0; i < lay.length; ++i) y[base + i] = x[base + i] - lz;
  }
  const Var in[] = {logits};
  return tape_of(logits).record(OpKind::LogSoftmax, s, std::move(y), in, {axis, 0, 0});
}

Var kl_divergence(Var ref, Var gen, double floor) {
  if (ref.shape() != gen.shape()) shape_fail(OpKind::KlDivergence, {ref.shape(), gen.shape()});
  const auto p = ref.value();
  const auto q = gen.value();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0 || q[i] < 0) throw ContractError("kl_divergence: negative probability");
    total += p[i] * (std::log(std::max(p[i], floor)) - std::log(std::max(q[i], floor)));
  }
  const Var in[] = {ref, gen};
  return tape_of(ref).record(OpKind::KlDivergence, Shape{1}, {total}, in, {}, {}, floor);
}

Var detach(Var a) {
  const auto v = a.value();
  const Var in[] = {a};
  return tape_of(a).record(OpKind::Detach, a.shape(), std::vector<double>(v.begin(), v.end()), in);
}

namespace detail {

void propagate(const std::vector<Node>& nodes, std::uint32_t id, std::span<const double> g,
               std::vector<std::vector<double>>& grads) {
  const Node& n = nodes[id];
  const double* y = n.data();
  auto input = [&](std::size_t k) -> const Node& { return nodes[n.inputs[k]]; };
  auto wants = [&](std::size_t k) { return input(k).requires_grad; };
  auto gbuf = [&](std::size_t k) -> std::vector<double>& { return buffer(grads, nodes, n.inputs[k]); };

  switch (n.kind) {
    case OpKind::Leaf:
    case OpKind::Constant:
    case OpKind::Detach:
      return;
    case OpKind::MatMul: {
      const std::size_t m = n.iarg[0], kk = n.iarg[1], nn = n.iarg[2];
      const double* A = input(0).data();
      const double* B = input(1).data();
      if (wants(0)) {
        auto& ga = gbuf(0);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < kk; ++p) {
            const double* bp = B + p * nn;
            const double* gi = g.data() + i * nn;
            double acc = 0.0;
            for (std::size_t j = 0; j < nn; ++j) acc += gi[j] * bp[j];
            ga[i * kk + p] += acc;
          }
        }
      }
      if (wants(1)) {
        auto& gb = gbuf(1);
        for (std::size_t i = 0; i < m; ++i) {
          const double* gi = g.data() + i * nn;
          for (std::size_t p = 0; p < kk; ++p) {
            const double aip = A[i * kk + p];
            if (aip == 0.0) continue;
            double* gbp = gb.data() + p * nn;
            for (std::size_t j = 0; j < nn; ++j) gbp[j] += aip * gi[j];
          }
        }
      }
      return;
    }
    case OpKind::Add: {
      if (wants(0)) {
        auto& ga = gbuf(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(1)) {
        auto& gb = gbuf(1);
        if (n.iarg[0] == 0) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        } else {
          const std::size_t cols = n.shape[1];
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % cols] += g[i];
        }
      }
      return;
    }
    case OpKind::Sub: {
      if (wants(0)) {
        auto& ga = gbuf(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(1)) {
        auto& gb = gbuf(1);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
      return;
    }
    case OpKind::Mul: {
      const double* a = input(0).data();
      const double* b = input(1).data();
      if (wants(0)) {
        auto& ga = gbuf(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (wants(1)) {
        auto& gb = gbuf(1);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      return;
    }
    case OpKind::Scale: {
      auto& ga = gbuf(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.farg;
      return;
    }
    case OpKind::Concat: {
      const std::size_t axis = n.iarg[0];
      if (n.shape.size() == 1 || axis == 0) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const std::size_t sz = input(k).size;
          if (wants(k)) {
            auto& gk = gbuf(k);
            for (std::size_t i = 0; i < sz; ++i) gk[i] += g[off + i];
          }
          off += sz;
        }
      } else {
        const std::size_t rows = n.shape[0];
        const std::size_t total = n.shape[1];
        std::size_t col = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const std::size_t c = input(k).shape[1];
          if (wants(k)) {
            auto& gk = gbuf(k);
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t j = 0; j < c; ++j) gk[r * c + j] += g[r * total + col + j];
            }
          }
          col += c;
        }
      }
      return;
    }
    case OpKind::Stack: {
      const std::size_t width = n.shape[1];
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        if (!wants(k)) continue;
        auto& gk = gbuf(k);
        for (std::size_t j = 0; j < width; ++j) gk[j] += g[k * width + j];
      }
      return;
    }
    case OpKind::Slice: {
      auto& ga = gbuf(0);
      const std::size_t off = n.iarg[0] * n.iarg[2];
      for (std::size_t i = 0; i < g.size(); ++i) ga[off + i] += g[i];
      return;
    }
    case OpKind::Row: {
      auto& ga = gbuf(0);
      const std::size_t off = n.iarg[0] * n.iarg[1];
      for (std::size_t i = 0; i < g.size(); ++i) ga[off + i] += g[i];
      return;
    }
    case OpKind::Reshape: {
      auto& ga = gbuf(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      return;
    }
    case OpKind::Tanh: {
      auto& ga = gbuf(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
      return;
    }
    case OpKind::Sigmoid: {
      auto& ga = gbuf(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      return;
    }
    case OpKind::Relu: {
      auto& ga = gbuf(0);
      const double* x = input(0).data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += x[i] > 0 ? g[i] : 0.0;
      return;
    }
    case OpKind::Exp: {
      auto& ga = gbuf(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      return;
    }
    case OpKind::Log: {
      auto& ga = gbuf(0);
      const double* x = input(0).data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
      return;
    }
    case OpKind::Abs: {
      auto& ga = gbuf(0);
      const double* x = input(0).data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += x[i] > 0 ? g[i] : (x[i] < 0 ? -g[i] : 0.0);
      return;
    }
    case OpKind::LogSigmoid: {
      auto& ga = gbuf(0);
      const double* x = input(0).data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        // d/dx log sigmoid(x) = sigmoid(-x)
        const double s = x[i] >= 0 ? std::exp(-x[i]) / (1.0 + std::exp(-x[i])) : 1.0 / (1.0 + std::exp(x[i]));
        ga[i] += g[i] * s;
      }
      return;
    }
    case OpKind::Sum: {
      auto& ga = gbuf(0);
      for (auto& v : ga) v += g[0];
      return;
    }
    case OpKind::Mean: {
      auto& ga = gbuf(0);
      const double s = g[0] / static_cast<double>(ga.size());
      for (auto& v : ga) v += s;
      return;
    }
    case OpKind::Conv1d: {
      const std::size_t len = n.iarg[0], cin = n.iarg[1], cout = n.iarg[2];
      const std::size_t width = input(1).shape[2];
      const std::size_t pad = (width - 1) / 2;
      const double* X = input(0).data();
      const double* W = input(1).data();
      const bool gx_on = wants(0);
      const bool gw_on = wants(1);
      double* gx = gx_on ? gbuf(0).data() : nullptr;
      double* gw = gw_on ? gbuf(1).data() : nullptr;
      for (std::size_t l = 0; l < len; ++l) {
        for (std::size_t k = 0; k < width; ++k) {
          const auto src = static_cast<std::ptrdiff_t>(l + k) - static_cast<std::ptrdiff_t>(pad);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
          const auto s = static_cast<std::size_t>(src);
          for (std::size_t c = 0; c < cin; ++c) {
            for (std::size_t o = 0; o < cout; ++o) {
              const double go = g[l * cout + o];
              const std::size_t widx = (o * cin + c) * width + k;
              if (gx) gx[s * cin + c] += go * W[widx];
              if (gw) gw[widx] += go * X[s * cin + c];
            }
          }
        }
      }
      return;
    }
    case OpKind::Embedding: {
      auto& ga = gbuf(0);
      const std::size_t width = input(0).shape[1];
      for (std::size_t r = 0; r < n.indices.size(); ++r) {
        const std::size_t idx = n.indices[r];
        for (std::size_t j = 0; j < width; ++j) ga[idx * width + j] += g[r * width + j];
      }
      return;
    }
    case OpKind::Softmax: {
      const std::size_t axis = n.iarg[0];
      const auto lay = axis_layout(OpKind::Softmax, n.shape, axis);
      auto& ga = gbuf(0);
      for (std::size_t o = 0; o < lay.outer; ++o) {
        const std::size_t base = lay.base(o, n.shape, axis);
        double dot = 0.0;
        for (std::size_t i = 0; i < lay.length; ++i) {
          const std::size_t at = base + i * lay.stride;
          dot += g[at] * y[at];
        }
        for (std::size_t i = 0; i < lay.length; ++i) {
          const std::size_t at = base + i * lay.stride;
          ga[at] += y[at] * (g[at] - dot);
        }
      }
      return;
    }
    case OpKind::LogSoftmax: {
      const std::size_t axis = n.iarg[0];
      const auto lay = axis_layout(OpKind::LogSoftmax, n.shape, axis);
      auto& ga = gbuf(0);
      for (std::size_t o = 0; o < lay.outer; ++o) {
        const std::size_t base = lay.base(o, n.shape, axis);
        double gsum = 0.0;
        for (std::size_t i = 0; i < lay.length; ++i) gsum += g[base + i];
        for (std::size_t i = 0; i < lay.length; ++i) ga[base + i] += g[base + i] - std::exp(y[base + i]) * gsum;
      }
      return;
    }
    case OpKind::KlDivergence: {
      const double floor = n.farg;
      const double* p = input(0).data();
      const double* q = input(1).data();
      const std::size_t sz = input(0).size;
      if (wants(0)) {
        auto& gp = gbuf(0);
        for (std::size_t i = 0; i < sz; ++i) {
          const double d = std::log(std::max(p[i], floor)) - std::log(std::max(q[i], floor));
          gp[i] += g[0] * (d + (p[i] > floor ? 1.0 : 0.0));
        }
      }
      if (wants(1)) {
        auto& gq = gbuf(1);
        for (std::size_t i = 0; i < sz; ++i) {
          if (q[i] > floor) gq[i] -= g[0] * p[i] / q[i];
        }
      }
      return;
    }
  }
}

}  // namespace detail

}  // namespace seqforce::ad
