#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mfplan/diffkit/graph.hpp"

namespace mfplan::diffkit {

// Elementwise arithmetic with numpy-style broadcasting of size-1 axes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);

/// a[..., M, K] x b[K, N] -> [..., M, N]
Var matmul(const Var& a, const Var& b);
/// Batched product of rank-3 operands: a[B, M, K] x b[B, K, N] (or b[B, N, K]
/// when `transpose_b`) -> [B, M, N].
Var bmm(const Var& a, const Var& b, bool transpose_b = false);
/// x[..., K] W[K, N] + bias[N]
Var affine(const Var& x, const Var& weight, const Var& bias);

Var relu(const Var& x);
/// Exact (erf) GELU.
Var gelu(const Var& x);
Var sin(const Var& x);
Var cos(const Var& x);

/// Normalizes over the last axis, then applies gain[D] and bias[D].
Var layernorm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
Var softmax(const Var& x, int axis = -1);

Var concat(const std::vector<Var>& parts, int axis);
Var slice(const Var& x, int axis, std::size_t begin, std::size_t end);
Var reshape(const Var& x, Shape shape);
Var permute(const Var& x, const std::vector<std::size_t>& perm);

Var sum(const Var& x);
Var mean(const Var& x);
/// Mean absolute value (L1 reduction).
Var mean_abs(const Var& x);
/// Mean squared value (squared-L2 reduction).
Var mean_square(const Var& x);

/// Value passes through; no gradient and no tangent flow back.
Var stop_gradient(const Var& x);

/// Applies an opaque scalar function. It has no derivative rules, so using it
/// on a value that carries a tangent or needs a gradient throws UnsupportedOp.
Var map_opaque(const Var& x, const std::function<double(double)>& fn, const std::string& name);

}  // namespace mfplan::diffkit
