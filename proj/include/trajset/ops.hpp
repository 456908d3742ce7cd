// SPDX-License-Identifier: Apache-2.0
//
// Differentiable tensor primitives. Every op validates shapes (ShapeError),
// rejects non-finite results (NumericError) and records a backward rule when
// a tape is active and an input requires a gradient.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trajset/tensor.hpp"

namespace trajset {

inline constexpr double kLayerNormEps = 1e-5;
/// Logit assigned to excluded attention keys before the softmax.
inline constexpr double kExcludedLogit = -1e30;

// Linear algebra

/// [m x k] . [k x n], or batched [B x m x k] . [B x k x n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// x [... x din] . w [din x dout] (+ b [dout] when defined).
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor affine(const Tensor& x, const Tensor& w);

// Elementwise

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// log(max(x, floor)); the gradient is zero where the clamp is active.
Tensor log_clamped(const Tensor& x, double floor);

// Reductions

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Euclidean norm over the last axis. Subgradient 0 at the origin.
Tensor row_norm(const Tensor& x);

// Normalization

Tensor softmax_rows(const Tensor& x);
/// Softmax over the last axis with `excluded` (same numel as x, 1 = excluded)
/// forced to kExcludedLogit. Rows with every entry excluded produce all-zero
/// weights and receive zero gradient.
Tensor masked_softmax_rows(const Tensor& x, std::span<const std::uint8_t> excluded);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = kLayerNormEps);

// Layout

Tensor reshape(const Tensor& x, Shape shape);
/// Swaps two axes (materialized copy).
Tensor transpose(const Tensor& x, std::size_t axis_a, std::size_t axis_b);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
std::vector<Tensor> split(const Tensor& x, std::size_t axis,
                          const std::vector<std::size_t>& sizes);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t length);
/// Repeats a size-1 axis `times` times; the backward rule sums the copies.
Tensor repeat_axis(const Tensor& x, std::size_t axis, std::size_t times);

}  // namespace trajset
