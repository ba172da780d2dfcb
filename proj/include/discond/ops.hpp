// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives. Binary elementwise ops broadcast with NumPy
// rules (shapes aligned from the right, extents of 1 stretch). Reductions
// accumulate in f64.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "discond/tensor.hpp"

namespace discond {

// Elementwise binary (broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, float s);
Tensor mul_scalar(const Tensor& x, float s);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, float s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, float s) { return add_scalar(a, -s); }
inline Tensor operator*(const Tensor& a, float s) { return mul_scalar(a, s); }
inline Tensor operator*(float s, const Tensor& a) { return mul_scalar(a, s); }

// Elementwise unary.
Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
/// |x| with subgradient 0 at x == 0.
Tensor abs(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Along the last axis.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);

// Reductions.
Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, std::size_t axis);

// Layout.
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);

// Layers.
/// x [B, in], weight [out, in], bias [out] (may be undefined) -> [B, out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
/// x [B, C, H, W], weight [O, C, k, k], bias [O] -> [B, O, Ho, Wo].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);
/// x [B, C, H, W], weight [C, O, k, k], bias [O] -> [B, O, (H-1)s - 2p + k, ...].
Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        std::size_t stride, std::size_t padding);

// Losses and latent plumbing.
/// Bernoulli negative log-likelihood on logits, summed over all but the
/// leading axis -> [B].
Tensor bce_with_logits(const Tensor& logits, const Tensor& target);
/// x [B, d, P], picks block index[b] per row -> [B, P].
Tensor gather_mode(const Tensor& x, std::span<const std::size_t> index);
/// x [B, P] -> [B, d*P] with row b's values in block index[b], zeros elsewhere.
Tensor scatter_mode(const Tensor& x, std::span<const std::size_t> index, std::size_t modes);
/// Constant [B, classes] one-hot rows.
Tensor one_hot(std::span<const std::size_t> index, std::size_t classes);

/// Row-wise argmax over the last axis; ties resolve to the lowest index.
std::vector<std::size_t> argmax_rows(const Tensor& x);
std::size_t argmax_lowest(std::span<const float> row);

}  // namespace discond
