// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "iwsr/ad/tensor.hpp"

namespace iwsr::ad {

using Triple = std::array<std::size_t, 3>;

// Elementwise arithmetic with right-aligned (numpy-style) broadcasting.
template <class R> Tensor<R> add(const Tensor<R>& a, const Tensor<R>& b);
template <class R> Tensor<R> sub(const Tensor<R>& a, const Tensor<R>& b);
template <class R> Tensor<R> mul(const Tensor<R>& a, const Tensor<R>& b);

template <class R> Tensor<R> scale(const Tensor<R>& a, R factor);
template <class R> Tensor<R> add_scalar(const Tensor<R>& a, R value);
template <class R> Tensor<R> square(const Tensor<R>& a);
template <class R> Tensor<R> abs(const Tensor<R>& a);

template <class R> Tensor<R> relu(const Tensor<R>& a);
template <class R> Tensor<R> sigmoid(const Tensor<R>& a);
template <class R> Tensor<R> silu(const Tensor<R>& a);

/// Sum / mean of all elements (rank-0 result).
template <class R> Tensor<R> sum(const Tensor<R>& a);
template <class R> Tensor<R> mean(const Tensor<R>& a);
/// Sum / mean along one axis, which is removed from the shape.
template <class R> Tensor<R> sum(const Tensor<R>& a, std::size_t axis);
template <class R> Tensor<R> mean(const Tensor<R>& a, std::size_t axis);

template <class R> Tensor<R> reshape(const Tensor<R>& a, Shape shape);
template <class R> Tensor<R> concat(const std::vector<Tensor<R>>& parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
template <class R> Tensor<R> slice(const Tensor<R>& a, std::size_t axis, std::size_t begin, std::size_t end);

/// [N, K] x [K, M] -> [N, M].
template <class R> Tensor<R> matmul(const Tensor<R>& a, const Tensor<R>& b);

struct Conv3dOptions {
  Triple stride{1, 1, 1};
  Triple padding{0, 0, 0};
};

/// Cross-correlation of input [Cin, T, Z, X] with kernel [Cout, Cin, kt, kz, kx].
/// `bias` ([Cout]) may be an undefined tensor.
template <class R>
Tensor<R> conv3d(const Tensor<R>& input, const Tensor<R>& kernel, const Tensor<R>& bias,
                 const Conv3dOptions& options = {});

/// Group normalisation over [C, ...] with per-channel affine gamma/beta ([C]).
template <class R>
Tensor<R> group_norm(const Tensor<R>& x, std::size_t groups, const Tensor<R>& gamma,
                     const Tensor<R>& beta, R eps = R(1e-5));

/// Nearest-neighbour repeat / block average over the trailing three axes.
template <class R> Tensor<R> nearest_upsample(const Tensor<R>& x, Triple factors);
template <class R> Tensor<R> avg_pool(const Tensor<R>& x, Triple factors);

/// Samples grid [C, T, Z, X] at points [N, 3] of normalised (t, z, x)
/// coordinates in [0, 1]; returns [N, C]. Coordinate s maps to lattice
/// position s * (n - 1). Differentiable in both the grid and the points.
/// Out-of-range coordinates are clamped and counted.
template <class R> Tensor<R> trilinear_sample(const Tensor<R>& grid, const Tensor<R>& points);

std::size_t trilinear_clamp_count();
void reset_trilinear_clamp_count();

/// Orthonormal DFT over the trailing three axes. Leading axes are batched.
template <class R> ComplexPair<R> fft3(const Tensor<R>& x);
/// Real part of the orthonormal inverse DFT of a complex pair.
template <class R> Tensor<R> ifft3(const ComplexPair<R>& z);

template <class R> Tensor<R> operator+(const Tensor<R>& a, const Tensor<R>& b) { return add(a, b); }
template <class R> Tensor<R> operator-(const Tensor<R>& a, const Tensor<R>& b) { return sub(a, b); }
template <class R> Tensor<R> operator*(const Tensor<R>& a, const Tensor<R>& b) { return mul(a, b); }

}  // namespace iwsr::ad
