// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace iwsr::fft {

using cplx = std::complex<double>;

/// Unnormalised in-place DFT of arbitrary length (mixed radix over the prime
/// factors of n, direct summation for prime lengths). `inverse` flips the
/// sign of the exponent.
void dft(std::span<cplx> data, bool inverse);

/// Orthonormal 3-D transform over a row-major (n0, n1, n2) block.
void dft3(std::span<cplx> data, std::size_t n0, std::size_t n1, std::size_t n2, bool inverse);

}  // namespace iwsr::fft
