// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

// Self-contained numerical checks shared by `iwsr selftest` and the
// acceptance binary. Each returns the measured quantities; callers compare
// them against their own tolerances.

#pragma once

#include <cstddef>
#include <cstdint>

namespace iwsr::selftest {

struct GradientCheck {
  double ops_error = 0;         // worst norm-wise relative error over the op suite
  double end_to_end_error = 0;  // tiny encoder + decoder, all inputs and weights jointly
  std::size_t seeds = 0;
};
/// Reverse-mode gradients against central differences (float64, step 1e-5)
/// for seeds 0 .. seeds-1.
GradientCheck gradient_suite(std::size_t seeds = 5);

struct FftCheck {
  double roundtrip_max_error = 0;  // float32 fft3 -> ifft3
  double parseval_relative = 0;
};
FftCheck fft_suite(std::uint64_t seed = 5);

struct ContinuityCheck {
  double coarse = 0, fine = 0;  // continuity RMS of the sill generator at dz, dx and half of each
  double ratio = 0;
  double linear_residual = 0;  // worst |du/dx + dw/dz| of u = x, w = -z through the stencil
};
ContinuityCheck continuity_suite();

}  // namespace iwsr::selftest
