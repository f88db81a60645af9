// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "iwsr/field/grid.hpp"
#include "iwsr/random.hpp"

namespace iwsr::field {

/// Per-axis (t, z, x) integer factors or sizes.
using Factors = std::array<std::size_t, 3>;

/// Block-mean pooling by `factors`. The terrain mask is pooled by majority
/// vote over each (z, x) block, ties going to solid. Throws DimensionError
/// naming the largest valid crop when a size is not divisible.
FieldGrid downsample(const FieldGrid& grid, Factors factors);

/// Copies the sub-block [origin, origin + sizes). RangeError when it does
/// not fit.
FieldGrid extract_patch(const FieldGrid& grid, Factors origin, Factors sizes);

/// Seeded uniform sampler of valid patch origins.
class PatchSampler {
 public:
  PatchSampler(Factors grid_sizes, Factors patch_sizes, std::uint64_t seed);
  Factors next();
  /// Number of valid offsets per axis.
  Factors extent() const { return extent_; }

 private:
  Factors extent_;
  Rng rng_;
};

enum class UpsampleMethod { trilinear, cubic };
UpsampleMethod parse_upsample_method(std::string_view name);

/// Separable interpolation along t, z and x. HR cell i sits at LR coordinate
/// (i + 0.5) / f - 0.5, so cell centres of both grids line up. Trilinear
/// extrapolates linearly past the outer centres; cubic is Catmull-Rom with
/// clamped taps. The mask is upsampled by nearest neighbour.
FieldGrid baseline_upsample(const FieldGrid& grid, Factors factors, UpsampleMethod method);

}  // namespace iwsr::field
