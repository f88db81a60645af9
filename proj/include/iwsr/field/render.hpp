// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "iwsr/field/grid.hpp"

namespace iwsr::field {

/// Binary PPM (P6) of the (z, x) slice at time t: width nx, height nz, the
/// surface row on top. Fluid values use a blue-white-red diverging map
/// centred on 0 when the slice changes sign, on its mid-range otherwise.
/// Terrain is drawn in kTerrainRgb. RangeError when t is out of range.
std::vector<std::uint8_t> render_slice_ppm(const FieldGrid& grid, Var v, std::size_t t);

inline constexpr std::uint8_t kTerrainRgb[3] = {139, 90, 43};

}  // namespace iwsr::field
