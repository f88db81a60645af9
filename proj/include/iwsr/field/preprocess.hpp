// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>

#include "iwsr/field/grid.hpp"

namespace iwsr::field {

/// Replaces every terrain cell by the fluid mean of the same variable at the
/// same time index. Fluid cells are untouched; the result is flagged as filled.
/// Throws DegenerateDomainError when the mask has no fluid cell.
FieldGrid terrain_fill(const FieldGrid& grid);

/// Mean and std per variable over fluid cells (std of a constant variable is 1).
NormStats fluid_stats(const FieldGrid& grid);
/// Same over every cell, terrain included.
NormStats whole_grid_stats(const FieldGrid& grid);

struct ValueRange {
  float min = 0, max = 0;
};
ValueRange fluid_range(const FieldGrid& grid, Var v);
ValueRange whole_grid_range(const FieldGrid& grid, Var v);

/// Z-scores each variable with fluid-only statistics. Requires terrain_fill
/// (OrderingError otherwise) and a grid that is not already normalised.
std::pair<FieldGrid, NormStats> normalize(const FieldGrid& grid);

/// Z-scores with whole-grid statistics and no fill requirement. Used when
/// terrain handling is switched off.
std::pair<FieldGrid, NormStats> normalize_unfilled(const FieldGrid& grid);

/// Z-scores with given statistics (inference inputs use the training stats).
/// OrderingError when the grid is already normalised.
FieldGrid normalize_with(const FieldGrid& grid, const NormStats& stats);

FieldGrid denormalize(const FieldGrid& grid, const NormStats& stats);
/// Uses the statistics stored on the grid (ContractError when absent).
FieldGrid denormalize(const FieldGrid& grid);

}  // namespace iwsr::field
