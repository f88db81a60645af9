// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "iwsr/container.hpp"
#include "iwsr/field/grid.hpp"

namespace iwsr::field {

// Tensors: "T", "S", "u", "w" (nt, nz, nx); "terrain" (nz, nx) as 0/1;
// "meta" = [dt, dz, dx] followed by the 4 means and 4 stds when normalised;
// "flags" = [terrain_filled].
std::vector<NamedTensor> grid_to_tensors(const FieldGrid& grid);
/// Throws FormatError when a required tensor is missing
/// or malformed.
FieldGrid grid_from_tensors(const std::vector<NamedTensor>& tensors);

void save_grid(const FieldGrid& grid, const std::filesystem::path& path);
FieldGrid load_grid(const std::filesystem::path& path);

}  // namespace iwsr::field
