// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/field/grid.hpp"

#include <algorithm>
#include <string>

#include "iwsr/error.hpp"

namespace iwsr::field {

FieldGrid FieldGrid::zeros(std::size_t nt, std::size_t nz, std::size_t nx, float dt, float dz, float dx) {
  FieldGrid g;
  g.nt = nt;
  g.nz = nz;
  g.nx = nx;
  g.dt = dt;
  g.dz = dz;
  g.dx = dx;
  for (auto& v : g.vars) v.assign(nt * nz * nx, 0.f);
  g.terrain.assign(nz * nx, 0);
  return g;
}

std::size_t FieldGrid::fluid_cells_per_plane() const {
  return static_cast<std::size_t>(std::count(terrain.begin(), terrain.end(), std::uint8_t{0}));
}

void FieldGrid::validate() const {
  for (std::size_t v = 0; v < kNumVars; ++v) {
    if (vars[v].size() != cells()) {
      throw DimensionError("variable " + std::string(kVarNames[v]) + " holds " + std::to_string(vars[v].size()) +
                           " values, grid (nt, nz, nx) = (" + std::to_string(nt) + ", " + std::to_string(nz) +
                           ", " + std::to_string(nx) + ") needs " + std::to_string(cells()));
    }
  }
  if (terrain.size() != plane()) {
    throw DimensionError("terrain mask holds " + std::to_string(terrain.size()) + " cells, expected nz * nx = " +
                         std::to_string(plane()));
  }
}

}  // namespace iwsr::field
