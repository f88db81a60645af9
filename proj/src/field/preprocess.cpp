// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/field/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "iwsr/error.hpp"

namespace iwsr::field {
namespace {

NormStats stats_over(const FieldGrid& grid, bool fluid_only) {
  NormStats s;
  const std::size_t plane = grid.plane();
  for (std::size_t v = 0; v < kNumVars; ++v) {
    const auto& a = grid.vars[v];
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (fluid_only && grid.terrain[i % plane]) continue;
      sum += a[i];
      ++n;
    }
    if (n == 0) throw DegenerateDomainError("no cells to compute statistics over");
    const double mean = sum / static_cast<double>(n);
    double ss = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (fluid_only && grid.terrain[i % plane]) continue;
      const double d = a[i] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    s.mean[v] = static_cast<float>(mean);
    s.std[v] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? static_cast<float>(sd) : 1.f;
  }
  return s;
}

ValueRange range_over(const FieldGrid& grid, Var v, bool fluid_only) {
  const auto& a = grid.var(v);
  ValueRange r{std::numeric_limits<float>::infinity(), -std::numeric_limits<float>::infinity()};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (fluid_only && grid.terrain[i % grid.plane()]) continue;
    r.min = std::min(r.min, a[i]);
    r.max = std::max(r.max, a[i]);
  }
  return r;
}

FieldGrid apply_zscore(const FieldGrid& grid, const NormStats& s) {
  FieldGrid out = grid;
  for (std::size_t v = 0; v < kNumVars; ++v) {
    const float m = s.mean[v], inv = 1.f / s.std[v];
    for (float& x : out.vars[v]) x = (x - m) * inv;
  }
  out.norm = s;
  return out;
}

}  // namespace

FieldGrid terrain_fill(const FieldGrid& grid) {
  grid.validate();
  const std::size_t fluid = grid.fluid_cells_per_plane();
  if (fluid == 0) throw DegenerateDomainError("terrain mask has no fluid cell; nothing to fill from");
  FieldGrid out = grid;
  const std::size_t plane = grid.plane();
  for (std::size_t v = 0; v < kNumVars; ++v) {
    auto& a = out.vars[v];
    for (std::size_t t = 0; t < grid.nt; ++t) {
      float* p = a.data() + t * plane;
      double sum = 0;
      for (std::size_t i = 0; i < plane; ++i)
        if (!grid.terrain[i]) sum += p[i];
      const float mean = static_cast<float>(sum / static_cast<double>(fluid));
      for (std::size_t i = 0; i < plane; ++i)
        if (grid.terrain[i]) p[i] = mean;
    }
  }
  out.terrain_filled = true;
  return out;
}

NormStats fluid_stats(const FieldGrid& grid) { return stats_over(grid, true); }
NormStats whole_grid_stats(const FieldGrid& grid) { return stats_over(grid, false); }
ValueRange fluid_range(const FieldGrid& grid, Var v) { return range_over(grid, v, true); }
ValueRange whole_grid_range(const FieldGrid& grid, Var v) { return range_over(grid, v, false); }

std::pair<FieldGrid, NormStats> normalize(const FieldGrid& grid) {
  if (!grid.terrain_filled) throw OrderingError("normalize requires terrain_fill to be applied first");
  if (grid.normalized()) throw OrderingError("grid is already normalized");
  const NormStats s = fluid_stats(grid);
  return {apply_zscore(grid, s), s};
}

std::pair<FieldGrid, NormStats> normalize_unfilled(const FieldGrid& grid) {
  if (grid.normalized()) throw OrderingError("grid is already normalized");
  const NormStats s = whole_grid_stats(grid);
  return {apply_zscore(grid, s), s};
}

FieldGrid normalize_with(const FieldGrid& grid, const NormStats& stats) {
  if (grid.normalized()) throw OrderingError("grid is already normalized");
  return apply_zscore(grid, stats);
}

FieldGrid denormalize(const FieldGrid& grid, const NormStats& s) {
  FieldGrid out = grid;
  for (std::size_t v = 0; v < kNumVars; ++v) {
    const float m = s.mean[v], sd = s.std[v];
    for (float& x : out.vars[v]) x = x * sd + m;
  }
  out.norm.reset();
  return out;
}

FieldGrid denormalize(const FieldGrid& grid) {
  if (!grid.norm) throw ContractError("grid carries no normalization statistics");
  return denormalize(grid, *grid.norm);
}

}  // namespace iwsr::field
