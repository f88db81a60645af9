// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace iwsr::field {

/// Physical variables, in storage / channel order.
enum class Var : std::size_t { T = 0, S = 1, u = 2, w = 3 };
inline constexpr std::size_t kNumVars = 4;
inline constexpr std::array<std::string_view, kNumVars> kVarNames = {"T", "S", "u", "w"};

/// Per-variable z-score statistics, computed over fluid cells only.
struct NormStats {
  std::array<float, kNumVars> mean{};
  std::array<float, kNumVars> std{1.f, 1.f, 1.f, 1.f};

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// A (t, z, x) grid of temperature, salinity and the two velocity
/// components over a time-invariant terrain mask. Index (t, z, x) is stored
/// at (t * nz + z) * nx + x; z grows upward from the domain floor.
struct FieldGrid {
  std::size_t nt = 0, nz = 0, nx = 0;
  float dt = 1.f, dz = 1.f, dx = 1.f;  // s, m, m
  std::array<std::vector<float>, kNumVars> vars;
  std::vector<std::uint8_t> terrain;  // nz * nx, 1 = solid
  bool terrain_filled = false;
  std::optional<NormStats> norm;  // set while values are z-scored

  static FieldGrid zeros(std::size_t nt, std::size_t nz, std::size_t nx, float dt = 1.f,
                         float dz = 1.f, float dx = 1.f);

  std::size_t cells() const { return nt * nz * nx; }
  std::size_t plane() const { return nz * nx; }
  std::size_t index(std::size_t t, std::size_t z, std::size_t x) const { return (t * nz + z) * nx + x; }

  std::vector<float>& var(Var v) { return vars[static_cast<std::size_t>(v)]; }
  const std::vector<float>& var(Var v) const { return vars[static_cast<std::size_t>(v)]; }
  float at(Var v, std::size_t t, std::size_t z, std::size_t x) const { return var(v)[index(t, z, x)]; }

  bool solid(std::size_t z, std::size_t x) const { return terrain[z * nx + x] != 0; }
  std::size_t fluid_cells_per_plane() const;
  bool normalized() const { return norm.has_value(); }

  /// Throws DimensionError when array sizes disagree with (nt, nz, nx).
  void validate() const;

  friend bool operator==(const FieldGrid&, const FieldGrid&) = default;
};

}  // namespace iwsr::field
