// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "iwsr/field/grid.hpp"
#include "iwsr/random.hpp"

namespace iwsr::sampling {

/// Normalised (t, z, x) in the unit cube; lattice index n maps to n / (N - 1).
using Point = std::array<double, 3>;

enum class Provenance : std::uint8_t { edge, random, lattice };

struct EdgeCell {
  std::size_t z, x;
  friend bool operator==(const EdgeCell&, const EdgeCell&) = default;
};

/// Fluid cells 4-adjacent to a solid cell, in row-major order, together
/// with the mask they were taken from.
struct EdgeSet {
  std::size_t nz = 0, nx = 0;
  std::vector<std::uint8_t> mask;  // nz * nx, 1 = solid
  std::vector<EdgeCell> cells;
  /// Set when the mask is all fluid or all solid.
  bool degenerate = false;

  std::size_t length() const { return cells.size(); }
  bool solid_at(const Point& p) const;
  Point centre(const EdgeCell& c) const;
};

EdgeSet extract_edges(const std::vector<std::uint8_t>& mask, std::size_t nz, std::size_t nx);
EdgeSet extract_edges(const field::FieldGrid& grid);

struct EdgeSample {
  std::vector<Point> points;
  std::size_t requested = 0;
  /// Fewer than `requested` points survived the filter after 10 rounds.
  bool partial = false;
};

/// ceil(s * L) points spread evenly along the edge list (random phase), each
/// shifted by a uniform offset in the (z, x) disk of radius r and given a
/// uniform t. Points leaving the cube or landing in solid cells are redrawn
/// for up to 10 rounds. `target` overrides the requested count when set.
EdgeSample sample_edge_points(const EdgeSet& edges, double density, double radius, Rng& rng,
                              std::size_t target = 0);

struct SamplingConfig {
  double density = 1.0;  // s, points per edge cell
  double radius = 0.0;   // r, normalised units; 0 picks two LR cells (see default_radius)
  double edge_fraction = 0.5;  // a
  double a_min = 0.05, a_max = 0.95;
  std::size_t batch = 1024;    // M
  bool edge_enabled = true;

  void validate() const;
};

/// Two LR cell widths along the finer of z and x, in normalised HR units.
double default_radius(std::size_t hr_nz, std::size_t hr_nx, std::size_t factor_z, std::size_t factor_x);

struct SampleBatch {
  std::vector<Point> points;
  std::vector<Provenance> flags;
  std::size_t n_edge = 0, n_random = 0;
  bool partial = false;
};

/// round(a * M) edge points (surviving ones counted) plus uniform fluid
/// points up to M. Pure function of (edges, cfg, seed).
SampleBatch assemble_batch(const EdgeSet& edges, const SamplingConfig& cfg, std::uint64_t seed);

/// M uniform fluid points; what assemble_batch produces with edges disabled.
SampleBatch uniform_batch(const EdgeSet& edges, std::size_t batch, std::uint64_t seed);

/// a' = clamp(a * (L_e / max(L_r, 1e-12))^kappa, a_min, a_max).
double update_edge_coefficient(double a, double edge_loss, double random_loss, double a_min, double a_max,
                               double kappa = 0.5);

}  // namespace iwsr::sampling
