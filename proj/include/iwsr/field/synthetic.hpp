// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

#include "iwsr/field/grid.hpp"

namespace iwsr::field {

enum class TopographyKind { flat, sill, slope };

TopographyKind parse_topography(std::string_view name);
std::string_view to_string(TopographyKind kind);

/// Bottom height profile h_b(x), metres above the domain floor.
struct TopographyProfile {
  TopographyKind kind = TopographyKind::flat;
  // Gaussian sill: centre as a fraction of the domain length, e-folding
  // half-width (m) and peak height as a fraction of the depth.
  double sill_center = 0.6;
  double sill_width = 1500.0;
  double sill_height = 0.4;
  // Linear slope: grade (m/m) starting at a fraction of the domain length,
  // capped at a fraction of the depth.
  double slope_grade = 0.03;
  double slope_start = 0.3;
  double slope_cap = 0.6;

  /// Height at horizontal position x (m) in a domain of length `length` and depth `depth`.
  double height(double x, double length, double depth) const;
  /// dh/dx at x.
  double slope(double x, double length, double depth) const;
};

/// Configuration of the analytic internal-solitary-wave generator.
struct GenConfig {
  std::size_t nt = 64, nz = 64, nx = 256;
  double dt = 60.0;     // s
  double depth = 500.0; // m; dz = depth / nz
  double dx = 50.0;     // m
  double amplitude = 30.0;   // a0, m (positive lifts isopycnals)
  double wavelength = 800.0; // lambda, m
  double phase_speed = 0.8;  // c, m/s
  double start = 0.25;       // initial wave centre as a fraction of the domain length
  // Background stratification: tanh thermocline/halocline.
  double t_surface = 28.0, t_bottom = 6.0;     // degC
  double s_surface = 33.6, s_bottom = 34.6;    // psu
  double cline_height = 350.0;  // m above the floor
  double cline_thickness = 60.0;
  /// Gaussian noise added to fluid cells, as a fraction of each variable's fluid std.
  double noise = 0.0;
  std::uint64_t seed = 0;

  double dz() const { return depth / static_cast<double>(nz); }
  double length() const { return dx * static_cast<double>(nx); }
  /// Throws ConfigError / ResolutionError on invalid settings.
  void validate() const;
};

/// Undisturbed background profiles at height z (m above the floor).
double background_temperature(const GenConfig& cfg, double z);
double background_salinity(const GenConfig& cfg, double z);

/// Analytic wave state at one point: isopycnal displacement and the
/// velocities u = c * d(eta)/dz, w = -c * d(eta)/dx derived from the
/// streamfunction psi = c * eta.
struct WavePoint {
  double eta = 0, u = 0, w = 0;
};
WavePoint wave_at(const GenConfig& cfg, const TopographyProfile& topo, double t, double z, double x);

/// Builds the synthetic grid. Terrain cells (z below h_b) are solid and
/// hold zeros for every variable, as raw model output would.
FieldGrid generate_synthetic(const GenConfig& cfg, const TopographyProfile& topo);

/// RMS over all times of the central-difference divergence du/dx + dw/dz at
/// fluid cells whose four (z, x) neighbours are fluid. 0 when there are none.
double continuity_rms(const FieldGrid& grid);

}  // namespace iwsr::field
