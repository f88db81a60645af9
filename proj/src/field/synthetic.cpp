// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/field/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "iwsr/error.hpp"
#include "iwsr/random.hpp"

namespace iwsr::field {

TopographyKind parse_topography(std::string_view name) {
  if (name == "flat") return TopographyKind::flat;
  if (name == "sill") return TopographyKind::sill;
  if (name == "slope") return TopographyKind::slope;
  throw ConfigError("unknown topography '" + std::string(name) + "' (expected flat, sill or slope)");
}

std::string_view to_string(TopographyKind kind) {
  switch (kind) {
    case TopographyKind::flat: return "flat";
    case TopographyKind::sill: return "sill";
    case TopographyKind::slope: return "slope";
  }
  return "?";
}

double TopographyProfile::height(double x, double length, double depth) const {
  switch (kind) {
    case TopographyKind::flat:
      return 0.0;
    case TopographyKind::sill: {
      const double r = (x - sill_center * length) / sill_width;
      return sill_height * depth * std::exp(-r * r);
    }
    case TopographyKind::slope: {
      const double h = slope_grade * (x - slope_start * length);
      return std::clamp(h, 0.0, slope_cap * depth);
    }
  }
  return 0.0;
}

double TopographyProfile::slope(double x, double length, double depth) const {
  switch (kind) {
    case TopographyKind::flat:
      return 0.0;
    case TopographyKind::sill: {
      const double r = (x - sill_center * length) / sill_width;
      return -2.0 * r / sill_width * sill_height * depth * std::exp(-r * r);
    }
    case TopographyKind::slope: {
      const double h = slope_grade * (x - slope_start * length);
      return (h > 0.0 && h < slope_cap * depth) ? slope_grade : 0.0;
    }
  }
  return 0.0;
}

void GenConfig::validate() const {
  if (nt == 0 || nz == 0 || nx == 0) throw ConfigError("grid sizes must be positive");
  if (!(dt > 0) || !(dx > 0) || !(depth > 0)) throw ConfigError("grid spacings and depth must be positive");
  if (!(std::abs(amplitude) < depth)) {
    throw ConfigError("wave amplitude " + std::to_string(amplitude) + " m must be below the depth " +
                      std::to_string(depth) + " m");
  }
  if (!(wavelength > 2.0 * dx)) {
    throw ResolutionError("wavelength " + std::to_string(wavelength) + " m is not resolved: it must exceed 2*dx = " +
                          std::to_string(2.0 * dx) + " m");
  }
  if (!(noise >= 0)) throw ConfigError("noise must be non-negative");
  if (!(cline_thickness > 0)) throw ConfigError("cline thickness must be positive");
}

double background_temperature(const GenConfig& cfg, double z) {
  const double s = 0.5 * (1.0 + std::tanh((z - cfg.cline_height) / cfg.cline_thickness));
  return cfg.t_bottom + (cfg.t_surface - cfg.t_bottom) * s;
}

double background_salinity(const GenConfig& cfg, double z) {
  const double s = 0.5 * (1.0 + std::tanh((z - cfg.cline_height) / cfg.cline_thickness));
  return cfg.s_bottom + (cfg.s_surface - cfg.s_bottom) * s;
}

WavePoint wave_at(const GenConfig& cfg, const TopographyProfile& topo, double t, double z, double x) {
  const double H = cfg.depth;
  const double L = cfg.length();
  const double h = topo.height(x, L, H);
  if (z <= h) return {};
  const double hp = topo.slope(x, L, H);
  const double D = H - h;
  const double sigma = std::clamp((z - h) / D, 0.0, 1.0);
  const double sigma_x = hp * (z - H) / (D * D);
  const double xi = (x - cfg.start * L - cfg.phase_speed * t) / cfg.wavelength;
  const double ch = std::cosh(xi);
  const double sech2 = std::isfinite(ch) ? 1.0 / (ch * ch) : 0.0;
  const double th = std::tanh(xi);
  const double pi = std::numbers::pi;
  const double sn = std::sin(pi * sigma), cs = std::cos(pi * sigma);
  const double a0 = cfg.amplitude;

  WavePoint p;
  p.eta = a0 * sech2 * sn;
  const double eta_z = a0 * sech2 * cs * pi / D;
  const double eta_x = a0 * (-2.0 * sech2 * th / cfg.wavelength * sn + sech2 * cs * pi * sigma_x);
  p.u = cfg.phase_speed * eta_z;
  p.w = -cfg.phase_speed * eta_x;
  return p;
}

FieldGrid generate_synthetic(const GenConfig& cfg, const TopographyProfile& topo) {
  cfg.validate();
  const double dz = cfg.dz();
  const double L = cfg.length();
  FieldGrid g = FieldGrid::zeros(cfg.nt, cfg.nz, cfg.nx, static_cast<float>(cfg.dt),
                                 static_cast<float>(dz), static_cast<float>(cfg.dx));
  for (std::size_t i = 0; i < cfg.nx; ++i) {
    const double x = (static_cast<double>(i) + 0.5) * cfg.dx;
    const double h = topo.height(x, L, cfg.depth);
    if (!(h >= 0.0 && h < cfg.depth)) {
      throw ConfigError("topography height " + std::to_string(h) + " m at x = " + std::to_string(x) +
                        " m leaves no water column");
    }
    for (std::size_t k = 0; k < cfg.nz; ++k) {
      const double z = (static_cast<double>(k) + 0.5) * dz;
      g.terrain[k * cfg.nx + i] = z < h ? 1 : 0;
    }
  }
  if (g.fluid_cells_per_plane() == 0) throw ConfigError("topography covers the whole domain");

  auto& T = g.var(Var::T);
  auto& S = g.var(Var::S);
  auto& U = g.var(Var::u);
  auto& W = g.var(Var::w);
  for (std::size_t n = 0; n < cfg.nt; ++n) {
    const double t = static_cast<double>(n) * cfg.dt;
    for (std::size_t k = 0; k < cfg.nz; ++k) {
      const double z = (static_cast<double>(k) + 0.5) * dz;
      for (std::size_t i = 0; i < cfg.nx; ++i) {
        if (g.solid(k, i)) continue;
        const double x = (static_cast<double>(i) + 0.5) * cfg.dx;
        const WavePoint p = wave_at(cfg, topo, t, z, x);
        const std::size_t idx = g.index(n, k, i);
        T[idx] = static_cast<float>(background_temperature(cfg, z - p.eta));
        S[idx] = static_cast<float>(background_salinity(cfg, z - p.eta));
        U[idx] = static_cast<float>(p.u);
        W[idx] = static_cast<float>(p.w);
      }
    }
  }

  if (cfg.noise > 0) {
    Rng rng(cfg.seed);
    for (std::size_t v = 0; v < kNumVars; ++v) {
      auto& a = g.vars[v];
      double m = 0, m2 = 0;
      std::size_t count = 0;
      for (std::size_t idx = 0; idx < a.size(); ++idx) {
        if (g.terrain[idx % g.plane()]) continue;
        m += a[idx];
        m2 += static_cast<double>(a[idx]) * a[idx];
        ++count;
      }
      m /= static_cast<double>(count);
      const double sd = std::sqrt(std::max(0.0, m2 / static_cast<double>(count) - m * m));
      for (std::size_t idx = 0; idx < a.size(); ++idx) {
        if (g.terrain[idx % g.plane()]) continue;
        a[idx] = static_cast<float>(a[idx] + cfg.noise * sd * normal01(rng));
      }
    }
  }
  return g;
}

double continuity_rms(const FieldGrid& g) {
  double ss = 0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < g.nt; ++t)
    for (std::size_t k = 1; k + 1 < g.nz; ++k)
      for (std::size_t i = 1; i + 1 < g.nx; ++i) {
        if (g.solid(k, i) || g.solid(k - 1, i) || g.solid(k + 1, i) || g.solid(k, i - 1) || g.solid(k, i + 1)) continue;
        const double ux = (double(g.at(Var::u, t, k, i + 1)) - g.at(Var::u, t, k, i - 1)) / (2.0 * g.dx);
        const double wz = (double(g.at(Var::w, t, k + 1, i)) - g.at(Var::w, t, k - 1, i)) / (2.0 * g.dz);
        ss += (ux + wz) * (ux + wz);
        ++n;
      }
  return n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
}

}  // namespace iwsr::field
