// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/sampling/edge.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "iwsr/error.hpp"

namespace iwsr::sampling {
namespace {

constexpr int kFilterRounds = 10;

double lattice_coord(std::size_t i, std::size_t n) {
  return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
}

std::size_t nearest_index(double s, std::size_t n) {
  if (n <= 1) return 0;
  const double q = std::round(std::clamp(s, 0.0, 1.0) * static_cast<double>(n - 1));
  return static_cast<std::size_t>(q);
}

bool inside_cube(const Point& p) {
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) return false;
  return true;
}

Point random_fluid_point(const EdgeSet& e, Rng& rng) {
  for (std::size_t tries = 0; tries < 1000000; ++tries) {
    const Point p{uniform01(rng), uniform01(rng), uniform01(rng)};
    if (!e.solid_at(p)) return p;
  }
  throw DegenerateDomainError("no fluid cell found for random sampling");
}

}  // namespace

bool EdgeSet::solid_at(const Point& p) const {
  if (mask.empty()) return false;
  return mask[nearest_index(p[1], nz) * nx + nearest_index(p[2], nx)] != 0;
}

Point EdgeSet::centre(const EdgeCell& c) const { return {0.0, lattice_coord(c.z, nz), lattice_coord(c.x, nx)}; }

EdgeSet extract_edges(const std::vector<std::uint8_t>& mask, std::size_t nz, std::size_t nx) {
  if (mask.size() != nz * nx) {
    throw DimensionError("mask has " + std::to_string(mask.size()) + " cells, expected " + std::to_string(nz * nx));
  }
  EdgeSet e;
  e.nz = nz;
  e.nx = nx;
  e.mask = mask;
  const std::size_t solid = static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
  e.degenerate = solid == 0 || solid == mask.size();
  auto is_solid = [&](std::size_t z, std::size_t x) { return mask[z * nx + x] != 0; };
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t x = 0; x < nx; ++x) {
      if (is_solid(z, x)) continue;
      const bool touches = (z > 0 && is_solid(z - 1, x)) || (z + 1 < nz && is_solid(z + 1, x)) ||
                           (x > 0 && is_solid(z, x - 1)) || (x + 1 < nx && is_solid(z, x + 1));
      if (touches) e.cells.push_back({z, x});
    }
  return e;
}

EdgeSet extract_edges(const field::FieldGrid& grid) { return extract_edges(grid.terrain, grid.nz, grid.nx); }

EdgeSample sample_edge_points(const EdgeSet& edges, double density, double radius, Rng& rng, std::size_t target) {
  if (!(density > 0)) throw ConfigError("edge sampling density must be positive");
  if (!(radius >= 0)) throw ConfigError("edge offset radius must be >= 0");
  EdgeSample out;
  const std::size_t L = edges.length();
  out.requested = target ? target : static_cast<std::size_t>(std::ceil(density * static_cast<double>(L)));
  if (L == 0 || out.requested == 0) {
    out.partial = out.requested > 0;
    return out;
  }
  out.points.reserve(out.requested);
  for (int round = 0; round < kFilterRounds && out.points.size() < out.requested; ++round) {
    const std::size_t need = out.requested - out.points.size();
    // Base points evenly spread over the edge list with a random phase.
    const double phase = uniform01(rng);
    for (std::size_t k = 0; k < need; ++k) {
      const auto j = std::min(L - 1, static_cast<std::size_t>((static_cast<double>(k) + phase) *
                                                              static_cast<double>(L) / static_cast<double>(need)));
      Point p = edges.centre(edges.cells[j]);
      const double rho = radius * std::sqrt(uniform01(rng));
      const double theta = 2.0 * std::numbers::pi * uniform01(rng);
      p[0] = uniform01(rng);
      p[1] += rho * std::sin(theta);
      p[2] += rho * std::cos(theta);
      if (inside_cube(p) && !edges.solid_at(p)) out.points.push_back(p);
    }
  }
  out.partial = out.points.size() < out.requested;
  return out;
}

void SamplingConfig::validate() const {
  if (!(density > 0)) throw ConfigError("sampling density s must be positive");
  if (!(radius >= 0)) throw ConfigError("sampling radius r must be >= 0");
  if (!(a_min > 0 && a_max < 1 && a_min <= a_max)) throw ConfigError("edge coefficient bounds must satisfy 0 < a_min <= a_max < 1");
  if (edge_enabled && !(edge_fraction >= a_min && edge_fraction <= a_max)) {
    throw ConfigError("edge coefficient a = " + std::to_string(edge_fraction) + " is outside [a_min, a_max]");
  }
  if (batch == 0) throw ConfigError("batch size M must be >= 1");
}

double default_radius(std::size_t hr_nz, std::size_t hr_nx, std::size_t fz, std::size_t fx) {
  const double wz = hr_nz > 1 ? static_cast<double>(fz) / static_cast<double>(hr_nz - 1) : 1.0;
  const double wx = hr_nx > 1 ? static_cast<double>(fx) / static_cast<double>(hr_nx - 1) : 1.0;
  return 2.0 * std::min(wz, wx);
}

SampleBatch uniform_batch(const EdgeSet& edges, std::size_t batch, std::uint64_t seed) {
  Rng rng(seed);
  SampleBatch b;
  for (std::size_t i = 0; i < batch; ++i) {
    b.points.push_back(random_fluid_point(edges, rng));
    b.flags.push_back(Provenance::random);
  }
  b.n_random = batch;
  return b;
}

SampleBatch assemble_batch(const EdgeSet& edges, const SamplingConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t target =
      cfg.edge_enabled && edges.length() > 0
          ? static_cast<std::size_t>(std::llround(cfg.edge_fraction * static_cast<double>(cfg.batch)))
          : 0;
  if (target == 0) return uniform_batch(edges, cfg.batch, seed);
  Rng rng(seed);
  const EdgeSample es = sample_edge_points(edges, cfg.density, cfg.radius, rng, target);
  SampleBatch b;
  b.partial = es.partial;
  b.points = es.points;
  b.flags.assign(b.points.size(), Provenance::edge);
  b.n_edge = b.points.size();
  while (b.points.size() < cfg.batch) {
    b.points.push_back(random_fluid_point(edges, rng));
    b.flags.push_back(Provenance::random);
  }
  b.n_random = cfg.batch - b.n_edge;
  return b;
}

double update_edge_coefficient(double a, double le, double lr, double a_min, double a_max, double kappa) {
  const double ratio = std::max(le, 0.0) / std::max(lr, 1e-12);
  return std::clamp(a * std::pow(ratio, kappa), a_min, a_max);
}

}  // namespace iwsr::sampling
